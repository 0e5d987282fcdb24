//! Tables, float formatting and atomic output directories.
//!
//! Every float leaves the program with 17 significant digits so that written
//! artifacts round-trip exactly.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::ser::Serializer as _;
use serde::Serialize;

/// `{:.16e}`: 17 significant digits. Non-finite values print as `NaN`/`inf`.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format_f64(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Int(v) => s.serialize_i64(*v),
            Cell::Real(v) => s.serialize_f64(*v),
            Cell::Text(v) => s.serialize_str(v),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum TableFormat {
    /// RFC 4180 CSV with a header row
    #[default]
    Csv,
    /// JSON object with `columns` and `rows`
    Json,
    /// whitespace-delimited, `#`-prefixed header (gnuplot-ready)
    Gnuplot,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
            TableFormat::Gnuplot => "dat",
        }
    }
}

/// A named rectangular data table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Column `x` followed by one column per series.
    pub fn from_columns(name: &str, header: &[&str], x: &[f64], series: &[&[f64]]) -> Self {
        let mut t = Self::new(name, header);
        for (i, xv) in x.iter().enumerate() {
            let mut row = vec![Cell::Real(*xv)];
            row.extend(series.iter().map(|s| Cell::Real(s[i])));
            t.push(row);
        }
        t
    }

    pub fn write<W: Write>(&self, format: TableFormat, mut w: W) -> io::Result<()> {
        match format {
            TableFormat::Csv => {
                let mut wtr = csv::Writer::from_writer(w);
                wtr.write_record(&self.columns)?;
                for row in &self.rows {
                    wtr.write_record(row.iter().map(Cell::render))?;
                }
                wtr.flush()
            }
            TableFormat::Json => {
                w.write_all(to_json_string(self).as_bytes())?;
                w.write_all(b"\n")
            }
            TableFormat::Gnuplot => {
                writeln!(w, "# {}", self.columns.join(" "))?;
                for row in &self.rows {
                    let line: Vec<String> = row
                        .iter()
                        .map(|c| match c {
                            Cell::Text(s) => format!("\"{s}\""),
                            other => other.render(),
                        })
                        .collect();
                    writeln!(w, "{}", line.join(" "))?;
                }
                Ok(())
            }
        }
    }
}

/// Pretty JSON formatter writing every float with 17 significant digits;
/// non-finite floats become `null`.
struct Sig17Formatter<'a> {
    inner: serde_json::ser::PrettyFormatter<'a>,
}

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {$(
        fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.inner.$name(writer $(, $arg)*)
        }
    )*};
}

impl serde_json::ser::Formatter for Sig17Formatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    forward! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

/// Serializes `value` as pretty JSON with 17-significant-digit floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let fmt = Sig17Formatter {
        inner: serde_json::ser::PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value
        .serialize(&mut ser)
        .expect("serializing plain data to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Serializes an `f64` slice through the 17-digit formatter.
pub fn json_f64_array(values: &[f64]) -> String {
    let mut buf = Vec::new();
    let fmt = Sig17Formatter {
        inner: serde_json::ser::PrettyFormatter::with_indent(b""),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    ser.collect_seq(values).expect("in-memory serialization");
    String::from_utf8(buf).expect("utf-8")
}

/// Output directory built in a hidden staging directory and renamed into
/// place on [`StagedDir::commit`]; dropping it uncommitted removes everything.
pub struct StagedDir {
    staging: tempfile::TempDir,
    target: PathBuf,
}

impl StagedDir {
    /// Stages `<root>/<name>[-<timestamp>]`.
    pub fn create(root: &Path, name: &str, timestamp: bool) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        let dir_name = if timestamp {
            format!("{name}-{}", chrono::Local::now().format("%Y%m%dT%H%M%S%.3f"))
        } else {
            name.to_string()
        };
        let staging = tempfile::Builder::new()
            .prefix(&format!(".{dir_name}.partial-"))
            .tempdir_in(root)?;
        Ok(Self {
            staging,
            target: root.join(dir_name),
        })
    }

    pub fn path(&self) -> &Path {
        self.staging.path()
    }

    pub fn target(&self) -> &Path {
        &self.target
    }

    pub fn write(&self, file: &str, contents: &[u8]) -> io::Result<()> {
        fs::write(self.staging.path().join(file), contents)
    }

    pub fn write_table(&self, table: &Table, format: TableFormat) -> io::Result<()> {
        let path = self
            .staging
            .path()
            .join(format!("{}.{}", table.name, format.extension()));
        let file = io::BufWriter::new(fs::File::create(path)?);
        table.write(format, file)
    }

    /// Moves the staged directory into place, replacing an older directory of
    /// the same name.
    pub fn commit(self) -> io::Result<PathBuf> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target)?;
        }
        let staged = self.staging.keep();
        fs::rename(&staged, &self.target)?;
        Ok(self.target)
    }
}
