//! The `vnlw` command line.
//!
//! Exit status: 0 success, 1 I/O failure, 2 usage error or missing config,
//! 3 schema violation, 4 numerical failure.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bipartite::{
    collapse_statistics, energy_expectation, entanglement_entropy, entropy_from_reduced, expand_kernel,
    from_product, position_density, schmidt, transition_amplitudes,
};
use crate::config::{Config, ConfigError, StateSpec};
use crate::dynamics::propagate_vnl_observed;
use crate::error::VnlwError;
use crate::lattice::HamiltonianMatrix;
use crate::output::{to_json_string, Cell, StagedDir, Table, TableFormat};
use crate::scenarios::{
    random_kernel, run_scenario, seeded_rng, two_slit_state, ScenarioConfig, ScenarioReport, ScenarioSpec,
    SlitModes, TwoSlitCoefficients,
};
use crate::spectra::eigensystem;
use crate::state::{BipartiteWave, WaveFunction};
use crate::CMat;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SCHEMA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Default output root when neither `--output-dir` nor `VNLW_OUTPUT_DIR` is set.
pub const DEFAULT_OUTPUT_DIR: &str = "vnlw-out";

#[derive(Debug, Parser)]
#[command(name = "vnlw", version, about = "Bipartite wave-function dynamics and spectroscopy on a 1-D grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scenario(s) in the config
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Run only this scenario (default parameters if the config has none)
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Lowest `spectra.k` eigenpairs
    Spectrum(CommonArgs),
    /// All level gaps E_n − E_m
    Gaps(CommonArgs),
    /// Propagate `dynamics.initial` under the two-copy equation
    Evolve(CommonArgs),
    /// Schmidt decomposition of `dynamics.initial`
    Schmidt(CommonArgs),
    /// Entanglement entropy of `dynamics.initial` by both routes
    Entropy(CommonArgs),
    /// Collapse statistics of `dynamics.initial` over `spectra.k` levels
    Collapse(CommonArgs),
    /// Parse and validate the config; writes nothing
    ValidateConfig(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON configuration file
    #[arg(long, short)]
    config: PathBuf,
    /// Root directory for output artifacts
    #[arg(long, env = "VNLW_OUTPUT_DIR", default_value = DEFAULT_OUTPUT_DIR)]
    output_dir: PathBuf,
    /// Override a config value (repeatable), e.g. `--set spectra.k=6`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for random draws (overrides the config's `seed`)
    #[arg(long)]
    seed: Option<u64>,
    /// Table format
    #[arg(long, value_enum, default_value_t)]
    format: TableFormat,
    /// Name output directories without a timestamp
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubcommandKind {
    Run,
    Spectrum,
    Gaps,
    Evolve,
    Schmidt,
    Entropy,
    Collapse,
    ValidateConfig,
}

impl SubcommandKind {
    pub fn name(self) -> &'static str {
        match self {
            SubcommandKind::Run => "run",
            SubcommandKind::Spectrum => "spectrum",
            SubcommandKind::Gaps => "gaps",
            SubcommandKind::Evolve => "evolve",
            SubcommandKind::Schmidt => "schmidt",
            SubcommandKind::Entropy => "entropy",
            SubcommandKind::Collapse => "collapse",
            SubcommandKind::ValidateConfig => "validate-config",
        }
    }
}

/// A parsed and validated command line.
#[derive(Debug, Clone)]
pub struct CliInvocation {
    pub subcommand: SubcommandKind,
    pub config_path: PathBuf,
    /// the config with overrides and `--seed` applied
    pub config: Config,
    pub output_dir: PathBuf,
    pub overrides: Vec<String>,
    pub seed: Option<u64>,
    pub format: TableFormat,
    pub timestamp: bool,
    pub scenario: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    /// `--help` / `--version` output; not an error
    Info(String),
    Usage(String),
    Schema(ConfigError),
    Numerical(VnlwError),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => EXIT_OK,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::Numerical(VnlwError::UnknownScenario(_)) => EXIT_SCHEMA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Info(s) | CliError::Usage(s) => write!(f, "{}", s.trim_end()),
            CliError::Schema(e) => write!(f, "schema violation: {e}"),
            CliError::Numerical(e) => write!(f, "{e}"),
            CliError::Io(s) => write!(f, "i/o error: {s}"),
        }
    }
}

impl From<VnlwError> for CliError {
    fn from(e: VnlwError) -> Self {
        CliError::Numerical(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Schema(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Parses arguments (without the program name), loads the config, applies
/// overrides and validates it.
pub fn parse_invocation<I, T>(argv: I) -> Result<CliInvocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = std::iter::once(OsString::from("vnlw")).chain(argv.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(args).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    })?;
    let (kind, common, scenario) = match cli.command {
        Command::Run { common, scenario } => (SubcommandKind::Run, common, scenario),
        Command::Spectrum(c) => (SubcommandKind::Spectrum, c, None),
        Command::Gaps(c) => (SubcommandKind::Gaps, c, None),
        Command::Evolve(c) => (SubcommandKind::Evolve, c, None),
        Command::Schmidt(c) => (SubcommandKind::Schmidt, c, None),
        Command::Entropy(c) => (SubcommandKind::Entropy, c, None),
        Command::Collapse(c) => (SubcommandKind::Collapse, c, None),
        Command::ValidateConfig(c) => (SubcommandKind::ValidateConfig, c, None),
    };
    if !common.config.is_file() {
        return Err(CliError::Usage(format!(
            "missing config: {} is not a readable file",
            common.config.display()
        )));
    }
    for o in &common.overrides {
        if !o.contains('=') {
            return Err(CliError::Usage(format!("--set expects KEY=VALUE, got `{o}`")));
        }
    }
    let mut config = Config::from_file(&common.config, &common.overrides)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(name) = &scenario {
        ScenarioSpec::from_name(name).map_err(|_| {
            CliError::Schema(ConfigError::new(
                "scenario",
                format!("unknown scenario `{name}` (expected one of {})", ScenarioSpec::NAMES.join(", ")),
            ))
        })?;
    }
    Ok(CliInvocation {
        subcommand: kind,
        config_path: common.config,
        config,
        output_dir: common.output_dir,
        overrides: common.overrides,
        seed: common.seed,
        format: common.format,
        timestamp: !common.no_timestamp,
        scenario,
    })
}

/// Entry point used by the binary: parse, execute, report.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse_invocation(argv) {
        Ok(inv) => execute(&inv),
        Err(CliError::Info(text)) => {
            println!("{}", text.trim_end());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs an invocation, writing artifacts under `inv.output_dir`. Returns the
/// process exit status.
pub fn execute(inv: &CliInvocation) -> i32 {
    match execute_inner(inv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Files for one output directory.
struct Artifact {
    name: String,
    summary: Value,
    tables: Vec<Table>,
    line: String,
    elapsed: Duration,
}

impl Artifact {
    fn new(name: &str, key: &str, value: f64, summary: Value, tables: Vec<Table>, start: Instant) -> Self {
        let elapsed = start.elapsed();
        Self {
            name: name.to_string(),
            line: format!(
                "{name}: {key}={} ({:.3} s)",
                crate::output::format_f64(value),
                elapsed.as_secs_f64()
            ),
            summary,
            tables,
            elapsed,
        }
    }

    fn from_report(dir: String, r: ScenarioReport) -> Self {
        Self {
            name: dir,
            line: r.summary_line(),
            summary: serde_json::to_value(&r).expect("report serializes"),
            elapsed: r.elapsed,
            tables: r.tables,
        }
    }

    fn write(&self, inv: &CliInvocation) -> Result<PathBuf, CliError> {
        let staged = StagedDir::create(&inv.output_dir, &self.name, inv.timestamp)?;
        staged.write("summary.json", (to_json_string(&self.summary) + "\n").as_bytes())?;
        for t in &self.tables {
            staged.write_table(t, inv.format)?;
        }
        let timing = json!({ "elapsed_seconds": self.elapsed.as_secs_f64() });
        staged.write("timing.json", (to_json_string(&timing) + "\n").as_bytes())?;
        Ok(staged.commit()?)
    }
}

fn execute_inner(inv: &CliInvocation) -> Result<(), CliError> {
    let base = inv.config_path.parent().unwrap_or(Path::new("."));
    let artifacts = match inv.subcommand {
        SubcommandKind::ValidateConfig => {
            validate_fully(inv, base)?;
            println!("valid: {}", inv.config_path.display());
            return Ok(());
        }
        SubcommandKind::Run => return run(inv, base),
        SubcommandKind::Spectrum => vec![spectrum(inv, base)?],
        SubcommandKind::Gaps => {
            let sc = inv
                .config
                .scenario_config(ScenarioSpec::GapSpectroscopy(Default::default()), base)?;
            let mut a = Artifact::from_report("gaps".into(), run_scenario(&sc)?);
            a.line = format!(
                "gaps: distinct_gaps={} ({:.3} s)",
                a.summary["key_metric"]["value"].as_f64().unwrap_or(f64::NAN),
                a.elapsed.as_secs_f64()
            );
            vec![a]
        }
        SubcommandKind::Evolve => vec![evolve(inv, base)?],
        SubcommandKind::Schmidt => vec![schmidt_cmd(inv, base)?],
        SubcommandKind::Entropy => vec![entropy_cmd(inv, base)?],
        SubcommandKind::Collapse => vec![collapse_cmd(inv, base)?],
    };
    for a in artifacts {
        a.write(inv)?;
        println!("{}", a.line);
    }
    Ok(())
}

fn validate_fully(inv: &CliInvocation, base: &Path) -> Result<(), CliError> {
    let grid = inv.config.grid.build()?;
    inv.config.potential.resolve(&grid, base)?;
    if inv.config.scenario.is_some() {
        inv.config.scenario_configs(base)?;
    }
    Ok(())
}

fn run(inv: &CliInvocation, base: &Path) -> Result<(), CliError> {
    let mut specs: Vec<ScenarioSpec> = inv
        .config
        .scenario
        .as_ref()
        .map(|l| l.as_slice().to_vec())
        .unwrap_or_default();
    if let Some(name) = &inv.scenario {
        specs.retain(|s| s.name() == name);
        if specs.is_empty() {
            specs.push(ScenarioSpec::from_name(name)?);
        }
    }
    if specs.is_empty() {
        return Err(ConfigError::new("scenario", "no scenario configured").into());
    }
    let configs = specs
        .into_iter()
        .map(|s| inv.config.scenario_config(s, base))
        .collect::<Result<Vec<_>, _>>()?;
    let names = directory_names(&configs);

    // independent scenarios run concurrently; each run is sequential
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| scope.spawn(move || run_scenario(cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(VnlwError::InvalidParameters("scenario panicked".into()))))
            .collect()
    });

    let mut first_err = None;
    for (name, result) in names.into_iter().zip(results) {
        match result {
            Ok(report) => {
                let a = Artifact::from_report(name, report);
                a.write(inv)?;
                println!("{}", a.line);
            }
            Err(e) => {
                eprintln!("error: {name}: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(CliError::Numerical(e)),
        None => Ok(()),
    }
}

fn directory_names(configs: &[ScenarioConfig]) -> Vec<String> {
    configs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let name = c.scenario.name();
            let repeated = configs.iter().filter(|o| o.scenario.name() == name).count() > 1;
            if repeated {
                format!("{name}-{i}")
            } else {
                name.to_string()
            }
        })
        .collect()
}

fn hamiltonian(inv: &CliInvocation, base: &Path) -> Result<HamiltonianMatrix, CliError> {
    let grid = inv.config.grid.build()?;
    let spec = inv.config.potential.resolve(&grid, base)?;
    let u = crate::lattice::sample_potential(&grid, &spec)?;
    Ok(crate::lattice::build_hamiltonian(
        &grid,
        &u,
        inv.config.units.hbar,
        inv.config.units.mass,
    )?)
}

/// Builds the two-copy state described by `spec`, normalized.
pub fn build_state(spec: &StateSpec, h: &HamiltonianMatrix, seed: u64) -> crate::Result<BipartiteWave> {
    let grid = *h.grid();
    let psi = match spec {
        StateSpec::Gaussian {
            center,
            sigma,
            momentum,
        } => {
            let psi = WaveFunction::gaussian(&grid, *center, *sigma, *momentum)?;
            from_product(&psi, &psi)?
        }
        StateSpec::Eigenpair { n, m } => {
            let eigs = eigensystem(h, n.max(m) + 1)?;
            from_product(&eigs.state(*n), &eigs.state(*m))?
        }
        StateSpec::Superposition { amplitudes } => {
            let eigs = eigensystem(h, amplitudes.len())?;
            let amps = (0..grid.n_points())
                .map(|i| {
                    amplitudes
                        .iter()
                        .enumerate()
                        .map(|(n, a)| a * eigs.state_values(n)[i])
                        .sum()
                })
                .collect();
            let psi = WaveFunction::new(&grid, amps)?;
            from_product(&psi, &psi)?
        }
        StateSpec::Amplitudes { c } => {
            let k = c.len();
            let eigs = eigensystem(h, k)?;
            let m = CMat::from_fn(k, k, |i, j| c[i][j]);
            BipartiteWave::new(&grid, expand_kernel(&m, &eigs.state_matrix()))?
        }
        StateSpec::TwoSlit {
            sigma,
            separation,
            coefficients,
        } => {
            let modes = SlitModes::gaussian(&grid, *sigma, *separation)?;
            two_slit_state(&modes, &TwoSlitCoefficients::from_array(*coefficients)?)?
        }
        StateSpec::Random => random_kernel(&grid, &mut seeded_rng(seed)),
    };
    psi.normalized()
}

fn initial_state(inv: &CliInvocation, h: &HamiltonianMatrix) -> Result<BipartiteWave, CliError> {
    Ok(build_state(&inv.config.dynamics.initial, h, inv.config.seed)?)
}

fn config_echo(inv: &CliInvocation) -> Value {
    serde_json::to_value(&inv.config).expect("config serializes")
}

fn spectrum(inv: &CliInvocation, base: &Path) -> Result<Artifact, CliError> {
    let start = Instant::now();
    let h = hamiltonian(inv, base)?;
    let eigs = eigensystem(&h, inv.config.spectra.k)?;
    let summary = json!({
        "command": "spectrum",
        "config": config_echo(inv),
        "energies": eigs.energies(),
        "orthonormality_error": eigs.orthonormality_error(),
        "max_relative_residual": eigs.max_relative_residual(&h),
    });
    let mut energies = Table::new("energies", &["n", "energy"]);
    for (n, e) in eigs.energies().iter().enumerate() {
        energies.push(vec![n.into(), (*e).into()]);
    }
    let labels: Vec<String> = (0..eigs.k()).map(|n| format!("psi_{n}")).collect();
    let mut header = vec!["x"];
    header.extend(labels.iter().map(String::as_str));
    let x: Vec<f64> = h.grid().points().collect();
    let series: Vec<&[f64]> = (0..eigs.k()).map(|n| eigs.state_values(n)).collect();
    let states = Table::from_columns("states", &header, &x, &series);
    Ok(Artifact::new(
        "spectrum",
        "E_0",
        eigs.energies()[0],
        summary,
        vec![energies, states],
        start,
    ))
}

fn evolve(inv: &CliInvocation, base: &Path) -> Result<Artifact, CliError> {
    let start = Instant::now();
    let h = hamiltonian(inv, base)?;
    let psi = initial_state(inv, &h)?;
    let cfg = inv.config.dynamics.propagator()?;
    let grid = *h.grid();
    let x: Vec<f64> = grid.points().collect();
    let dx = grid.dx();

    let mut trajectory = Table::new("trajectory", &["t", "norm", "energy", "mean_x"]);
    let mut failure = None;
    let mut steps_seen = 0usize;
    let stride = inv.config.dynamics.snapshot_stride;
    let final_state = propagate_vnl_observed(&psi, &h, &cfg, stride, |s| {
        let t = steps_seen.min(cfg.steps) as f64 * cfg.dt;
        steps_seen += stride;
        let d = position_density(s);
        let mean_x: f64 = d.iter().zip(&x).map(|(di, xi)| di * xi).sum::<f64>() * dx;
        match energy_expectation(s, &h) {
            Ok(e) => trajectory.push(vec![t.into(), s.norm_sq().into(), e.into(), mean_x.into()]),
            Err(err) => {
                failure.get_or_insert(err);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    let norm0 = psi.norm_sq();
    let norm1 = final_state.norm_sq();
    let e0 = energy_expectation(&psi, &h)?;
    let e1 = energy_expectation(&final_state, &h)?;
    let summary = json!({
        "command": "evolve",
        "config": config_echo(inv),
        "final_time": cfg.duration(),
        "steps": cfg.steps,
        "norm_initial": norm0,
        "norm_final": norm1,
        "norm_drift": norm1 - norm0,
        "energy_initial": e0,
        "energy_final": e1,
    });
    let density = Table::from_columns("density", &["x", "density"], &x, &[&position_density(&final_state)]);
    Ok(Artifact::new(
        "evolve",
        "norm_drift",
        norm1 - norm0,
        summary,
        vec![trajectory, density],
        start,
    ))
}

fn schmidt_cmd(inv: &CliInvocation, base: &Path) -> Result<Artifact, CliError> {
    let start = Instant::now();
    let h = hamiltonian(inv, base)?;
    let psi = initial_state(inv, &h)?;
    let s = schmidt(&psi, inv.config.spectra.schmidt_tolerance)?;
    let record = s.record();
    let mut coeffs = Table::new("coefficients", &["n", "mu", "weight"]);
    for (n, mu) in s.coefficients().iter().enumerate() {
        coeffs.push(vec![n.into(), (*mu).into(), (mu * mu).into()]);
    }
    let shown = s.rank().min(4);
    let mut header = vec!["x".to_string()];
    for n in 0..shown {
        header.push(format!("left_{n}"));
        header.push(format!("right_{n}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut modes = Table::new("modes", &header_refs);
    for (i, x) in h.grid().points().enumerate() {
        let mut row = vec![Cell::Real(x)];
        for n in 0..shown {
            row.push(s.left_states()[n].amplitudes()[i].norm_sqr().into());
            row.push(s.right_states()[n].amplitudes()[i].norm_sqr().into());
        }
        modes.push(row);
    }
    let summary = json!({
        "command": "schmidt",
        "config": config_echo(inv),
        "schmidt": record,
    });
    Ok(Artifact::new("schmidt", "rank", s.rank() as f64, summary, vec![coeffs, modes], start))
}

fn entropy_cmd(inv: &CliInvocation, base: &Path) -> Result<Artifact, CliError> {
    let start = Instant::now();
    let h = hamiltonian(inv, base)?;
    let psi = initial_state(inv, &h)?;
    let svd = entanglement_entropy(&psi)?;
    let reduced = entropy_from_reduced(&psi)?;
    let summary = json!({
        "command": "entropy",
        "config": config_echo(inv),
        "entropy": svd,
        "entropy_reduced": reduced,
        "route_difference": (svd - reduced).abs(),
    });
    Ok(Artifact::new("entropy", "entropy", svd, summary, Vec::new(), start))
}

fn collapse_cmd(inv: &CliInvocation, base: &Path) -> Result<Artifact, CliError> {
    let start = Instant::now();
    let h = hamiltonian(inv, base)?;
    let psi = initial_state(inv, &h)?;
    let eigs = eigensystem(&h, inv.config.spectra.k)?;
    let amps = transition_amplitudes(&psi, &eigs)?;
    let stats = collapse_statistics(&amps);
    let total = stats.total_probability();
    let mut table = Table::new("collapse", &["m", "energy", "p", "delta_e", "conditional_delta_e"]);
    for m in 0..eigs.k() {
        table.push(vec![
            m.into(),
            eigs.energies()[m].into(),
            stats.p[m].into(),
            stats.delta_e[m].into(),
            stats.conditional_delta_e[m].map_or(Cell::Text(String::new()), Cell::Real),
        ]);
    }
    let summary = json!({
        "command": "collapse",
        "config": config_echo(inv),
        "energies": eigs.energies(),
        "statistics": stats,
        "total_probability": total,
        "probability_balance": total + stats.truncation_residual - 1.0,
    });
    Ok(Artifact::new("collapse", "total_probability", total, summary, vec![table], start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let e = parse_invocation(["frobnicate"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn missing_config_is_usage_error() {
        let e = parse_invocation(["run", "--config", "/definitely/not/here.json"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
        let e = parse_invocation(["run"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn defaults_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_config(
            dir.path(),
            "harmonic.json",
            r#"{"schema_version": 1, "potential": {"kind": "harmonic", "omega": 1}, "spectra": {"k": 4}}"#,
        );
        let path = p.to_str().unwrap();
        let inv = parse_invocation(["gaps", "--config", path, "--set", "spectra.k=6"]).unwrap();
        assert_eq!(inv.subcommand, SubcommandKind::Gaps);
        assert_eq!(inv.config.spectra.k, 6);
        assert_eq!(inv.format, TableFormat::Csv);
        assert!(inv.timestamp);

        let inv = parse_invocation(["run", "--config", path, "--seed", "9", "--format", "gnuplot", "--no-timestamp"])
            .unwrap();
        assert_eq!(inv.config.seed, 9);
        assert_eq!(inv.format, TableFormat::Gnuplot);
        assert!(!inv.timestamp);
    }

    #[test]
    fn schema_violation_names_key() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_config(dir.path(), "c.json", r#"{"schema_version": 1}"#);
        let e = parse_invocation(["evolve", "--config", p.to_str().unwrap(), "--set", "dynamics.dt=0"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_SCHEMA);
        assert!(e.to_string().contains("dynamics.dt"), "{e}");
        let e = parse_invocation(["run", "--config", p.to_str().unwrap(), "--scenario", "nope"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_SCHEMA);
        let e = parse_invocation(["run", "--config", p.to_str().unwrap(), "--set", "oops"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn help_is_not_an_error() {
        let e = parse_invocation(["--help"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_OK);
    }

    #[test]
    fn states_build_normalized() {
        let grid = crate::lattice::build_grid(-6.0, 6.0, 61).unwrap();
        let u = crate::lattice::sample_potential(&grid, &crate::PotentialSpec::Harmonic { omega: 1.0 }).unwrap();
        let h = crate::lattice::build_hamiltonian(&grid, &u, 1.0, 1.0).unwrap();
        let specs = [
            StateSpec::default(),
            StateSpec::Eigenpair { n: 2, m: 0 },
            StateSpec::Superposition {
                amplitudes: vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)],
            },
            StateSpec::Amplitudes {
                c: vec![vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)], vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]],
            },
            StateSpec::TwoSlit {
                sigma: 0.5,
                separation: 4.0,
                coefficients: TwoSlitCoefficients::particle().as_array(),
            },
            StateSpec::Random,
        ];
        for s in &specs {
            let psi = build_state(s, &h, 3).unwrap();
            assert!((psi.norm_sq() - 1.0).abs() < 1e-12, "{s:?}");
        }
    }
}
