use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vnlw(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vnlw"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env_remove("VNLW_OUTPUT_DIR")
        .output()
        .expect("spawn vnlw")
}

fn example(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"{
  "schema_version": 1,
  "grid": {"x_min": -6, "x_max": 6, "n_points": 61},
  "potential": {"kind": "harmonic", "omega": 1},
  "dynamics": {"dt": 0.01, "steps": 50, "snapshot_stride": 10,
               "initial": {"kind": "superposition", "amplitudes": [[0.6, 0], [0, 0.8]]}},
  "spectra": {"k": 4}
}"#;

#[test]
fn gaps_writes_csv_with_header() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vnlw(&["gaps", "-c", &example("harmonic-gaps.json"), "--no-timestamp"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("gaps: distinct_gaps="));
    let csv = fs::read_to_string(tmp.path().join("gaps/gaps.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("n,m,lambda"));
    assert_eq!(csv.lines().count(), 1 + 36);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("gaps/summary.json")).unwrap()).unwrap();
    assert!(summary["metrics"]["oracle_max_deviation"].as_f64().unwrap() < 1e-8);
    assert!(tmp.path().join("gaps/timing.json").exists());
}

#[test]
fn seeded_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = example("collapse.json");
    for dir in [a.path(), b.path()] {
        let o = vnlw(&["run", "-c", &cfg, "--seed", "42", "--no-timestamp"], dir);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for name in ["collapse-0", "collapse-1"] {
        let x = fs::read(a.path().join(name).join("summary.json")).unwrap();
        let y = fs::read(b.path().join(name).join("summary.json")).unwrap();
        assert_eq!(x, y, "{name}");
        let x = fs::read(a.path().join(name).join("collapse.csv")).unwrap();
        let y = fs::read(b.path().join(name).join("collapse.csv")).unwrap();
        assert_eq!(x, y);
    }
    let s = fs::read_to_string(a.path().join("collapse-0/summary.json")).unwrap();
    assert!(s.contains("\"seed\": 42") || s.contains("\"seed\":42"), "{s}");
}

#[test]
fn different_seeds_differ() {
    let a = tempfile::tempdir().unwrap();
    let cfg = example("collapse.json");
    for seed in ["1", "2"] {
        let o = vnlw(
            &["run", "-c", &cfg, "--scenario", "collapse", "--seed", seed, "--no-timestamp"],
            &a.path().join(seed),
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let x = fs::read(a.path().join("1/collapse-1/collapse.csv")).unwrap();
    let y = fs::read(a.path().join("2/collapse-1/collapse.csv")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn validate_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = vnlw(&["validate-config", "-c", &example("two-slit.json")], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("valid: "));
    assert!(!out.exists());
    let o = vnlw(&["validate-config", "-c", &example("tabulated.json")], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn every_example_config_validates() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let o = vnlw(&["validate-config", "-c", path.to_str().unwrap()], tmp.path());
            assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), stderr(&o));
        }
    }
}

#[test]
fn schema_errors_exit_3_and_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "bad.json", r#"{"schema_version": 1, "dynamics": {"dt": 0}}"#);
    let o = vnlw(&["evolve", "-c", p.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("dynamics.dt"), "{}", stderr(&o));

    let p = write(tmp.path(), "neg.json", r#"{"schema_version": 1, "dynamics": {"dt": -0.001}}"#);
    let o = vnlw(&["evolve", "-c", p.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(3));

    let p = write(tmp.path(), "unknown.json", r#"{"schema_version": 1, "grid": {"points": 9}}"#);
    let o = vnlw(&["validate-config", "-c", p.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("points"));

    let p = write(tmp.path(), "syntax.json", "{ not json");
    let o = vnlw(&["validate-config", "-c", p.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(3));

    let o = vnlw(&["run", "-c", &example("all.json"), "--scenario", "four-slit"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(vnlw(&["frobnicate"], tmp.path()).status.code(), Some(2));
    assert_eq!(vnlw(&["gaps"], tmp.path()).status.code(), Some(2));
    let missing = tmp.path().join("absent.json");
    let o = vnlw(&["gaps", "-c", missing.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = vnlw(&["gaps", "-c", &example("harmonic-gaps.json"), "--set", "nokey"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_vnlw")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("validate-config"));
}

#[test]
fn overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vnlw(
        &[
            "spectrum",
            "-c",
            &example("harmonic-gaps.json"),
            "--set",
            "spectra.k=3",
            "--set",
            "grid.n_points=101",
            "--no-timestamp",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("spectrum/energies.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
    let states = fs::read_to_string(tmp.path().join("spectrum/states.csv")).unwrap();
    assert_eq!(states.lines().count(), 1 + 101);
    let o = vnlw(
        &["gaps", "-c", &example("harmonic-gaps.json"), "--set", "spectra.k=0"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("spectra.k"));
}

#[test]
fn analysis_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.json", SMALL);
    let cfg = cfg.to_str().unwrap();
    let out = tmp.path().join("out");
    for cmd in ["evolve", "schmidt", "entropy", "collapse"] {
        let o = vnlw(&[cmd, "-c", cfg, "--no-timestamp"], &out);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        assert!(stdout(&o).starts_with(&format!("{cmd}: ")), "{}", stdout(&o));
        assert!(out.join(cmd).join("summary.json").exists());
    }
    let read = |cmd: &str| -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(out.join(cmd).join("summary.json")).unwrap()).unwrap()
    };
    assert!(read("evolve")["norm_drift"].as_f64().unwrap().abs() < 1e-10);
    assert!(read("entropy")["entropy"].as_f64().unwrap().abs() < 1e-10);
    assert_eq!(read("schmidt")["schmidt"]["rank"], 1);
    let p = read("collapse")["statistics"]["p"].clone();
    assert!((p[0].as_f64().unwrap() - 0.36).abs() < 1e-9);
    assert!((p[1].as_f64().unwrap() - 0.64).abs() < 1e-9);
    let trajectory = fs::read_to_string(out.join("evolve/trajectory.csv")).unwrap();
    assert_eq!(trajectory.lines().next(), Some("t,norm,energy,mean_x"));
    assert_eq!(trajectory.lines().count(), 1 + 6);

    let o = vnlw(&["schmidt", "-c", cfg, "--no-timestamp", "--format", "gnuplot"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dat = fs::read_to_string(out.join("schmidt/coefficients.dat")).unwrap();
    assert!(dat.starts_with('#'));
    let o = vnlw(&["schmidt", "-c", cfg, "--format", "tsv"], &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn batch_run_writes_one_directory_per_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vnlw(&["run", "-c", &example("all.json"), "--no-timestamp"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
    for name in ["product-equivalence", "collapse", "gap-spectroscopy"] {
        assert!(tmp.path().join(name).join("summary.json").exists(), "{name}");
    }
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(tmp.path().join("product-equivalence/summary.json")).unwrap(),
    )
    .unwrap();
    assert!(summary["key_metric"]["value"].as_f64().unwrap() < 1e-8);
    let leftovers: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with('.'))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn timestamped_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vnlw(&["gaps", "-c", &example("harmonic-gaps.json")], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let names: Vec<String> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 1);
    assert!(names[0].starts_with("gaps-") && names[0].len() > "gaps-".len());
}
