//! JSON run configuration.
//!
//! A document carries `schema_version` (currently 1) and the groups `grid`,
//! `potential`, `units`, `dynamics`, `spectra` and `scenario`, plus an
//! optional top-level `seed`. Every group has defaults; unknown keys are
//! rejected. The full reference lives in `docs/config-schema.md`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::dynamics::{Method, PropagatorConfig, DEFAULT_DT};
use crate::lattice::{build_grid, tabulated_from_csv, Grid1D, PotentialSpec, MIN_POINTS};
use crate::scenarios::{ScenarioConfig, ScenarioSpec, TwoSlitCoefficients};
use crate::spectra::{DEFAULT_MAX_OPERATOR_DIM, GAP_DEDUP_TOLERANCE};
use crate::C64;

pub const SCHEMA_VERSION: u32 = 1;

/// A schema violation, tagged with the dotted key it concerns.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

type CfgResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_min: -20.0,
            x_max: 20.0,
            n_points: 801,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> crate::Result<Grid1D> {
        build_grid(self.x_min, self.x_max, self.n_points)
    }
}

/// `potential`: an inline [`PotentialSpec`] or a CSV table on disk
/// (`{"kind": "tabulated-csv", "path": ...}`, relative to the config file).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PotentialConfig {
    Inline(PotentialSpec),
    Csv(CsvPotential),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvPotential {
    pub kind: CsvKind,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsvKind {
    TabulatedCsv,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig::Inline(PotentialSpec::InfiniteBox)
    }
}

impl<'de> Deserialize<'de> for PotentialConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let v = Value::deserialize(d)?;
        if v.get("kind").and_then(Value::as_str) == Some("tabulated-csv") {
            CsvPotential::deserialize(v).map(PotentialConfig::Csv).map_err(D::Error::custom)
        } else {
            PotentialSpec::deserialize(v).map(PotentialConfig::Inline).map_err(D::Error::custom)
        }
    }
}

impl PotentialConfig {
    /// Resolves CSV tables against `base_dir` and interpolates them onto `grid`.
    pub fn resolve(&self, grid: &Grid1D, base_dir: &Path) -> CfgResult<PotentialSpec> {
        match self {
            PotentialConfig::Inline(spec) => Ok(spec.clone()),
            PotentialConfig::Csv(csv) => {
                let path = base_dir.join(&csv.path);
                let file = std::fs::File::open(&path)
                    .map_err(|e| ConfigError::new("potential.path", format!("{}: {e}", path.display())))?;
                tabulated_from_csv(grid, file).map_err(|e| ConfigError::new("potential.path", e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnitsConfig {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for UnitsConfig {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

/// Initial two-copy state for `evolve`, `schmidt`, `entropy` and `collapse`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    /// `ψψ*` for a Gaussian packet `ψ`
    Gaussian {
        #[serde(default)]
        center: f64,
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default)]
        momentum: f64,
    },
    /// `ψ_n(x) ψ_m*(y)`
    Eigenpair { n: usize, m: usize },
    /// `ψψ*` with `ψ = Σ a_n ψ_n`
    Superposition { amplitudes: Vec<C64> },
    /// `Σ c_nm ψ_n(x) ψ_m*(y)`
    Amplitudes { c: Vec<Vec<C64>> },
    /// `Σ a_kl ψ_k(x) ψ_l*(y)` over two Gaussian slit modes
    TwoSlit {
        #[serde(default = "half")]
        sigma: f64,
        #[serde(default = "four")]
        separation: f64,
        coefficients: [C64; 4],
    },
    /// Seeded kernel drawn uniformly on the unit sphere
    Random,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn four() -> f64 {
    4.0
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Gaussian {
            center: 0.0,
            sigma: 1.0,
            momentum: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    pub dt: f64,
    pub steps: usize,
    pub method: Method,
    /// eigenbasis size when `method` is `eigenbasis`; all states if absent
    pub basis_size: Option<usize>,
    /// trajectory row every this many steps
    pub snapshot_stride: usize,
    pub initial: StateSpec,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            steps: 1000,
            method: Method::CrankNicolson,
            basis_size: None,
            snapshot_stride: 100,
            initial: StateSpec::default(),
        }
    }
}

impl DynamicsConfig {
    pub fn propagator(&self) -> crate::Result<PropagatorConfig> {
        let cfg = PropagatorConfig::new(self.dt, self.steps, self.method)?;
        Ok(match self.basis_size {
            Some(k) => cfg.with_basis_size(k),
            None => cfg,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectraConfig {
    pub k: usize,
    pub gap_tolerance: f64,
    /// largest difference-operator dimension diagonalized densely
    pub max_dim: usize,
    pub schmidt_tolerance: f64,
}

impl Default for SpectraConfig {
    fn default() -> Self {
        Self {
            k: 6,
            gap_tolerance: GAP_DEDUP_TOLERANCE,
            max_dim: DEFAULT_MAX_OPERATOR_DIM,
            schmidt_tolerance: crate::bipartite::SCHMIDT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ScenarioList {
    One(ScenarioSpec),
    Many(Vec<ScenarioSpec>),
}

impl ScenarioList {
    pub fn as_slice(&self) -> &[ScenarioSpec] {
        match self {
            ScenarioList::One(s) => std::slice::from_ref(s),
            ScenarioList::Many(v) => v,
        }
    }
}

/// A parsed configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub units: UnitsConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub spectra: SpectraConfig,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "scenario_field")]
    pub scenario: Option<ScenarioList>,
    #[serde(default)]
    pub seed: u64,
}

// untagged enums swallow the inner error; report the variant-level message
mod scenario_field {
    use super::*;

    pub fn serialize<S: serde::Serializer>(v: &Option<ScenarioList>, s: S) -> Result<S::Ok, S::Error> {
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<ScenarioList>, D::Error> {
        use serde::de::Error;
        let v = Value::deserialize(d)?;
        match v {
            Value::Null => Ok(None),
            Value::Array(items) => items
                .into_iter()
                .enumerate()
                .map(|(i, item)| {
                    serde_path_to_error::deserialize::<_, ScenarioSpec>(item)
                        .map_err(|e| D::Error::custom(format!("[{i}].{}: {}", e.path(), e.inner())))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(|v| Some(ScenarioList::Many(v))),
            other => serde_path_to_error::deserialize::<_, ScenarioSpec>(other)
                .map(|s| Some(ScenarioList::One(s)))
                .map_err(|e| D::Error::custom(format!("{}: {}", e.path(), e.inner()))),
        }
    }
}

impl Config {
    /// Parses a document, applies `key=value` overrides, and validates.
    pub fn from_json_str(text: &str, overrides: &[String]) -> CfgResult<Self> {
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| ConfigError::new("", format!("invalid JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Config = serde_path_to_error::deserialize(doc).map_err(|e| {
            let key = e.path().to_string();
            let key = if key == "." { String::new() } else { key };
            ConfigError::new(key, e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> CfgResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text, overrides)
    }

    /// Semantic checks that serde cannot express.
    pub fn validate(&self) -> CfgResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let g = &self.grid;
        if !(g.x_min.is_finite() && g.x_max.is_finite()) || g.x_max <= g.x_min {
            return Err(ConfigError::new("grid.x_max", format!("must exceed grid.x_min ({} ≤ {})", g.x_max, g.x_min)));
        }
        if g.n_points < MIN_POINTS {
            return Err(ConfigError::new("grid.n_points", format!("must be ≥ {MIN_POINTS}, got {}", g.n_points)));
        }
        if let PotentialConfig::Inline(spec) = &self.potential {
            spec.validate().map_err(|e| ConfigError::new("potential", e.to_string()))?;
            if let PotentialSpec::Tabulated { values } = spec {
                if values.len() != g.n_points {
                    return Err(ConfigError::new(
                        "potential.values",
                        format!("expected {} values, got {}", g.n_points, values.len()),
                    ));
                }
            }
        }
        positive("units.hbar", self.units.hbar)?;
        positive("units.mass", self.units.mass)?;

        let d = &self.dynamics;
        positive("dynamics.dt", d.dt)?;
        if d.snapshot_stride == 0 {
            return Err(ConfigError::new("dynamics.snapshot_stride", "must be ≥ 1"));
        }
        if d.basis_size == Some(0) {
            return Err(ConfigError::new("dynamics.basis_size", "must be ≥ 1"));
        }
        validate_state(&d.initial, "dynamics.initial")?;

        let s = &self.spectra;
        let dim = g.n_points - 2;
        if s.k == 0 || s.k > dim {
            return Err(ConfigError::new("spectra.k", format!("must lie in 1..={dim}, got {}", s.k)));
        }
        nonnegative("spectra.gap_tolerance", s.gap_tolerance)?;
        nonnegative("spectra.schmidt_tolerance", s.schmidt_tolerance)?;

        if let Some(list) = &self.scenario {
            let many = matches!(list, ScenarioList::Many(_));
            for (i, sc) in list.as_slice().iter().enumerate() {
                let prefix = if many {
                    format!("scenario[{i}]")
                } else {
                    "scenario".to_string()
                };
                sc.validate().map_err(|(k, m)| ConfigError::new(format!("{prefix}.{k}"), m))?;
            }
        }
        Ok(())
    }

    /// Fully resolved per-scenario configurations, in document order.
    pub fn scenario_configs(&self, base_dir: &Path) -> CfgResult<Vec<ScenarioConfig>> {
        let list = self
            .scenario
            .as_ref()
            .ok_or_else(|| ConfigError::new("scenario", "no scenario configured"))?;
        list.as_slice()
            .iter()
            .map(|s| self.scenario_config(s.clone(), base_dir))
            .collect()
    }

    pub fn scenario_config(&self, scenario: ScenarioSpec, base_dir: &Path) -> CfgResult<ScenarioConfig> {
        let grid = self.grid.build().map_err(|e| ConfigError::new("grid", e.to_string()))?;
        Ok(ScenarioConfig {
            grid: self.grid.clone(),
            potential: self.potential.resolve(&grid, base_dir)?,
            units: self.units,
            dynamics: self.dynamics.clone(),
            spectra: self.spectra,
            scenario,
            seed: self.seed,
        })
    }
}

fn positive(key: &str, v: f64) -> CfgResult<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(ConfigError::new(key, format!("must be > 0, got {v}")));
    }
    Ok(())
}

fn nonnegative(key: &str, v: f64) -> CfgResult<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(ConfigError::new(key, format!("must be ≥ 0, got {v}")));
    }
    Ok(())
}

fn validate_state(s: &StateSpec, key: &str) -> CfgResult<()> {
    match s {
        StateSpec::Gaussian { sigma, .. } => positive(&format!("{key}.sigma"), *sigma),
        StateSpec::Superposition { amplitudes } => {
            if amplitudes.is_empty() {
                return Err(ConfigError::new(format!("{key}.amplitudes"), "must not be empty"));
            }
            Ok(())
        }
        StateSpec::Amplitudes { c } => {
            let k = c.len();
            if k == 0 || c.iter().any(|row| row.len() != k) {
                return Err(ConfigError::new(format!("{key}.c"), "must be a non-empty square matrix"));
            }
            Ok(())
        }
        StateSpec::TwoSlit {
            sigma,
            separation,
            coefficients,
        } => {
            positive(&format!("{key}.sigma"), *sigma)?;
            positive(&format!("{key}.separation"), *separation)?;
            TwoSlitCoefficients::from_array(*coefficients)
                .map(|_| ())
                .map_err(|e| ConfigError::new(format!("{key}.coefficients"), e.to_string()))
        }
        StateSpec::Eigenpair { .. } | StateSpec::Random => Ok(()),
    }
}

/// Applies `a.b.c=value` to a JSON document. `value` is parsed as JSON when
/// possible and taken as a string otherwise; numeric segments index arrays.
pub fn apply_override(doc: &mut Value, spec: &str) -> CfgResult<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::new("", format!("override `{spec}` is not of the form key=value")))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(ConfigError::new(path, "malformed override key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let segments: Vec<&str> = path.split('.').collect();
    for (depth, seg) in segments.iter().enumerate() {
        let last = depth + 1 == segments.len();
        let here = segments[..=depth].join(".");
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| ConfigError::new(&here, "expected an array index"))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| ConfigError::new(&here, format!("index out of range (length {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(ConfigError::new(&here, "cannot descend into a scalar")),
        };
    }
    unreachable!("loop returns on the last segment")
}
