//! Packaged experiments: two-slit duality, collapse statistics, gap
//! spectroscopy and product-state equivalence.
//!
//! Each run is sequential and deterministic given its [`ScenarioConfig`]
//! (including the seed).

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::ops::Range;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::bipartite::{
    collapse_statistics, entanglement_entropy, expand_kernel, from_product, position_density,
    transition_amplitudes,
};
use crate::config::{DynamicsConfig, GridConfig, SpectraConfig, UnitsConfig};
use crate::dynamics::{propagate_schrodinger, propagate_vnl, PropagatorConfig};
use crate::error::{Result, VnlwError};
use crate::lattice::{build_hamiltonian, sample_potential, Grid1D, HamiltonianMatrix, PotentialSpec};
use crate::output::{Cell, Table};
use crate::spectra::{difference_operator_spectrum, eigensystem, gap_spectrum};
use crate::state::{BipartiteWave, WaveFunction};
use crate::{CMat, C64};

/// Largest `|⟨ψ_1, ψ_2⟩|` accepted for slit modes.
pub const MODE_OVERLAP_TOLERANCE: f64 = 1e-6;

/// Slack allowed when checking monotonicity along the complementarity sweep.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// `a_11, a_12, a_21, a_22` of `Σ a_kl ψ_k(x) ψ_l*(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSlitCoefficients {
    pub a11: C64,
    pub a12: C64,
    pub a21: C64,
    pub a22: C64,
}

impl TwoSlitCoefficients {
    pub fn new(a11: C64, a12: C64, a21: C64, a22: C64) -> Result<Self> {
        let c = Self { a11, a12, a21, a22 };
        let sum: f64 = c.as_array().iter().map(|a| a.norm_sqr()).sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(VnlwError::NonNormalizedCoefficients { sum });
        }
        Ok(c)
    }

    pub fn from_array(a: [C64; 4]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// All four amplitudes `½`: the product `½(ψ_1 + ψ_2)(ψ_1 + ψ_2)*`.
    pub fn wave() -> Self {
        let h = C64::new(0.5, 0.0);
        Self {
            a11: h,
            a12: h,
            a21: h,
            a22: h,
        }
    }

    /// `(ψ_1ψ_1* + ψ_2ψ_2*)/√2`
    pub fn particle() -> Self {
        let r = C64::new(FRAC_1_SQRT_2, 0.0);
        let z = C64::new(0.0, 0.0);
        Self {
            a11: r,
            a12: z,
            a21: z,
            a22: r,
        }
    }

    pub fn as_array(&self) -> [C64; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }
}

/// Two normalized, mutually orthogonal slit modes.
#[derive(Debug, Clone)]
pub struct SlitModes {
    psi1: WaveFunction,
    psi2: WaveFunction,
}

impl SlitModes {
    pub fn new(psi1: WaveFunction, psi2: WaveFunction) -> Result<Self> {
        for psi in [&psi1, &psi2] {
            let n = psi.norm_sq();
            if (n - 1.0).abs() > 1e-9 {
                return Err(VnlwError::UnnormalizedState { norm_sq: n });
            }
        }
        let overlap = psi1.inner(&psi2)?.norm();
        if overlap >= MODE_OVERLAP_TOLERANCE {
            return Err(VnlwError::NonOrthogonalModes { overlap });
        }
        Ok(Self { psi1, psi2 })
    }

    /// Gaussians `exp(−(x ∓ s/2)²/(2σ²))`, symmetrically orthonormalized
    /// (Löwdin) so that residual tail overlap is removed exactly.
    pub fn gaussian(grid: &Grid1D, sigma: f64, separation: f64) -> Result<Self> {
        let (g1, g2) = raw_slit_gaussians(grid, sigma, separation)?;
        let s = g1.inner(&g2)?;
        let r = s.norm();
        if r >= 0.5 {
            return Err(VnlwError::NonOrthogonalModes { overlap: r });
        }
        // S^{-1/2} for S = [[1, s], [s*, 1]]
        let plus = 1.0 / (1.0 + r).sqrt();
        let minus = 1.0 / (1.0 - r).sqrt();
        let alpha = 0.5 * (plus + minus);
        let beta = 0.5 * (plus - minus);
        let phase = if r > 0.0 { s / r } else { C64::new(1.0, 0.0) };
        let mix = |a: &WaveFunction, b: &WaveFunction, cb: C64| {
            let amps = a
                .amplitudes()
                .iter()
                .zip(b.amplitudes())
                .map(|(x, y)| x * alpha + y * cb)
                .collect();
            WaveFunction::new(grid, amps)
        };
        let psi1 = mix(&g1, &g2, beta * phase.conj())?;
        let psi2 = mix(&g2, &g1, beta * phase)?;
        Self::new(psi1, psi2)
    }

    pub fn psi1(&self) -> &WaveFunction {
        &self.psi1
    }

    pub fn psi2(&self) -> &WaveFunction {
        &self.psi2
    }

    pub fn overlap(&self) -> f64 {
        self.psi1.inner(&self.psi2).map(|z| z.norm()).unwrap_or(f64::NAN)
    }

    /// Both modes evolved under the same one-copy propagation.
    pub fn evolved(&self, h: &HamiltonianMatrix, cfg: &PropagatorConfig) -> Result<Self> {
        Self::new(propagate_schrodinger(&self.psi1, h, cfg)?, propagate_schrodinger(&self.psi2, h, cfg)?)
    }
}

/// The two normalized slit Gaussians before orthonormalization.
pub fn raw_slit_gaussians(grid: &Grid1D, sigma: f64, separation: f64) -> Result<(WaveFunction, WaveFunction)> {
    if !(separation.is_finite() && separation > 0.0) {
        return Err(VnlwError::InvalidParameters(format!(
            "slit separation must be > 0, got {separation}"
        )));
    }
    Ok((
        WaveFunction::gaussian(grid, -0.5 * separation, sigma, 0.0)?,
        WaveFunction::gaussian(grid, 0.5 * separation, sigma, 0.0)?,
    ))
}

/// `Σ a_kl ψ_k(x) ψ_l*(y)`, normalized.
pub fn two_slit_state(modes: &SlitModes, coeffs: &TwoSlitCoefficients) -> Result<BipartiteWave> {
    let overlap = modes.overlap();
    if !(overlap < MODE_OVERLAP_TOLERANCE) {
        return Err(VnlwError::NonOrthogonalModes { overlap });
    }
    TwoSlitCoefficients::from_array(coeffs.as_array())?;
    let p = [modes.psi1.amplitudes(), modes.psi2.amplitudes()];
    let a = [[coeffs.a11, coeffs.a12], [coeffs.a21, coeffs.a22]];
    let n = p[0].len();
    let kernel = CMat::from_fn(n, n, |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..2 {
            for l in 0..2 {
                acc += a[k][l] * p[k][i] * p[l][j].conj();
            }
        }
        acc
    });
    Ok(BipartiteWave::new(modes.psi1.grid(), kernel)?
        .normalized()?
        .with_time(modes.psi1.time()))
}

/// `(cos θ Ψ_W + sin θ Ψ_P)`, renormalized.
pub fn interpolated_state(wave: &BipartiteWave, particle: &BipartiteWave, theta: f64) -> Result<BipartiteWave> {
    let (s, c) = if theta == FRAC_PI_2 { (1.0, 0.0) } else { theta.sin_cos() };
    wave.clone()
        .scaled(C64::new(c, 0.0))
        .add_scaled(particle, C64::new(s, 0.0))?
        .normalized()
}

/// `V = (d_max − d_min)/(d_max + d_min)`, where `d_max` is the largest strict
/// local maximum and `d_min` the smallest strict local minimum among interior
/// points of `window`. Without both kinds of extremum there are no fringes
/// and `V = 0`.
pub fn fringe_visibility(density: &[f64], window: Range<usize>) -> Result<f64> {
    if window.start >= window.end {
        return Err(VnlwError::EmptyWindow);
    }
    if window.end > density.len() {
        return Err(VnlwError::InvalidParameters(format!(
            "window {}..{} exceeds density length {}",
            window.start,
            window.end,
            density.len()
        )));
    }
    let d = &density[window];
    let mut d_max: Option<f64> = None;
    let mut d_min: Option<f64> = None;
    for i in 1..d.len().saturating_sub(1) {
        let (l, c, r) = (d[i - 1], d[i], d[i + 1]);
        if c > l && c > r {
            d_max = Some(d_max.map_or(c, |m| m.max(c)));
        } else if c < l && c < r {
            d_min = Some(d_min.map_or(c, |m| m.min(c)));
        }
    }
    match (d_max, d_min) {
        (Some(hi), Some(lo)) if hi + lo > 0.0 => Ok(((hi - lo) / (hi + lo)).clamp(0.0, 1.0)),
        _ => Ok(0.0),
    }
}

/// Vector of `len` complex entries drawn uniformly on the unit sphere.
pub fn random_unit_vector<R: rand::Rng>(len: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..len)
            .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// Normalized state with independent random interior amplitudes.
pub fn random_wave<R: rand::Rng>(grid: &Grid1D, rng: &mut R) -> WaveFunction {
    let mut amps = vec![C64::new(0.0, 0.0); grid.n_points()];
    let inner = random_unit_vector(grid.dim(), rng);
    amps[1..grid.n_points() - 1].copy_from_slice(&inner);
    WaveFunction::new(grid, amps)
        .and_then(WaveFunction::normalized)
        .expect("nonzero random vector")
}

/// Normalized kernel with independent random interior entries.
pub fn random_kernel<R: rand::Rng>(grid: &Grid1D, rng: &mut R) -> BipartiteWave {
    let n = grid.n_points();
    let dim = grid.dim();
    let v = random_unit_vector(dim * dim, rng);
    let kernel = CMat::from_fn(n, n, |i, j| {
        if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
            C64::new(0.0, 0.0)
        } else {
            v[(j - 1) * dim + (i - 1)]
        }
    });
    BipartiteWave::new(grid, kernel)
        .and_then(BipartiteWave::normalized)
        .expect("nonzero random kernel")
}

/// The seeded generator used by every scenario.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoSlitParams {
    pub sigma: f64,
    pub separation: f64,
    /// free-evolution time before the densities are read
    pub time: f64,
    /// `[x_lo, x_hi]` over which visibility is measured
    pub window: [f64; 2],
    pub sweep_points: usize,
    /// optional extra state reported alongside `Ψ_W` and `Ψ_P`
    pub coefficients: Option<[C64; 4]>,
}

impl Default for TwoSlitParams {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            separation: 4.0,
            time: 2.0,
            window: [-10.0, 10.0],
            sweep_points: 11,
            coefficients: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollapseState {
    /// `ψψ*` with `ψ = Σ a_n ψ_n`
    #[default]
    Product,
    /// seeded random amplitudes over the lowest `random_levels` states
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollapseParams {
    pub state: CollapseState,
    pub amplitudes: Vec<C64>,
    /// defaults to `spectra.k + 2`, so part of the weight lies outside the basis
    pub random_levels: Option<usize>,
}

impl Default for CollapseParams {
    fn default() -> Self {
        Self {
            state: CollapseState::Product,
            amplitudes: vec![C64::new(FRAC_1_SQRT_2, 0.0); 2],
            random_levels: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapParams {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProductParams {
    pub center: f64,
    pub sigma: f64,
    pub momentum: f64,
    pub time: f64,
}

impl Default for ProductParams {
    fn default() -> Self {
        Self {
            center: 0.0,
            sigma: 1.0,
            momentum: 1.0,
            time: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ScenarioSpec {
    TwoSlit(TwoSlitParams),
    Collapse(CollapseParams),
    GapSpectroscopy(GapParams),
    ProductEquivalence(ProductParams),
}

impl ScenarioSpec {
    pub const NAMES: [&'static str; 4] = ["two-slit", "collapse", "gap-spectroscopy", "product-equivalence"];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioSpec::TwoSlit(_) => "two-slit",
            ScenarioSpec::Collapse(_) => "collapse",
            ScenarioSpec::GapSpectroscopy(_) => "gap-spectroscopy",
            ScenarioSpec::ProductEquivalence(_) => "product-equivalence",
        }
    }

    /// Default parameters for a scenario name.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "two-slit" => ScenarioSpec::TwoSlit(TwoSlitParams::default()),
            "collapse" => ScenarioSpec::Collapse(CollapseParams::default()),
            "gap-spectroscopy" => ScenarioSpec::GapSpectroscopy(GapParams::default()),
            "product-equivalence" => ScenarioSpec::ProductEquivalence(ProductParams::default()),
            other => return Err(VnlwError::UnknownScenario(other.to_string())),
        })
    }

    /// Parameter checks; errors carry the offending key (relative to the
    /// scenario object) and a message.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let err = |k: &str, m: String| Err((k.to_string(), m));
        let positive = |k: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                err(k, format!("must be > 0, got {v}"))
            }
        };
        match self {
            ScenarioSpec::TwoSlit(p) => {
                positive("sigma", p.sigma)?;
                positive("separation", p.separation)?;
                if !(p.time.is_finite() && p.time >= 0.0) {
                    return err("time", format!("must be ≥ 0, got {}", p.time));
                }
                if !(p.window[0] < p.window[1]) {
                    return err("window", format!("must be increasing, got {:?}", p.window));
                }
                if p.sweep_points < 2 {
                    return err("sweep_points", format!("must be ≥ 2, got {}", p.sweep_points));
                }
                if let Some(a) = p.coefficients {
                    if let Err(e) = TwoSlitCoefficients::from_array(a) {
                        return err("coefficients", e.to_string());
                    }
                }
                Ok(())
            }
            ScenarioSpec::Collapse(p) => {
                if p.state == CollapseState::Product {
                    if p.amplitudes.is_empty() {
                        return err("amplitudes", "must not be empty".into());
                    }
                    let sum: f64 = p.amplitudes.iter().map(|a| a.norm_sqr()).sum();
                    if (sum - 1.0).abs() > 1e-10 {
                        return err("amplitudes", format!("Σ|a_n|² must be 1, got {sum}"));
                    }
                }
                if p.random_levels == Some(0) {
                    return err("random_levels", "must be ≥ 1".into());
                }
                Ok(())
            }
            ScenarioSpec::GapSpectroscopy(_) => Ok(()),
            ScenarioSpec::ProductEquivalence(p) => {
                positive("sigma", p.sigma)?;
                if !(p.time.is_finite() && p.time >= 0.0) {
                    return err("time", format!("must be ≥ 0, got {}", p.time));
                }
                Ok(())
            }
        }
    }
}

/// Everything one scenario run depends on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    pub potential: PotentialSpec,
    pub units: UnitsConfig,
    pub dynamics: DynamicsConfig,
    pub spectra: SpectraConfig,
    pub scenario: ScenarioSpec,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Default groups with the given scenario.
    pub fn with_scenario(scenario: ScenarioSpec) -> Self {
        Self {
            grid: GridConfig::default(),
            potential: PotentialSpec::InfiniteBox,
            units: UnitsConfig::default(),
            dynamics: DynamicsConfig::default(),
            spectra: SpectraConfig::default(),
            scenario,
            seed: 0,
        }
    }

    pub fn hamiltonian(&self) -> Result<HamiltonianMatrix> {
        let grid = self.grid.build()?;
        let u = sample_potential(&grid, &self.potential)?;
        build_hamiltonian(&grid, &u, self.units.hbar, self.units.mass)
    }

    /// Step count and step size covering exactly `time`, near `dynamics.dt`.
    pub fn propagator_for(&self, time: f64) -> Result<PropagatorConfig> {
        let dt = self.dynamics.dt;
        let steps = (time / dt).round().max(if time > 0.0 { 1.0 } else { 0.0 }) as usize;
        let dt = if steps > 0 { time / steps as f64 } else { dt };
        let cfg = PropagatorConfig::new(dt, steps, self.dynamics.method)?;
        Ok(match self.dynamics.basis_size {
            Some(k) => cfg.with_basis_size(k),
            None => cfg,
        })
    }
}

/// Result of one scenario run. Serializes to the JSON summary; tables and
/// timing are carried alongside.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub config: Value,
    pub key_metric: KeyMetric,
    pub metrics: Map<String, Value>,
    pub notes: Vec<String>,
    #[serde(serialize_with = "table_names")]
    pub tables: Vec<Table>,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyMetric {
    pub name: String,
    pub value: f64,
}

fn table_names<S: serde::Serializer>(tables: &[Table], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(tables.iter().map(|t| &t.name))
}

impl ScenarioReport {
    fn new(cfg: &ScenarioConfig) -> Self {
        Self {
            scenario: cfg.scenario.name().to_string(),
            config: serde_json::to_value(cfg).expect("config serializes"),
            key_metric: KeyMetric {
                name: String::new(),
                value: f64::NAN,
            },
            metrics: Map::new(),
            notes: Vec::new(),
            tables: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    fn set(&mut self, key: &str, value: impl Serialize) {
        self.metrics
            .insert(key.to_string(), serde_json::to_value(value).expect("metric serializes"));
    }

    fn key(&mut self, key: &str, value: f64) {
        self.set(key, value);
        self.key_metric = KeyMetric {
            name: key.to_string(),
            value,
        };
    }

    /// A scalar metric, if present and numeric.
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).and_then(Value::as_f64)
    }

    pub fn metric_vec(&self, key: &str) -> Option<Vec<f64>> {
        self.metrics
            .get(key)?
            .as_array()?
            .iter()
            .map(Value::as_f64)
            .collect()
    }

    pub fn flag(&self, key: &str) -> Option<bool> {
        self.metrics.get(key).and_then(Value::as_bool)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// `name: key=value (elapsed s)`
    pub fn summary_line(&self) -> String {
        format!(
            "{}: {}={} ({:.3} s)",
            self.scenario,
            self.key_metric.name,
            crate::output::format_f64(self.key_metric.value),
            self.elapsed.as_secs_f64()
        )
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    if let Err((key, msg)) = cfg.scenario.validate() {
        return Err(VnlwError::InvalidParameters(format!("{key}: {msg}")));
    }
    let start = Instant::now();
    let mut report = ScenarioReport::new(cfg);
    match &cfg.scenario {
        ScenarioSpec::TwoSlit(p) => two_slit(cfg, p, &mut report)?,
        ScenarioSpec::Collapse(p) => collapse(cfg, p, &mut report)?,
        ScenarioSpec::GapSpectroscopy(_) => gaps(cfg, &mut report)?,
        ScenarioSpec::ProductEquivalence(p) => product_equivalence(cfg, p, &mut report)?,
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn two_slit(cfg: &ScenarioConfig, p: &TwoSlitParams, report: &mut ScenarioReport) -> Result<()> {
    let h = cfg.hamiltonian()?;
    let grid = *h.grid();
    let (g1, g2) = raw_slit_gaussians(&grid, p.sigma, p.separation)?;
    report.set("raw_mode_overlap", g1.inner(&g2)?.norm());
    let modes = SlitModes::gaussian(&grid, p.sigma, p.separation)?;
    let modes = modes.evolved(&h, &cfg.propagator_for(p.time)?)?;
    report.set("mode_overlap", modes.overlap());
    report.set("time", p.time);

    let wave = two_slit_state(&modes, &TwoSlitCoefficients::wave())?;
    let particle = two_slit_state(&modes, &TwoSlitCoefficients::particle())?;
    let d_wave = position_density(&wave);
    let d_particle = position_density(&particle);

    // closed forms ½|ψ_1 + ψ_2|² and ½(|ψ_1|² + |ψ_2|²)
    let (a, b) = (modes.psi1().amplitudes(), modes.psi2().amplitudes());
    let w_expect: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y).norm_sqr()).collect();
    let p_expect: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| 0.5 * (x.norm_sqr() + y.norm_sqr()))
        .collect();
    report.set("density_wave_max_deviation", max_abs_diff(&d_wave, &w_expect));
    report.set("density_particle_max_deviation", max_abs_diff(&d_particle, &p_expect));

    let window = grid.index_range(p.window[0], p.window[1]);
    let mut sweep = Table::new("complementarity", &["theta", "visibility", "entropy"]);
    let (mut vis, mut ent) = (Vec::new(), Vec::new());
    for i in 0..p.sweep_points {
        let theta = if i + 1 == p.sweep_points {
            FRAC_PI_2
        } else {
            FRAC_PI_2 * i as f64 / (p.sweep_points - 1) as f64
        };
        let psi = interpolated_state(&wave, &particle, theta)?;
        let v = fringe_visibility(&position_density(&psi), window.clone())?;
        let s = entanglement_entropy(&psi)?;
        sweep.push(vec![theta.into(), v.into(), s.into()]);
        vis.push(v);
        ent.push(s);
    }
    let v_nonincreasing = vis.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK);
    let s_nondecreasing = ent.windows(2).all(|w| w[1] >= w[0] - MONOTONE_SLACK);
    report.key("visibility_wave", vis[0]);
    report.set("visibility_particle", *vis.last().expect("≥ 2 sweep points"));
    report.set("entropy_wave", ent[0]);
    report.set("entropy_particle", *ent.last().expect("≥ 2 sweep points"));
    report.set("sweep_visibility", &vis);
    report.set("sweep_entropy", &ent);
    report.set("visibility_non_increasing", v_nonincreasing);
    report.set("entropy_non_decreasing", s_nondecreasing);
    report.notes.push(
        "visibility is an operational measure of wave-like behaviour; the sweep checks that it falls as entropy rises"
            .into(),
    );

    let x: Vec<f64> = grid.points().collect();
    let mut header = vec!["x", "wave", "particle"];
    let mut series: Vec<&[f64]> = vec![&d_wave, &d_particle];
    let custom;
    if let Some(a) = p.coefficients {
        let psi = two_slit_state(&modes, &TwoSlitCoefficients::from_array(a)?)?;
        custom = position_density(&psi);
        report.set("visibility_custom", fringe_visibility(&custom, window)?);
        report.set("entropy_custom", entanglement_entropy(&psi)?);
        header.push("custom");
        series.push(&custom);
    }
    report.tables.push(Table::from_columns("densities", &header, &x, &series));
    report.tables.push(sweep);
    Ok(())
}

fn collapse(cfg: &ScenarioConfig, p: &CollapseParams, report: &mut ScenarioReport) -> Result<()> {
    let h = cfg.hamiltonian()?;
    let k = cfg.spectra.k;
    let levels = match p.state {
        CollapseState::Product => p.amplitudes.len(),
        CollapseState::Random => p.random_levels.unwrap_or(k + 2),
    };
    let full = eigensystem(&h, levels.max(k).min(h.dim()))?;
    if levels > full.k() {
        return Err(VnlwError::KOutOfRange {
            k: levels,
            max: h.dim(),
        });
    }
    let span = full.truncated(levels)?;
    let coeffs: Vec<C64> = match p.state {
        CollapseState::Product => p.amplitudes.clone(),
        CollapseState::Random => random_unit_vector(levels * levels, &mut seeded_rng(cfg.seed)),
    };
    let psi = match p.state {
        CollapseState::Product => {
            let n = h.grid().n_points();
            let amps = (0..n)
                .map(|i| coeffs.iter().enumerate().map(|(m, a)| a * span.state_values(m)[i]).sum())
                .collect();
            let one = WaveFunction::new(h.grid(), amps)?;
            from_product(&one, &one)?
        }
        CollapseState::Random => {
            let c = CMat::from_fn(levels, levels, |i, j| coeffs[j * levels + i]);
            BipartiteWave::new(h.grid(), expand_kernel(&c, &span.state_matrix()))?
        }
    };
    let basis = full.truncated(k)?;
    let amps = transition_amplitudes(&psi, &basis)?;
    let stats = collapse_statistics(&amps);
    let total = stats.total_probability();

    report.key("total_probability", total);
    report.set("probability_balance", total + stats.truncation_residual - 1.0);
    report.set("energies", basis.energies());
    report.set("statistics", &stats);
    if p.state == CollapseState::Product {
        // |a_m|² and Σ_n |a_n|²|a_m|²(E_n − E_m) over the measured levels
        let e = basis.energies();
        let w: Vec<f64> = (0..k).map(|m| coeffs.get(m).map_or(0.0, |a| a.norm_sqr())).collect();
        let p_closed: Vec<f64> = (0..k).map(|m| w[m] * w.iter().sum::<f64>()).collect();
        let de_closed: Vec<f64> = (0..k)
            .map(|m| (0..k).map(|n| w[n] * w[m] * (e[n] - e[m])).sum())
            .collect();
        report.set("closed_form_p_max_deviation", max_abs_diff(&stats.p, &p_closed));
        report.set("closed_form_delta_e_max_deviation", max_abs_diff(&stats.delta_e, &de_closed));
    }
    report
        .notes
        .push("delta_e is not divided by p; conditional_delta_e = delta_e / p where p > 0".into());

    let mut table = Table::new("collapse", &["m", "energy", "p", "delta_e", "conditional_delta_e"]);
    for m in 0..k {
        table.push(vec![
            m.into(),
            basis.energies()[m].into(),
            stats.p[m].into(),
            stats.delta_e[m].into(),
            stats.conditional_delta_e[m].map_or(Cell::Text(String::new()), Cell::Real),
        ]);
    }
    let mut amp_table = Table::new("amplitudes", &["n", "m", "re", "im", "weight"]);
    for n in 0..k {
        for m in 0..k {
            let c = amps.amplitudes()[(n, m)];
            amp_table.push(vec![n.into(), m.into(), c.re.into(), c.im.into(), c.norm_sqr().into()]);
        }
    }
    report.tables.push(table);
    report.tables.push(amp_table);
    Ok(())
}

fn gaps(cfg: &ScenarioConfig, report: &mut ScenarioReport) -> Result<()> {
    let h = cfg.hamiltonian()?;
    let eigs = eigensystem(&h, cfg.spectra.k)?;
    let gaps = gap_spectrum(&eigs);
    let distinct = gaps.distinct(cfg.spectra.gap_tolerance);

    report.key("distinct_gap_count", distinct.len() as f64);
    report.set("energies", eigs.energies());
    report.set("distinct_gaps", &distinct);
    report.set("orthonormality_error", eigs.orthonormality_error());
    report.set("max_relative_residual", eigs.max_relative_residual(&h));

    let dim = h.dim();
    if dim * dim <= cfg.spectra.max_dim {
        let oracle = difference_operator_spectrum(&h, cfg.spectra.max_dim)?;
        let all = gap_spectrum(&eigensystem(&h, dim)?).sorted_values();
        report.set("oracle_max_deviation", max_abs_diff(&oracle, &all));
    } else {
        report.notes.push(format!(
            "difference-operator check skipped: dimension {} exceeds spectra.max_dim = {}",
            dim * dim,
            cfg.spectra.max_dim
        ));
    }

    let mut energies = Table::new("energies", &["n", "energy"]);
    for (n, e) in eigs.energies().iter().enumerate() {
        energies.push(vec![n.into(), (*e).into()]);
    }
    let mut all = Table::new("gaps", &["n", "m", "lambda"]);
    for g in gaps.entries() {
        all.push(vec![g.n.into(), g.m.into(), g.lambda.into()]);
    }
    let mut uniq = Table::new("distinct_gaps", &["index", "lambda"]);
    for (i, v) in distinct.iter().enumerate() {
        uniq.push(vec![i.into(), (*v).into()]);
    }
    report.tables.extend([energies, all, uniq]);
    Ok(())
}

fn product_equivalence(cfg: &ScenarioConfig, p: &ProductParams, report: &mut ScenarioReport) -> Result<()> {
    let h = cfg.hamiltonian()?;
    let grid = *h.grid();
    let prop = cfg.propagator_for(p.time)?;
    let psi = WaveFunction::gaussian(&grid, p.center, p.sigma, p.momentum)?;
    let one = propagate_schrodinger(&psi, &h, &prop)?;
    let two = propagate_vnl(&from_product(&psi, &psi)?, &h, &prop)?;
    let outer = from_product(&one, &one)?;
    let gap = two.distance(&outer)?;

    report.key("frobenius_gap", gap);
    report.set("time", prop.duration());
    report.set("steps", prop.steps);
    report.set("norm_vnl", two.norm_sq());
    report.set("norm_schrodinger", one.norm_sq());

    let x: Vec<f64> = grid.points().collect();
    let d_two = position_density(&two);
    let d_one = one.density();
    report
        .tables
        .push(Table::from_columns("density", &["x", "vnl", "schrodinger"], &x, &[&d_two, &d_one]));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite::entropy_from_reduced;
    use crate::lattice::build_grid;
    use std::f64::consts::LN_2;

    fn small_grid() -> Grid1D {
        build_grid(-10.0, 10.0, 201).unwrap()
    }

    #[test]
    fn coefficients_validate() {
        assert!(TwoSlitCoefficients::from_array([C64::new(1.0, 0.0); 4]).is_err());
        let w = TwoSlitCoefficients::wave();
        assert!(TwoSlitCoefficients::from_array(w.as_array()).is_ok());
    }

    #[test]
    fn slit_modes_are_orthonormal() {
        let g = small_grid();
        let m = SlitModes::gaussian(&g, 0.5, 4.0).unwrap();
        assert!(m.overlap() < 1e-14);
        assert!((m.psi1().norm_sq() - 1.0).abs() < 1e-12);
        assert!((m.psi2().norm_sq() - 1.0).abs() < 1e-12);
        // symmetric orthonormalization keeps the mirror symmetry
        let n = g.n_points();
        for i in 0..n {
            assert!((m.psi1().amplitudes()[i] - m.psi2().amplitudes()[n - 1 - i]).norm() < 1e-12);
        }
        assert!(matches!(
            SlitModes::new(m.psi1().clone(), m.psi1().clone()),
            Err(VnlwError::NonOrthogonalModes { .. })
        ));
        assert!(SlitModes::gaussian(&g, 3.0, 1.0).is_err());
    }

    #[test]
    fn endpoint_states() {
        let g = small_grid();
        let modes = SlitModes::gaussian(&g, 0.5, 4.0).unwrap();
        let w = two_slit_state(&modes, &TwoSlitCoefficients::wave()).unwrap();
        let p = two_slit_state(&modes, &TwoSlitCoefficients::particle()).unwrap();
        assert!(entanglement_entropy(&w).unwrap() < 1e-12);
        assert!((entanglement_entropy(&p).unwrap() - LN_2).abs() < 1e-10);
        assert!((entropy_from_reduced(&p).unwrap() - LN_2).abs() < 1e-10);

        let single = TwoSlitCoefficients::new(
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        )
        .unwrap();
        let s = two_slit_state(&modes, &single).unwrap();
        let d = position_density(&s);
        for (di, a) in d.iter().zip(modes.psi1().amplitudes()) {
            assert!((di - a.norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn visibility_edge_cases() {
        assert_eq!(fringe_visibility(&[1.0; 10], 0..10).unwrap(), 0.0);
        assert_eq!(fringe_visibility(&[1.0; 10], 3..3), Err(VnlwError::EmptyWindow));
        assert!(fringe_visibility(&[1.0; 10], 0..11).is_err());
        // cos² fringes over a flat floor
        let d: Vec<f64> = (0..200).map(|i| 1.0 + (i as f64 * 0.2).cos().powi(2)).collect();
        let v = fringe_visibility(&d, 0..200).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-3, "{v}");
        // a single bump has no interior minimum
        let bump: Vec<f64> = (0..50).map(|i| (-((i as f64 - 25.0) / 5.0).powi(2)).exp()).collect();
        assert_eq!(fringe_visibility(&bump, 0..50).unwrap(), 0.0);
    }

    #[test]
    fn random_helpers_are_seeded() {
        let g = build_grid(0.0, 1.0, 20).unwrap();
        let a = random_kernel(&g, &mut seeded_rng(7));
        let b = random_kernel(&g, &mut seeded_rng(7));
        assert_eq!(a.kernel(), b.kernel());
        assert!((a.norm_sq() - 1.0).abs() < 1e-12);
        let c = random_kernel(&g, &mut seeded_rng(8));
        assert!(a.distance(&c).unwrap() > 0.1);
        let w = random_wave(&g, &mut seeded_rng(1));
        assert!((w.norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gap_scenario_on_harmonic_ladder() {
        let mut cfg = ScenarioConfig::with_scenario(ScenarioSpec::GapSpectroscopy(GapParams {}));
        cfg.potential = PotentialSpec::Harmonic { omega: 1.0 };
        cfg.spectra.k = 4;
        cfg.spectra.gap_tolerance = 1e-3;
        let r = run_scenario(&cfg).unwrap();
        let distinct = r.metric_vec("distinct_gaps").unwrap();
        assert_eq!(distinct.len(), 7);
        for (got, want) in distinct.iter().zip(-3..=3) {
            assert!((got - want as f64).abs() < 5e-3, "{got} vs {want}");
        }
        assert_eq!(r.key_metric.value, 7.0);
        assert!(r.metrics.get("oracle_max_deviation").is_none());
        assert!(r.table("gaps").unwrap().rows.len() == 16);
    }

    #[test]
    fn gap_scenario_runs_oracle_on_small_grids() {
        let mut cfg = ScenarioConfig::with_scenario(ScenarioSpec::GapSpectroscopy(GapParams {}));
        cfg.grid = GridConfig {
            x_min: 0.0,
            x_max: 1.0,
            n_points: 18,
        };
        cfg.spectra.k = 3;
        let r = run_scenario(&cfg).unwrap();
        assert!(r.metric("oracle_max_deviation").unwrap() < 1e-8);
    }

    #[test]
    fn collapse_scenario_product_default() {
        let mut cfg = ScenarioConfig::with_scenario(ScenarioSpec::Collapse(CollapseParams::default()));
        cfg.grid = GridConfig {
            x_min: -8.0,
            x_max: 8.0,
            n_points: 401,
        };
        cfg.potential = PotentialSpec::Harmonic { omega: 1.0 };
        cfg.spectra.k = 4;
        let r = run_scenario(&cfg).unwrap();
        let p: Vec<f64> = r.metrics["statistics"]["p"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        assert!(p[2].abs() < 1e-12);
        assert!(r.metric("closed_form_delta_e_max_deviation").unwrap() < 1e-12);
        assert!(r.metric("probability_balance").unwrap().abs() < 1e-9);
    }

    #[test]
    fn collapse_scenario_random_has_residual() {
        let params = CollapseParams {
            state: CollapseState::Random,
            ..CollapseParams::default()
        };
        let mut cfg = ScenarioConfig::with_scenario(ScenarioSpec::Collapse(params));
        cfg.grid = GridConfig {
            x_min: 0.0,
            x_max: 1.0,
            n_points: 101,
        };
        cfg.spectra.k = 3;
        cfg.seed = 11;
        let r = run_scenario(&cfg).unwrap();
        let residual = r.metrics["statistics"]["truncation_residual"].as_f64().unwrap();
        assert!(residual > 1e-3);
        assert!(r.metric("probability_balance").unwrap().abs() < 1e-9);
        let again = run_scenario(&cfg).unwrap();
        assert_eq!(
            crate::output::to_json_string(&r),
            crate::output::to_json_string(&again)
        );
    }

    #[test]
    fn product_equivalence_small() {
        let mut cfg = ScenarioConfig::with_scenario(ScenarioSpec::ProductEquivalence(ProductParams::default()));
        cfg.grid = GridConfig {
            x_min: -10.0,
            x_max: 10.0,
            n_points: 121,
        };
        let r = run_scenario(&cfg).unwrap();
        assert!(r.metric("frobenius_gap").unwrap() < 1e-8);
        assert_eq!(r.metric("steps").unwrap(), 1000.0);
    }

    #[test]
    fn two_slit_small_geometry() {
        let mut cfg = ScenarioConfig::with_scenario(ScenarioSpec::TwoSlit(TwoSlitParams {
            sweep_points: 5,
            coefficients: Some(TwoSlitCoefficients::particle().as_array()),
            ..TwoSlitParams::default()
        }));
        cfg.grid.n_points = 401;
        let r = run_scenario(&cfg).unwrap();
        assert!(r.metric("visibility_wave").unwrap() > 0.9);
        assert!(r.metric("visibility_particle").unwrap() < 0.05);
        assert_eq!(r.flag("visibility_non_increasing"), Some(true));
        assert_eq!(r.flag("entropy_non_decreasing"), Some(true));
        assert!(r.metric("density_wave_max_deviation").unwrap() < 1e-10);
        assert_eq!(r.metric("visibility_custom"), r.metric("visibility_particle"));
        assert_eq!(r.table("densities").unwrap().columns.len(), 4);
    }

    #[test]
    fn names_round_trip() {
        for name in ScenarioSpec::NAMES {
            assert_eq!(ScenarioSpec::from_name(name).unwrap().name(), name);
        }
        assert_eq!(
            ScenarioSpec::from_name("nope").unwrap_err(),
            VnlwError::UnknownScenario("nope".into())
        );
    }
}
