//! Time evolution of one-copy states (`iħ∂ψ/∂t = Ĥψ`) and two-copy kernels
//! (`iħ∂Ψ/∂t = (Ĥ(x) − Ĥ(y))Ψ`).
//!
//! A kernel step is `Ψ ← UΨU†` with `U` the one-copy step, applied as a left
//! multiplication on columns followed by the same on the adjoint; the
//! `n² × n²` operator is never formed. Left and right factors commute, so a
//! run of steps is applied one side at a time.

use serde::{Deserialize, Serialize};

use crate::bipartite::{expand_kernel, project_kernel, TransitionAmplitudes};
use crate::error::{Result, VnlwError};
use crate::lattice::HamiltonianMatrix;
use crate::linalg::CayleyStep;
use crate::spectra::{eigensystem, EigenSystem};
pub use crate::state::{BipartiteWave, WaveFunction};
use crate::{CMat, C64};

/// Default time step (natural units).
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// `(I + iHdt/2ħ)⁻¹(I − iHdt/2ħ)` per step; exactly unitary.
    #[default]
    CrankNicolson,
    /// Exact phases `e^{−iE_n t/ħ}` in a (possibly truncated) eigenbasis.
    Eigenbasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub steps: usize,
    pub method: Method,
    /// Eigenbasis size for [`Method::Eigenbasis`]; `None` uses every state.
    pub basis_size: Option<usize>,
}

impl PropagatorConfig {
    /// A negative `dt` propagates backwards in time.
    pub fn new(dt: f64, steps: usize, method: Method) -> Result<Self> {
        let cfg = Self {
            dt,
            steps,
            method,
            basis_size: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_basis_size(mut self, k: usize) -> Self {
        self.basis_size = Some(k);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dt.is_finite() || self.dt == 0.0 {
            return Err(VnlwError::InvalidPropagator(format!(
                "dt must be finite and nonzero, got {}",
                self.dt
            )));
        }
        if self.basis_size == Some(0) {
            return Err(VnlwError::InvalidPropagator("basis_size must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.steps as f64
    }
}

enum Kind {
    Cayley(CayleyStep),
    Eigen(EigenSystem),
}

/// The one-copy propagator `U` for a fixed Hamiltonian and time step.
pub struct Propagator {
    kind: Kind,
    hamiltonian: HamiltonianMatrix,
    dt: f64,
}

impl Propagator {
    pub fn new(h: &HamiltonianMatrix, cfg: &PropagatorConfig) -> Result<Self> {
        cfg.validate()?;
        let kind = match cfg.method {
            Method::CrankNicolson => Kind::Cayley(CayleyStep::new(
                h.diagonal(),
                h.off_diagonal(),
                cfg.dt / (2.0 * h.hbar()),
            )?),
            Method::Eigenbasis => Kind::Eigen(eigensystem(h, cfg.basis_size.unwrap_or(h.dim()).min(h.dim()))?),
        };
        Ok(Self {
            kind,
            hamiltonian: h.clone(),
            dt: cfg.dt,
        })
    }

    /// Eigenbasis propagator reusing an existing eigensystem.
    pub fn from_eigensystem(h: &HamiltonianMatrix, eigs: EigenSystem, dt: f64) -> Result<Self> {
        if eigs.grid() != h.grid() {
            return Err(VnlwError::GridMismatch);
        }
        PropagatorConfig::new(dt, 0, Method::Eigenbasis)?;
        Ok(Self {
            kind: Kind::Eigen(eigs),
            hamiltonian: h.clone(),
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn hamiltonian(&self) -> &HamiltonianMatrix {
        &self.hamiltonian
    }

    /// Applies `U^steps` to a full-grid vector in place.
    fn advance(&self, v: &mut [C64], steps: usize, scratch: &mut [C64]) {
        if steps == 0 {
            return;
        }
        match &self.kind {
            Kind::Cayley(step) => {
                let n = v.len();
                let interior = &mut v[1..n - 1];
                let scratch = &mut scratch[..n - 2];
                for _ in 0..steps {
                    step.apply(interior, scratch);
                }
            }
            Kind::Eigen(eigs) => {
                let t = self.dt * steps as f64;
                let dx = eigs.grid().dx();
                let hbar = eigs.hbar();
                scratch.iter_mut().for_each(|s| *s = C64::new(0.0, 0.0));
                for n in 0..eigs.k() {
                    let phi = eigs.state_values(n);
                    let c: C64 = phi.iter().zip(v.iter()).map(|(p, a)| a * p).sum::<C64>() * dx;
                    let c = c * C64::from_polar(1.0, -eigs.energies()[n] * t / hbar);
                    scratch.iter_mut().zip(phi).for_each(|(s, p)| *s += c * p);
                }
                v.copy_from_slice(scratch);
            }
        }
    }

    /// `U^steps ψ`
    pub fn evolve(&self, psi: &WaveFunction, steps: usize) -> Result<WaveFunction> {
        psi.check_grid(self.hamiltonian.grid())?;
        let t = psi.time() + self.dt * steps as f64;
        let mut out = psi.clone().with_time(t);
        let mut scratch = vec![C64::new(0.0, 0.0); out.amplitudes().len()];
        self.advance(out.amplitudes_mut(), steps, &mut scratch);
        Ok(out)
    }

    /// `U^steps Ψ (U†)^steps`
    pub fn evolve_bipartite(&self, psi: &BipartiteWave, steps: usize) -> Result<BipartiteWave> {
        psi.check_grid(self.hamiltonian.grid())?;
        let t = psi.time() + self.dt * steps as f64;
        let grid = *psi.grid();
        let mut kernel = psi.kernel().clone();
        self.left_multiply(&mut kernel, steps);
        // ΨU† = (UΨ†)†
        let mut adj = kernel.adjoint().to_owned();
        self.left_multiply(&mut adj, steps);
        let kernel = adj.adjoint().to_owned();
        Ok(BipartiteWave::new(&grid, kernel)?.with_time(t))
    }

    fn left_multiply(&self, kernel: &mut CMat, steps: usize) {
        let n = kernel.nrows();
        let mut scratch = vec![C64::new(0.0, 0.0); n];
        for j in 1..n - 1 {
            self.advance(kernel.col_as_slice_mut(j), steps, &mut scratch);
        }
    }
}

/// Propagates `ψ` by `cfg.steps` steps of `cfg.dt`.
pub fn propagate_schrodinger(
    psi: &WaveFunction,
    h: &HamiltonianMatrix,
    cfg: &PropagatorConfig,
) -> Result<WaveFunction> {
    psi.check_grid(h.grid())?;
    Propagator::new(h, cfg)?.evolve(psi, cfg.steps)
}

/// Propagates the kernel `Ψ` by `cfg.steps` steps of `cfg.dt`.
pub fn propagate_vnl(
    psi: &BipartiteWave,
    h: &HamiltonianMatrix,
    cfg: &PropagatorConfig,
) -> Result<BipartiteWave> {
    psi.check_grid(h.grid())?;
    Propagator::new(h, cfg)?.evolve_bipartite(psi, cfg.steps)
}

/// Like [`propagate_vnl`], calling `observer` on the initial state and after
/// every `stride` steps (and on the final state if it is off-stride).
pub fn propagate_vnl_observed<F>(
    psi: &BipartiteWave,
    h: &HamiltonianMatrix,
    cfg: &PropagatorConfig,
    stride: usize,
    mut observer: F,
) -> Result<BipartiteWave>
where
    F: FnMut(&BipartiteWave),
{
    psi.check_grid(h.grid())?;
    let prop = Propagator::new(h, cfg)?;
    let stride = stride.max(1);
    let mut state = psi.clone();
    observer(&state);
    let mut done = 0;
    while done < cfg.steps {
        let chunk = stride.min(cfg.steps - done);
        state = prop.evolve_bipartite(&state, chunk)?;
        done += chunk;
        observer(&state);
    }
    Ok(state)
}

/// `Ψ(t) = Σ c_nm e^{−i(E_n − E_m)t/ħ} ψ_n(x) ψ_m*(y)`
pub fn eigenbasis_bipartite_evolution(
    c: &TransitionAmplitudes,
    eigs: &EigenSystem,
    t: f64,
) -> Result<BipartiteWave> {
    let k = c.k();
    if k > eigs.k() {
        return Err(VnlwError::DimensionMismatch(format!(
            "{k}×{k} amplitudes for an eigensystem of {} states",
            eigs.k()
        )));
    }
    let hbar = eigs.hbar();
    let e = eigs.energies();
    let phased = CMat::from_fn(k, k, |n, m| {
        c.amplitudes()[(n, m)] * C64::from_polar(1.0, -(e[n] - e[m]) * t / hbar)
    });
    let kernel = expand_kernel(&phased, &eigs.state_matrix());
    Ok(BipartiteWave::new(eigs.grid(), kernel)?.with_time(t))
}

/// `Σ_ij |Ψ_ij|² dx²`
pub fn bipartite_norm(psi: &BipartiteWave) -> f64 {
    psi.norm_sq()
}

/// Eigenbasis propagation of a kernel through its amplitudes: project onto
/// the first `eigs.k()` states, attach phases, re-expand.
pub fn propagate_vnl_in_eigenbasis(psi: &BipartiteWave, eigs: &EigenSystem, t: f64) -> Result<BipartiteWave> {
    psi.check_grid(eigs.grid())?;
    let c = project_kernel(psi.kernel(), &eigs.state_matrix(), eigs.grid().dx());
    let amps = TransitionAmplitudes::from_parts(c, eigs.energies().to_vec(), eigs.hbar(), 0.0)?;
    let out = eigenbasis_bipartite_evolution(&amps, eigs, t)?;
    Ok(out.with_time(psi.time() + t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite::{from_product, transition_amplitudes};
    use crate::lattice::{build_grid, build_hamiltonian, sample_potential, PotentialSpec};
    use crate::spectra::eigensystem;

    fn harmonic(n: usize) -> HamiltonianMatrix {
        let g = build_grid(-8.0, 8.0, n).unwrap();
        let u = sample_potential(&g, &PotentialSpec::Harmonic { omega: 1.0 }).unwrap();
        build_hamiltonian(&g, &u, 1.0, 1.0).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(PropagatorConfig::new(0.0, 10, Method::CrankNicolson).is_err());
        assert!(PropagatorConfig::new(f64::NAN, 10, Method::CrankNicolson).is_err());
        assert!(PropagatorConfig::new(-1e-3, 10, Method::CrankNicolson).is_ok());
        let cfg = PropagatorConfig::new(1e-3, 10, Method::Eigenbasis).unwrap();
        assert!((cfg.duration() - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn zero_steps_is_identity() {
        let h = harmonic(81);
        let psi = WaveFunction::gaussian(h.grid(), 0.5, 0.8, 0.3).unwrap();
        for method in [Method::CrankNicolson, Method::Eigenbasis] {
            let cfg = PropagatorConfig::new(1e-3, 0, method).unwrap();
            let out = propagate_schrodinger(&psi, &h, &cfg).unwrap();
            assert_eq!(out.amplitudes(), psi.amplitudes());
        }
    }

    #[test]
    fn eigenstate_acquires_phase() {
        let h = harmonic(161);
        let eigs = eigensystem(&h, 4).unwrap();
        let psi = eigs.state(2);
        let t = 1.7;
        let cfg = PropagatorConfig::new(t / 100.0, 100, Method::Eigenbasis).unwrap();
        let out = propagate_schrodinger(&psi, &h, &cfg).unwrap();
        let ov = psi.inner(&out).unwrap();
        let expected = C64::from_polar(1.0, -eigs.energies()[2] * t);
        assert!((ov - expected).norm() < 1e-8);
        assert!((out.time() - t).abs() < 1e-12);
    }

    #[test]
    fn crank_nicolson_norm_drift() {
        let h = harmonic(201);
        let psi = WaveFunction::gaussian(h.grid(), 1.0, 0.5, 2.0).unwrap();
        let prop = Propagator::new(&h, &PropagatorConfig::new(1e-2, 1, Method::CrankNicolson).unwrap()).unwrap();
        let mut state = psi;
        for _ in 0..200 {
            let before = state.norm_sq().sqrt();
            state = prop.evolve(&state, 1).unwrap();
            assert!((state.norm_sq().sqrt() - before).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_mismatch_rejected() {
        let h = harmonic(81);
        let other = build_grid(-8.0, 8.0, 91).unwrap();
        let psi = WaveFunction::gaussian(&other, 0.0, 1.0, 0.0).unwrap();
        let cfg = PropagatorConfig::new(1e-3, 1, Method::CrankNicolson).unwrap();
        assert_eq!(propagate_schrodinger(&psi, &h, &cfg).unwrap_err(), VnlwError::GridMismatch);
        let k = from_product(&psi, &psi).unwrap();
        assert_eq!(propagate_vnl(&k, &h, &cfg).unwrap_err(), VnlwError::GridMismatch);
    }

    #[test]
    fn stationary_bipartite_phase() {
        let h = harmonic(161);
        let eigs = eigensystem(&h, 3).unwrap();
        let psi = from_product(&eigs.state(2), &eigs.state(0)).unwrap();
        let t = 0.9;
        let cfg = PropagatorConfig::new(t / 10.0, 10, Method::Eigenbasis).unwrap();
        let out = propagate_vnl(&psi, &h, &cfg).unwrap();
        let gap = eigs.energies()[2] - eigs.energies()[0];
        let expected = psi.clone().scaled(C64::from_polar(1.0, -gap * t));
        assert!(out.distance(&expected).unwrap() < 1e-8);

        // diagonal outer form is stationary
        let diag = from_product(&eigs.state(1), &eigs.state(1)).unwrap();
        let cfg = PropagatorConfig::new(1e-2, 200, Method::CrankNicolson).unwrap();
        let out = propagate_vnl(&diag, &h, &cfg).unwrap();
        assert!(out.distance(&diag).unwrap() < 1e-8);
    }

    #[test]
    fn eigenbasis_evolution_closed_form() {
        let h = harmonic(201);
        let eigs = eigensystem(&h, 3).unwrap();
        let mut c = CMat::zeros(3, 3);
        c[(2, 0)] = C64::new(1.0, 0.0);
        let amps = TransitionAmplitudes::from_parts(c, eigs.energies().to_vec(), 1.0, 0.0).unwrap();
        let at0 = eigenbasis_bipartite_evolution(&amps, &eigs, 0.0).unwrap();
        let direct = from_product(&eigs.state(2), &eigs.state(0)).unwrap();
        assert!(at0.distance(&direct).unwrap() < 1e-12);

        // one full period of the discrete gap returns the state
        let gap = eigs.energies()[2] - eigs.energies()[0];
        let period = 2.0 * std::f64::consts::PI / gap;
        let back = eigenbasis_bipartite_evolution(&amps, &eigs, period).unwrap();
        assert!(back.distance(&at0).unwrap() < 1e-8);
        assert!((gap - 2.0).abs() < 1e-2);

        let later = eigenbasis_bipartite_evolution(&amps, &eigs, 3.3).unwrap();
        assert!((bipartite_norm(&later) - bipartite_norm(&at0)).abs() < 1e-12);
    }

    #[test]
    fn product_data_factorizes() {
        let h = harmonic(121);
        let psi = WaveFunction::gaussian(h.grid(), -1.0, 0.7, 1.0).unwrap();
        let cfg = PropagatorConfig::new(1e-2, 100, Method::CrankNicolson).unwrap();
        let k = propagate_vnl(&from_product(&psi, &psi).unwrap(), &h, &cfg).unwrap();
        let one = propagate_schrodinger(&psi, &h, &cfg).unwrap();
        let outer = from_product(&one, &one).unwrap();
        assert!(k.distance(&outer).unwrap() < 1e-8);
    }

    #[test]
    fn time_reversal() {
        let h = harmonic(121);
        let a = WaveFunction::gaussian(h.grid(), -1.0, 0.7, 1.0).unwrap();
        let b = WaveFunction::gaussian(h.grid(), 2.0, 0.5, -0.5).unwrap();
        let k = from_product(&a, &b).unwrap();
        let fwd = PropagatorConfig::new(5e-3, 200, Method::CrankNicolson).unwrap();
        let bwd = PropagatorConfig::new(-5e-3, 200, Method::CrankNicolson).unwrap();
        let there = propagate_vnl(&k, &h, &fwd).unwrap();
        let back = propagate_vnl(&there, &h, &bwd).unwrap();
        assert!(back.distance(&k).unwrap() < 1e-8);
        assert!(back.time().abs() < 1e-12);
    }

    #[test]
    fn observer_sees_every_stride() {
        let h = harmonic(61);
        let psi = WaveFunction::gaussian(h.grid(), 0.0, 1.0, 0.0).unwrap();
        let k = from_product(&psi, &psi).unwrap();
        let cfg = PropagatorConfig::new(1e-2, 25, Method::CrankNicolson).unwrap();
        let mut times = Vec::new();
        let out = propagate_vnl_observed(&k, &h, &cfg, 10, |s| times.push(s.time())).unwrap();
        assert_eq!(times.len(), 4);
        assert!((times[3] - 0.25).abs() < 1e-12);
        let direct = propagate_vnl(&k, &h, &cfg).unwrap();
        assert!(out.distance(&direct).unwrap() < 1e-12);
    }

    #[test]
    fn eigenbasis_propagation_matches_amplitude_route() {
        let h = harmonic(101);
        let eigs = eigensystem(&h, h.dim()).unwrap();
        let a = WaveFunction::gaussian(h.grid(), -1.0, 0.7, 1.0).unwrap();
        let k = from_product(&a, &a).unwrap();
        let via_c = eigenbasis_bipartite_evolution(&transition_amplitudes(&k, &eigs).unwrap(), &eigs, 0.8).unwrap();
        let via_prop = propagate_vnl_in_eigenbasis(&k, &eigs, 0.8).unwrap();
        assert!(via_c.distance(&via_prop).unwrap() < 1e-12);
    }
}
