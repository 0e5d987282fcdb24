//! Analysis of two-copy kernels.
//!
//! The kernel `Ψ(x, y)` is read as the integral operator
//! `(ϱ_Ψ φ)(x) = ∫ Ψ(x, y) φ(y) dy`, whose matrix on the grid is `A = Ψ·dx`.
//! The Schmidt coefficients are the singular values of `A`, which makes them
//! independent of the grid spacing.

use serde::Serialize;

use crate::error::{Result, VnlwError};
use crate::lattice::{Grid1D, HamiltonianMatrix};
use crate::spectra::EigenSystem;
use crate::state::{BipartiteWave, WaveFunction};
use crate::{CMat, C64};

/// Default relative cutoff for Schmidt coefficients.
pub const SCHMIDT_TOLERANCE: f64 = 1e-12;

/// Normalization slack accepted by the entropy routines.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Imaginary residue (relative to `max(1, |re|)`) above which an expectation
/// value signals a non-Hermitian operator.
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;

/// Kernel `Ψ_ij = ψ_i φ_j*`.
pub fn from_product(psi: &WaveFunction, phi: &WaveFunction) -> Result<BipartiteWave> {
    psi.check_grid(phi.grid())?;
    let a = psi.amplitudes();
    let b = phi.amplitudes();
    let n = a.len();
    let kernel = CMat::from_fn(n, n, |i, j| a[i] * b[j].conj());
    Ok(BipartiteWave::new(psi.grid(), kernel)?.with_time(psi.time()))
}

fn complexify(m: &faer::Mat<f64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| C64::new(m[(i, j)], 0.0))
}

/// `Φᵀ Ψ Φ dx²` for real basis columns `Φ`.
pub(crate) fn project_kernel(kernel: &CMat, basis: &faer::Mat<f64>, dx: f64) -> CMat {
    let phi = complexify(basis);
    let mut c = phi.transpose() * kernel * &phi;
    let w = C64::new(dx * dx, 0.0);
    for j in 0..c.ncols() {
        c.col_as_slice_mut(j).iter_mut().for_each(|v| *v *= w);
    }
    c
}

/// `Φ C Φᵀ` for real basis columns `Φ`.
pub(crate) fn expand_kernel(c: &CMat, basis: &faer::Mat<f64>) -> CMat {
    let phi = complexify(basis);
    &phi * c * phi.transpose()
}

fn weighted(psi: &BipartiteWave) -> CMat {
    let dx = C64::new(psi.grid().dx(), 0.0);
    let k = psi.kernel();
    CMat::from_fn(k.nrows(), k.ncols(), |i, j| k[(i, j)] * dx)
}

fn check_normalized(psi: &BipartiteWave) -> Result<()> {
    let n = psi.norm_sq();
    if (n - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(VnlwError::UnnormalizedState { norm_sq: n });
    }
    Ok(())
}

/// `−Σ p ln p` over positive weights (`0 ln 0 = 0`).
pub fn shannon_entropy(weights: impl IntoIterator<Item = f64>) -> f64 {
    weights
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

/// `Ψ = Σ μ_n ψ_n(x) φ_n*(y)`, coefficients descending.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    coefficients: Vec<f64>,
    left_states: Vec<WaveFunction>,
    right_states: Vec<WaveFunction>,
    residual: f64,
}

/// Serializable summary of a [`SchmidtDecomposition`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchmidtRecord {
    pub rank: usize,
    pub coefficients: Vec<f64>,
    pub weights: Vec<f64>,
    pub residual: f64,
    pub entropy: f64,
}

impl SchmidtDecomposition {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn left_states(&self) -> &[WaveFunction] {
        &self.left_states
    }

    pub fn right_states(&self) -> &[WaveFunction] {
        &self.right_states
    }

    /// Weight `Σ μ²` of the discarded coefficients.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }

    /// `−Σ μ_n² ln μ_n²` over the retained coefficients.
    pub fn entropy(&self) -> f64 {
        shannon_entropy(self.coefficients.iter().map(|m| m * m))
    }

    pub fn reconstruct(&self) -> Result<BipartiteWave> {
        let grid = *self.left_states[0].grid();
        let n = grid.n_points();
        let mut kernel = CMat::zeros(n, n);
        for ((mu, l), r) in self.coefficients.iter().zip(&self.left_states).zip(&self.right_states) {
            let (l, r) = (l.amplitudes(), r.amplitudes());
            for j in 0..n {
                let rc = r[j].conj() * *mu;
                kernel
                    .col_as_slice_mut(j)
                    .iter_mut()
                    .zip(l)
                    .for_each(|(k, a)| *k += a * rc);
            }
        }
        BipartiteWave::new(&grid, kernel)
    }

    pub fn record(&self) -> SchmidtRecord {
        SchmidtRecord {
            rank: self.rank(),
            coefficients: self.coefficients.clone(),
            weights: self.coefficients.iter().map(|m| m * m).collect(),
            residual: self.residual,
            entropy: self.entropy(),
        }
    }
}

/// Schmidt form via the SVD of `Ψ·dx`. Coefficients below `tol·μ_0` go to the
/// residual. Each left state is phased so its first significant entry is real
/// and positive (the right state absorbs the same phase).
pub fn schmidt(psi: &BipartiteWave, tol: f64) -> Result<SchmidtDecomposition> {
    if !(tol >= 0.0) {
        return Err(VnlwError::InvalidParameters(format!("tolerance must be ≥ 0, got {tol}")));
    }
    let grid = *psi.grid();
    let dx = grid.dx();
    let svd = weighted(psi)
        .svd()
        .map_err(|e| VnlwError::DecompositionFailure(format!("{e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|v| v.re).collect();
    let top = s.iter().cloned().fold(0.0, f64::max);
    let scale = 1.0 / dx.sqrt();

    let mut kept = Vec::new();
    let mut residual = 0.0;
    for (idx, &mu) in s.iter().enumerate() {
        if mu > 0.0 && mu > tol * top {
            kept.push(idx);
        } else {
            residual += mu * mu;
        }
    }

    let u = svd.U();
    let v = svd.V();
    let mut entries: Vec<(f64, usize, WaveFunction, WaveFunction)> = kept
        .into_iter()
        .map(|idx| {
            let mut left: Vec<C64> = (0..grid.n_points()).map(|i| u[(i, idx)] * scale).collect();
            let mut right: Vec<C64> = (0..grid.n_points()).map(|i| v[(i, idx)] * scale).collect();
            let lead = first_significant(&left);
            let a = left[lead];
            if a.norm() > 0.0 {
                let phase = (a / a.norm()).conj();
                left.iter_mut().for_each(|z| *z *= phase);
                right.iter_mut().for_each(|z| *z *= phase);
            }
            (
                s[idx],
                lead,
                WaveFunction::new(&grid, left).expect("grid-sized"),
                WaveFunction::new(&grid, right).expect("grid-sized"),
            )
        })
        .collect();
    let tie = 1e-12 * top.max(f64::MIN_POSITIVE);
    entries.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= tie {
            a.1.cmp(&b.1)
        } else {
            b.0.total_cmp(&a.0)
        }
    });

    let mut out = SchmidtDecomposition {
        coefficients: Vec::with_capacity(entries.len()),
        left_states: Vec::with_capacity(entries.len()),
        right_states: Vec::with_capacity(entries.len()),
        residual,
    };
    for (mu, _, l, r) in entries {
        out.coefficients.push(mu);
        out.left_states.push(l);
        out.right_states.push(r);
    }
    if out.coefficients.is_empty() {
        return Err(VnlwError::DecompositionFailure("kernel is identically zero".into()));
    }
    Ok(out)
}

fn first_significant(v: &[C64]) -> usize {
    let max = v.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    v.iter().position(|z| z.norm() > 1e-8 * max).unwrap_or(0)
}

/// Entanglement entropy `S = −Σ μ_n² ln μ_n²` of a normalized kernel.
pub fn entanglement_entropy(psi: &BipartiteWave) -> Result<f64> {
    check_normalized(psi)?;
    let s = weighted(psi)
        .singular_values()
        .map_err(|e| VnlwError::DecompositionFailure(format!("{e:?}")))?;
    Ok(shannon_entropy(s.into_iter().map(|m| m * m)))
}

/// The same entropy computed as `−tr ϱ_x ln ϱ_x` from the reduced matrix.
pub fn entropy_from_reduced(psi: &BipartiteWave) -> Result<f64> {
    check_normalized(psi)?;
    let rho = reduced_density_x(psi);
    let vals = rho
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| VnlwError::DecompositionFailure(format!("{e:?}")))?;
    Ok(shannon_entropy(vals))
}

/// `ϱ_x = tr_y |Ψ⟩⟨Ψ|` as an operator matrix on amplitude vectors (`AA†`).
pub fn reduced_density_x(psi: &BipartiteWave) -> CMat {
    let a = weighted(psi);
    &a * a.adjoint()
}

/// `ϱ_y = tr_x |Ψ⟩⟨Ψ|` as an operator matrix on amplitude vectors (`(A†A)ᵀ`).
pub fn reduced_density_y(psi: &BipartiteWave) -> CMat {
    let a = weighted(psi);
    (a.adjoint() * &a).transpose().to_owned()
}

/// `(ϱ_Ψ φ)_i = Σ_j Ψ_ij φ_j dx`
pub fn apply_rho(psi: &BipartiteWave, phi: &WaveFunction) -> Result<WaveFunction> {
    psi.check_grid(phi.grid())?;
    let k = psi.kernel();
    let f = phi.amplitudes();
    let n = f.len();
    let dx = psi.grid().dx();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (j, fj) in f.iter().enumerate() {
        if fj.norm_sqr() == 0.0 {
            continue;
        }
        let w = fj * dx;
        out.iter_mut().zip(k.col_as_slice(j)).for_each(|(o, kij)| *o += kij * w);
    }
    WaveFunction::new(psi.grid(), out)
}

/// `Tr[ϱ_Ψ O ϱ_Ψ†]` for an operator matrix `O` acting on amplitude vectors.
pub fn expectation(psi: &BipartiteWave, op: &CMat) -> Result<f64> {
    let n = psi.grid().n_points();
    if op.nrows() != n || op.ncols() != n {
        return Err(VnlwError::DimensionMismatch(format!(
            "operator is {}×{}, grid has {n} points",
            op.nrows(),
            op.ncols()
        )));
    }
    let a = weighted(psi);
    // Tr[A O A†] = Σ_ij O_ij (A†A)_ji
    let m = a.adjoint() * &a;
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            acc += op[(i, j)] * m[(j, i)];
        }
    }
    real_or_error(acc)
}

fn real_or_error(z: C64) -> Result<f64> {
    if z.im.abs() > HERMITICITY_TOLERANCE * z.re.abs().max(1.0) {
        return Err(VnlwError::NonHermitianOperator { imag: z.im });
    }
    Ok(z.re)
}

/// `Tr[ϱ_Ψ H ϱ_Ψ†]` using the tridiagonal structure of `H` (O(n²)).
pub fn energy_expectation(psi: &BipartiteWave, h: &HamiltonianMatrix) -> Result<f64> {
    psi.check_grid(h.grid())?;
    let k = psi.kernel();
    let n = k.nrows();
    let dx = psi.grid().dx();
    let mut acc = C64::new(0.0, 0.0);
    let mut row = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        for (j, r) in row.iter_mut().enumerate() {
            *r = k[(i, j)].conj();
        }
        let hr = h.apply(&row);
        acc += hr.iter().zip(&row).map(|(a, b)| a * b.conj()).sum::<C64>();
    }
    real_or_error(acc * dx * dx)
}

/// `‖ϱ_Ψ φ‖² = ∫|∫Ψ(x,y)φ(y)dy|²dx`
pub fn projection_probability(psi: &BipartiteWave, phi: &WaveFunction) -> Result<f64> {
    Ok(apply_rho(psi, phi)?.norm_sq())
}

/// `d_i = Σ_j |Ψ_ij|² dx`, the diagonal of `ϱ_Ψ ϱ_Ψ†`; integrates to `‖Ψ‖²`.
pub fn position_density(psi: &BipartiteWave) -> Vec<f64> {
    let k = psi.kernel();
    let n = k.nrows();
    let dx = psi.grid().dx();
    let mut d = vec![0.0; n];
    for j in 0..n {
        d.iter_mut()
            .zip(k.col_as_slice(j))
            .for_each(|(di, z)| *di += z.norm_sqr());
    }
    d.iter_mut().for_each(|v| *v *= dx);
    d
}

/// Diagonal position operator `x̂` on the grid.
pub fn position_operator(grid: &Grid1D) -> CMat {
    let n = grid.n_points();
    CMat::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(grid.x(i), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Projector `|φ⟩⟨φ|` as an operator matrix (`φ φ† dx`).
pub fn projector(phi: &WaveFunction) -> CMat {
    let a = phi.amplitudes();
    let dx = phi.grid().dx();
    CMat::from_fn(a.len(), a.len(), |i, j| a[i] * a[j].conj() * dx)
}

/// `c_nm` of `Ψ = Σ c_nm ψ_n(x) ψ_m*(y)` over a truncated eigenbasis.
#[derive(Debug, Clone)]
pub struct TransitionAmplitudes {
    c: CMat,
    energies: Vec<f64>,
    hbar: f64,
    truncation_residual: f64,
}

impl TransitionAmplitudes {
    /// Amplitudes over levels `energies`; `truncation_residual` is the kernel
    /// weight outside the basis.
    pub fn from_parts(c: CMat, energies: Vec<f64>, hbar: f64, truncation_residual: f64) -> Result<Self> {
        if c.nrows() != c.ncols() || c.nrows() != energies.len() {
            return Err(VnlwError::DimensionMismatch(format!(
                "{}×{} amplitudes for {} levels",
                c.nrows(),
                c.ncols(),
                energies.len()
            )));
        }
        if !(truncation_residual >= 0.0) {
            return Err(VnlwError::InvalidParameters(format!(
                "truncation residual must be ≥ 0, got {truncation_residual}"
            )));
        }
        Ok(Self {
            c,
            energies,
            hbar,
            truncation_residual,
        })
    }

    pub fn amplitudes(&self) -> &CMat {
        &self.c
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn k(&self) -> usize {
        self.energies.len()
    }

    pub fn truncation_residual(&self) -> f64 {
        self.truncation_residual
    }

    /// `Σ |c_nm|²`
    pub fn weight(&self) -> f64 {
        (0..self.k())
            .map(|j| self.c.col_as_slice(j).iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    }
}

/// `c_nm = ⟨ψ_n, ϱ_Ψ ψ_m⟩`
pub fn transition_amplitudes(psi: &BipartiteWave, eigs: &EigenSystem) -> Result<TransitionAmplitudes> {
    psi.check_grid(eigs.grid())?;
    let c = project_kernel(psi.kernel(), &eigs.state_matrix(), eigs.grid().dx());
    let mut amps = TransitionAmplitudes::from_parts(c, eigs.energies().to_vec(), eigs.hbar(), 0.0)?;
    amps.truncation_residual = (psi.norm_sq() - amps.weight()).max(0.0);
    Ok(amps)
}

/// Outcome probabilities and energy changes per final level `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseStatistics {
    /// `p_m = Σ_n |c_nm|²`
    pub p: Vec<f64>,
    /// `ΔE_m = Σ_n |c_nm|² (E_n − E_m)`, not divided by `p_m`
    pub delta_e: Vec<f64>,
    /// `ΔE_m / p_m`; a derived convenience, `None` where `p_m = 0`
    pub conditional_delta_e: Vec<Option<f64>>,
    pub truncation_residual: f64,
}

impl CollapseStatistics {
    pub fn total_probability(&self) -> f64 {
        self.p.iter().sum()
    }
}

pub fn collapse_statistics(c: &TransitionAmplitudes) -> CollapseStatistics {
    let k = c.k();
    let e = c.energies();
    let mut p = vec![0.0; k];
    let mut delta_e = vec![0.0; k];
    for m in 0..k {
        for n in 0..k {
            let w = c.amplitudes()[(n, m)].norm_sqr();
            p[m] += w;
            delta_e[m] += w * (e[n] - e[m]);
        }
    }
    let conditional_delta_e = p
        .iter()
        .zip(&delta_e)
        .map(|(&pm, &de)| if pm > 0.0 { Some(de / pm) } else { None })
        .collect();
    CollapseStatistics {
        p,
        delta_e,
        conditional_delta_e,
        truncation_residual: c.truncation_residual(),
    }
}
