//! Stationary states of `Ĥ` and the energy-gap spectrum of `Ĥ(x) − Ĥ(y)`.
//!
//! The lowest `k` eigenpairs come from Sturm-sequence bisection followed by
//! inverse iteration on the tridiagonal matrix. [`difference_operator_spectrum`]
//! diagonalizes the explicit Kronecker operator `H⊗I − I⊗H` densely; it exists
//! to check that its eigenvalues are exactly the pairwise gaps `E_n − E_m`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Result, VnlwError};
use crate::lattice::{Grid1D, HamiltonianMatrix};
use crate::linalg::{gershgorin, sturm_count, PivotedTridiagLu};
use crate::state::WaveFunction;

/// Default tolerance for merging gaps in [`GapSpectrum::distinct`].
pub const GAP_DEDUP_TOLERANCE: f64 = 1e-9;

/// Default limit on the dimension of the explicit difference operator
/// (`64²`, i.e. interior grids of up to 64 nodes).
pub const DEFAULT_MAX_OPERATOR_DIM: usize = 64 * 64;

const MAX_INVERSE_ITERATIONS: usize = 12;
const EXTRA_ITERATIONS: usize = 2;
const RESIDUAL_BOUND: f64 = 1e-8;

/// Lowest `k` eigenpairs of a Hamiltonian, energies ascending, states
/// dx-orthonormal and sign-fixed (first nonzero component positive).
#[derive(Debug, Clone)]
pub struct EigenSystem {
    energies: Vec<f64>,
    states: Vec<Vec<f64>>,
    grid: Grid1D,
    hbar: f64,
}

impl EigenSystem {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Full-grid samples of state `n` (zero at the walls).
    pub fn state_values(&self, n: usize) -> &[f64] {
        &self.states[n]
    }

    pub fn state(&self, n: usize) -> WaveFunction {
        WaveFunction::from_real(&self.grid, &self.states[n]).expect("state length matches grid")
    }

    pub fn k(&self) -> usize {
        self.energies.len()
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `n_points × k` matrix whose columns are the states.
    pub fn state_matrix(&self) -> faer::Mat<f64> {
        faer::Mat::from_fn(self.grid.n_points(), self.k(), |i, n| self.states[n][i])
    }

    /// Largest `|⟨ψ_n, ψ_m⟩ − δ_nm|`.
    pub fn orthonormality_error(&self) -> f64 {
        let dx = self.grid.dx();
        let mut worst: f64 = 0.0;
        for n in 0..self.k() {
            for m in 0..=n {
                let ip: f64 = self.states[n]
                    .iter()
                    .zip(&self.states[m])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    * dx;
                let target = if n == m { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    /// Largest `‖Hψ_n − E_nψ_n‖ / max(1, |E_n|)` (dx-weighted norm).
    pub fn max_relative_residual(&self, h: &HamiltonianMatrix) -> f64 {
        let dx = self.grid.dx();
        (0..self.k())
            .map(|n| {
                let hv = h.apply_real(&self.states[n]);
                let r: f64 = hv
                    .iter()
                    .zip(&self.states[n])
                    .map(|(a, b)| (a - self.energies[n] * b).powi(2))
                    .sum::<f64>()
                    * dx;
                r.sqrt() / self.energies[n].abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// Keeps the lowest `k` states.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k() {
            return Err(VnlwError::KOutOfRange { k, max: self.k() });
        }
        Ok(Self {
            energies: self.energies[..k].to_vec(),
            states: self.states[..k].to_vec(),
            grid: self.grid,
            hbar: self.hbar,
        })
    }

    /// Builds a system from externally supplied levels and states, e.g.
    /// analytic references. States must be full-grid and dx-orthonormal.
    pub fn from_parts(grid: &Grid1D, energies: Vec<f64>, states: Vec<Vec<f64>>, hbar: f64) -> Result<Self> {
        if energies.len() != states.len() || energies.is_empty() {
            return Err(VnlwError::DimensionMismatch(format!(
                "{} energies for {} states",
                energies.len(),
                states.len()
            )));
        }
        if let Some(bad) = states.iter().find(|s| s.len() != grid.n_points()) {
            return Err(VnlwError::LengthMismatch {
                expected: grid.n_points(),
                got: bad.len(),
            });
        }
        let sys = Self {
            energies,
            states,
            grid: *grid,
            hbar,
        };
        if sys.orthonormality_error() > 1e-9 {
            return Err(VnlwError::InvalidParameters("states are not dx-orthonormal".into()));
        }
        Ok(sys)
    }
}

/// Lowest `k` eigenpairs of `h` (`1 ≤ k ≤ n_points − 2`).
pub fn eigensystem(h: &HamiltonianMatrix, k: usize) -> Result<EigenSystem> {
    let dim = h.dim();
    if k == 0 || k > dim {
        return Err(VnlwError::KOutOfRange { k, max: dim });
    }
    let d = h.diagonal();
    let e = h.off_diagonal();
    let (glo, ghi) = gershgorin(d, e);
    let tnorm = glo.abs().max(ghi.abs()).max(f64::MIN_POSITIVE);
    let max_e2 = e.iter().fold(0.0_f64, |m, v| m.max(v * v));
    let pivmin = f64::MIN_POSITIVE * max_e2.max(1.0);

    let mut values: Vec<f64> = (0..k).map(|j| bisect(d, e, j, glo, ghi, pivmin)).collect();

    // inverse iteration; vectors whose eigenvalues sit within `ortol` of
    // each other are Gram-Schmidt orthogonalized against one another
    let ortol = 1e-3 * tnorm;
    let eps = f64::EPSILON;
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut cluster_start = 0;
    for j in 0..k {
        if j > 0 && values[j] - values[j - 1] > ortol {
            cluster_start = j;
        }
        let mut shift = values[j];
        if j > cluster_start && shift - values[j - 1] < 10.0 * eps * tnorm {
            shift = values[j - 1] + 10.0 * eps * tnorm;
        }
        let lu = PivotedTridiagLu::new(d, e, shift, eps * tnorm);
        let mut v = start_vector(dim, j);
        let mut best: Option<(f64, Vec<f64>, f64)> = None;
        let mut iterations = 0;
        let mut extra = 0;
        for it in 0..MAX_INVERSE_ITERATIONS {
            iterations = it + 1;
            lu.solve_in_place(&mut v);
            for prev in &vectors[cluster_start..j] {
                let proj: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(prev).for_each(|(a, b)| *a -= proj * b);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                v = start_vector(dim, j + it + 1);
                continue;
            }
            v.iter_mut().for_each(|a| *a /= norm);
            let (theta, resid) = rayleigh(d, e, &v);
            let bound = RESIDUAL_BOUND * theta.abs().max(1.0);
            let improved = best.as_ref().is_none_or(|b| resid < b.0);
            if improved {
                best = Some((resid, v.clone(), theta));
            }
            // two more sweeps after convergence push the vector to roundoff
            if resid <= 0.01 * bound {
                extra += 1;
                if extra > EXTRA_ITERATIONS {
                    break;
                }
            } else if it >= 3 && !improved {
                break;
            }
        }
        let (resid, v, theta) = best.expect("at least one iteration ran");
        let bound = RESIDUAL_BOUND * theta.abs().max(1.0);
        if resid > bound {
            return Err(VnlwError::ConvergenceFailure {
                index: j,
                iterations,
                residual: resid,
                bound,
            });
        }
        values[j] = theta;
        vectors.push(v);
    }

    // Rayleigh refinement can swap near-degenerate neighbours
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let grid = *h.grid();
    let scale = 1.0 / grid.dx().sqrt();
    let mut energies = Vec::with_capacity(k);
    let mut states = Vec::with_capacity(k);
    for idx in order {
        energies.push(values[idx]);
        let mut full = vec![0.0; grid.n_points()];
        for (slot, v) in full[1..=dim].iter_mut().zip(&vectors[idx]) {
            *slot = v * scale;
        }
        fix_sign(&mut full);
        states.push(full);
    }
    Ok(EigenSystem {
        energies,
        states,
        grid,
        hbar: h.hbar(),
    })
}

fn bisect(d: &[f64], e: &[f64], j: usize, glo: f64, ghi: f64, pivmin: f64) -> f64 {
    let pad = 1e-12 * glo.abs().max(ghi.abs()).max(1.0);
    let mut lo = glo - pad;
    let mut hi = ghi + pad;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let tol = 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + pivmin;
        if hi - lo <= tol {
            break;
        }
        if sturm_count(d, e, mid, pivmin) <= j {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn rayleigh(d: &[f64], e: &[f64], v: &[f64]) -> (f64, f64) {
    let n = d.len();
    let tv: Vec<f64> = (0..n)
        .map(|i| {
            let mut acc = d[i] * v[i];
            if i > 0 {
                acc += e[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += e[i] * v[i + 1];
            }
            acc
        })
        .collect();
    let theta: f64 = tv.iter().zip(v).map(|(a, b)| a * b).sum();
    let resid = tv
        .iter()
        .zip(v)
        .map(|(a, b)| (a - theta * b).powi(2))
        .sum::<f64>()
        .sqrt();
    (theta, resid)
}

// deterministic, non-structured start vector
fn start_vector(n: usize, seed: usize) -> Vec<f64> {
    let mut state = 0x9E37_79B9_7F4A_7C15_u64 ^ (seed as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            0.5 + (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let threshold = 1e-12 * max;
    if let Some(first) = v.iter().find(|a| a.abs() > threshold) {
        if *first < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
    }
}

/// One gap `λ = E_n − E_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapEntry {
    pub n: usize,
    pub m: usize,
    pub lambda: f64,
}

/// All `k²` ordered gaps of an eigensystem, never deduplicated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSpectrum {
    entries: Vec<GapEntry>,
}

pub fn gap_spectrum(eigs: &EigenSystem) -> GapSpectrum {
    let e = eigs.energies();
    let entries = (0..e.len())
        .flat_map(|n| (0..e.len()).map(move |m| GapEntry { n, m, lambda: e[n] - e[m] }))
        .collect();
    GapSpectrum { entries }
}

impl GapSpectrum {
    pub fn entries(&self) -> &[GapEntry] {
        &self.entries
    }

    pub fn get(&self, n: usize, m: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|g| g.n == n && g.m == m)
            .map(|g| g.lambda)
    }

    /// All gap values sorted ascending (with multiplicity).
    pub fn sorted_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.entries.iter().map(|g| g.lambda).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Distinct gap values; neighbours closer than `tol` are merged.
    pub fn distinct(&self, tol: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for v in self.sorted_values() {
            match out.last() {
                Some(&last) if (v - last).abs() <= tol => {}
                _ => out.push(v),
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["n", "m", "lambda"])?;
        for g in &self.entries {
            wtr.write_record([
                g.n.to_string(),
                g.m.to_string(),
                crate::output::format_f64(g.lambda),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Eigenvalues of the dense `H⊗I − I⊗H`, ascending.
///
/// Refuses when the operator dimension `dim²` exceeds `max_dim`.
pub fn difference_operator_spectrum(h: &HamiltonianMatrix, max_dim: usize) -> Result<Vec<f64>> {
    let n = h.dim();
    let big = n * n;
    if big > max_dim {
        return Err(VnlwError::DimensionTooLarge { dim: big, max_dim });
    }
    let hd = h.to_dense();
    // row index (i, j) ↦ i·n + j, with i the x-copy and j the y-copy
    let op = faer::Mat::<f64>::from_fn(big, big, |r, c| {
        let (i, j) = (r / n, r % n);
        let (k, l) = (c / n, c % n);
        let mut v = 0.0;
        if j == l {
            v += hd[(i, k)];
        }
        if i == k {
            v -= hd[(j, l)];
        }
        v
    });
    let mut vals = op
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| VnlwError::DecompositionFailure(format!("{e:?}")))?;
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}
