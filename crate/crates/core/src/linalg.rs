//! Small tridiagonal kernels shared by the eigensolver and the propagators.

use crate::error::{Result, VnlwError};
use crate::C64;

/// `Σ conj(f_i) g_i dx`
pub(crate) fn inner(f: &[C64], g: &[C64], dx: f64) -> C64 {
    f.iter().zip(g).map(|(a, b)| a.conj() * b).sum::<C64>() * dx
}

pub(crate) fn norm_sq(f: &[C64], dx: f64) -> f64 {
    f.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx
}

/// Number of eigenvalues of the symmetric tridiagonal `(d, e)` strictly
/// below `x` (Sturm sequence count).
pub(crate) fn sturm_count(d: &[f64], e: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        q = d[i] - x - e[i - 1] * e[i - 1] / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval containing the spectrum.
pub(crate) fn gershgorin(d: &[f64], e: &[f64]) -> (f64, f64) {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { e[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - left - right);
        hi = hi.max(d[i] + left + right);
    }
    (lo, hi)
}

/// LU factorization of `T − σI` with partial pivoting (LAPACK `gttrf` layout).
pub(crate) struct PivotedTridiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl PivotedTridiagLu {
    /// Zero pivots are replaced by `tiny`, which is what inverse iteration
    /// wants near an exact eigenvalue.
    pub(crate) fn new(diag: &[f64], off: &[f64], shift: f64, tiny: f64) -> Self {
        let n = diag.len();
        let mut d: Vec<f64> = diag.iter().map(|v| v - shift).collect();
        let mut dl = off.to_vec();
        let mut du = off.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if let Some(last) = d.last_mut() {
            if *last == 0.0 {
                *last = tiny;
            }
        }
        Self {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i] - self.dl[i] * b[i + 1];
                b[i] = b[i + 1];
                b[i + 1] = temp;
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// One Crank–Nicolson (Cayley) step `(I + iaH)⁻¹(I − iaH)` with
/// `a = dt/(2ħ)`, factored once for repeated use.
#[derive(Debug, Clone)]
pub(crate) struct CayleyStep {
    // entries of the right-hand operator (I − iaH)
    rhs_diag: Vec<C64>,
    rhs_off: Vec<C64>,
    // Thomas factorization of (I + iaH)
    off: Vec<C64>,
    c_prime: Vec<C64>,
    inv_denom: Vec<C64>,
}

impl CayleyStep {
    pub(crate) fn new(diag: &[f64], off_diag: &[f64], a: f64) -> Result<Self> {
        let n = diag.len();
        let i = C64::i();
        let lhs_diag: Vec<C64> = diag.iter().map(|&d| 1.0 + i * a * d).collect();
        let off: Vec<C64> = off_diag.iter().map(|&e| i * a * e).collect();
        let rhs_diag = diag.iter().map(|&d| 1.0 - i * a * d).collect();
        let rhs_off = off_diag.iter().map(|&e| -i * a * e).collect();

        let mut c_prime = vec![C64::new(0.0, 0.0); n.saturating_sub(1)];
        let mut inv_denom = vec![C64::new(0.0, 0.0); n];
        let mut prev_c = C64::new(0.0, 0.0);
        for k in 0..n {
            let denom = if k == 0 {
                lhs_diag[0]
            } else {
                lhs_diag[k] - off[k - 1] * prev_c
            };
            if denom.norm() < 1e-300 || !denom.is_finite() {
                return Err(VnlwError::LinearSolveFailure(format!(
                    "zero pivot at row {k} of the Crank-Nicolson system"
                )));
            }
            inv_denom[k] = denom.inv();
            if k + 1 < n {
                prev_c = off[k] * inv_denom[k];
                c_prime[k] = prev_c;
            }
        }
        Ok(Self {
            rhs_diag,
            rhs_off,
            off,
            c_prime,
            inv_denom,
        })
    }

    /// Applies the step to an interior vector, using `scratch` (same length).
    pub(crate) fn apply(&self, v: &mut [C64], scratch: &mut [C64]) {
        let n = v.len();
        debug_assert_eq!(n, self.rhs_diag.len());
        for k in 0..n {
            let mut acc = self.rhs_diag[k] * v[k];
            if k > 0 {
                acc += self.rhs_off[k - 1] * v[k - 1];
            }
            if k + 1 < n {
                acc += self.rhs_off[k] * v[k + 1];
            }
            scratch[k] = acc;
        }
        // forward sweep
        v[0] = scratch[0] * self.inv_denom[0];
        for k in 1..n {
            v[k] = (scratch[k] - self.off[k - 1] * v[k - 1]) * self.inv_denom[k];
        }
        // back substitution
        for k in (0..n - 1).rev() {
            let next = v[k + 1];
            v[k] -= self.c_prime[k] * next;
        }
    }
}
