//! One-copy and two-copy wave functions on a [`Grid1D`].
//!
//! Both carry the grid they live on and the time they refer to. Entries on
//! the two wall nodes are pinned to zero on construction.

use crate::error::{Result, VnlwError};
use crate::lattice::{pin_boundary, Grid1D};
use crate::linalg;
use crate::{CMat, C64};

/// `ψ(x, t)` sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    amplitudes: Vec<C64>,
    grid: Grid1D,
    time: f64,
}

impl WaveFunction {
    /// Wraps full-grid amplitudes at `t = 0`. Wall entries are set to zero.
    pub fn new(grid: &Grid1D, mut amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(VnlwError::LengthMismatch {
                expected: grid.n_points(),
                got: amplitudes.len(),
            });
        }
        pin_boundary(&mut amplitudes);
        Ok(Self {
            amplitudes,
            grid: *grid,
            time: 0.0,
        })
    }

    pub fn from_real(grid: &Grid1D, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> C64) -> Self {
        let amps = grid.points().map(f).collect();
        Self::new(grid, amps).expect("length matches by construction")
    }

    /// Normalized Gaussian packet `exp(−(x−x0)²/(2σ²) + i k0 x)`.
    pub fn gaussian(grid: &Grid1D, center: f64, sigma: f64, momentum: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(VnlwError::InvalidParameters(format!(
                "gaussian width must be > 0, got {sigma}"
            )));
        }
        Self::from_fn(grid, |x| {
            let r = (x - center) / sigma;
            C64::from_polar((-0.5 * r * r).exp(), momentum * x)
        })
        .normalized()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    /// `Σ|ψ_i|² dx`
    pub fn norm_sq(&self) -> f64 {
        linalg::norm_sq(&self.amplitudes, self.grid.dx())
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sq();
        if !(n.is_finite() && n > 0.0) {
            return Err(VnlwError::UnnormalizedState { norm_sq: n });
        }
        let s = 1.0 / n.sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        Ok(self)
    }

    /// `⟨self, other⟩ = Σ conj(self_i) other_i dx`
    pub fn inner(&self, other: &WaveFunction) -> Result<C64> {
        self.check_grid(other.grid())?;
        Ok(linalg::inner(&self.amplitudes, &other.amplitudes, self.grid.dx()))
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub(crate) fn check_grid(&self, other: &Grid1D) -> Result<()> {
        if &self.grid != other {
            return Err(VnlwError::GridMismatch);
        }
        Ok(())
    }
}

/// `Ψ(x, y; t)` as an `n_points × n_points` kernel, rows indexed by `x`.
#[derive(Debug, Clone)]
pub struct BipartiteWave {
    kernel: CMat,
    grid: Grid1D,
    time: f64,
}

impl BipartiteWave {
    /// Wraps a kernel at `t = 0`; wall rows and columns are zeroed.
    pub fn new(grid: &Grid1D, mut kernel: CMat) -> Result<Self> {
        let n = grid.n_points();
        if kernel.nrows() != n || kernel.ncols() != n {
            return Err(VnlwError::DimensionMismatch(format!(
                "kernel is {}×{}, grid has {n} points",
                kernel.nrows(),
                kernel.ncols()
            )));
        }
        let zero = C64::new(0.0, 0.0);
        for k in 0..n {
            kernel[(0, k)] = zero;
            kernel[(n - 1, k)] = zero;
            kernel[(k, 0)] = zero;
            kernel[(k, n - 1)] = zero;
        }
        Ok(Self {
            kernel,
            grid: *grid,
            time: 0.0,
        })
    }

    pub fn zeros(grid: &Grid1D) -> Self {
        let n = grid.n_points();
        Self {
            kernel: CMat::zeros(n, n),
            grid: *grid,
            time: 0.0,
        }
    }

    pub fn kernel(&self) -> &CMat {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// `Σ_ij |Ψ_ij|² dx²`
    pub fn norm_sq(&self) -> f64 {
        let dx = self.grid.dx();
        let n = self.kernel.nrows();
        let mut acc = 0.0;
        for j in 0..n {
            acc += self.kernel.col_as_slice(j).iter().map(|a| a.norm_sqr()).sum::<f64>();
        }
        acc * dx * dx
    }

    pub fn scaled(mut self, factor: C64) -> Self {
        let n = self.kernel.nrows();
        for j in 0..n {
            self.kernel.col_as_slice_mut(j).iter_mut().for_each(|a| *a *= factor);
        }
        self
    }

    pub fn normalized(self) -> Result<Self> {
        let n = self.norm_sq();
        if !(n.is_finite() && n > 0.0) {
            return Err(VnlwError::UnnormalizedState { norm_sq: n });
        }
        Ok(self.scaled(C64::new(1.0 / n.sqrt(), 0.0)))
    }

    /// `self + factor · other`, same grid required.
    pub fn add_scaled(&self, other: &BipartiteWave, factor: C64) -> Result<Self> {
        self.check_grid(other.grid())?;
        let n = self.kernel.nrows();
        let kernel = CMat::from_fn(n, n, |i, j| self.kernel[(i, j)] + factor * other.kernel[(i, j)]);
        Ok(Self {
            kernel,
            grid: self.grid,
            time: self.time,
        })
    }

    /// dx-weighted Frobenius (L²) distance `‖Ψ − Φ‖`.
    pub fn distance(&self, other: &BipartiteWave) -> Result<f64> {
        self.check_grid(other.grid())?;
        let n = self.kernel.nrows();
        let mut acc = 0.0;
        for j in 0..n {
            let a = self.kernel.col_as_slice(j);
            let b = other.kernel.col_as_slice(j);
            acc += a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>();
        }
        Ok(acc.sqrt() * self.grid.dx())
    }

    /// `⟨self, other⟩ = Σ conj(Ψ_ij) Φ_ij dx²`
    pub fn inner(&self, other: &BipartiteWave) -> Result<C64> {
        self.check_grid(other.grid())?;
        let n = self.kernel.nrows();
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n {
            acc += linalg::inner(self.kernel.col_as_slice(j), other.kernel.col_as_slice(j), 1.0);
        }
        let dx = self.grid.dx();
        Ok(acc * dx * dx)
    }

    pub(crate) fn check_grid(&self, other: &Grid1D) -> Result<()> {
        if &self.grid != other {
            return Err(VnlwError::GridMismatch);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_grid;

    #[test]
    fn gaussian_is_normalized_with_pinned_walls() {
        let g = build_grid(-5.0, 5.0, 101).unwrap();
        let psi = WaveFunction::gaussian(&g, 0.5, 0.7, 1.2).unwrap();
        assert!((psi.norm_sq() - 1.0).abs() < 1e-12);
        assert_eq!(psi.amplitudes()[0], C64::new(0.0, 0.0));
        assert_eq!(psi.amplitudes()[100], C64::new(0.0, 0.0));
        assert!(WaveFunction::gaussian(&g, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn kernel_shape_checked_and_walls_zeroed() {
        let g = build_grid(0.0, 1.0, 10).unwrap();
        assert!(BipartiteWave::new(&g, CMat::zeros(9, 10)).is_err());
        let k = CMat::from_fn(10, 10, |_, _| C64::new(1.0, 0.0));
        let w = BipartiteWave::new(&g, k).unwrap();
        assert_eq!(w.kernel()[(0, 3)], C64::new(0.0, 0.0));
        assert_eq!(w.kernel()[(4, 9)], C64::new(0.0, 0.0));
        assert_eq!(w.kernel()[(4, 5)], C64::new(1.0, 0.0));
    }

    #[test]
    fn norm_homogeneity() {
        let g = build_grid(-3.0, 3.0, 31).unwrap();
        let k = CMat::from_fn(31, 31, |i, j| C64::new((i as f64).sin(), (j as f64 * 0.3).cos()));
        let w = BipartiteWave::new(&g, k).unwrap().normalized().unwrap();
        assert!((w.norm_sq() - 1.0).abs() < 1e-12);
        let w2 = w.clone().scaled(C64::new(2.0, 0.0));
        assert!((w2.norm_sq() - 4.0).abs() < 1e-12);
        assert!((w.distance(&w2).unwrap() - 1.0).abs() < 1e-12);
        assert!((w.inner(&w).unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_detected() {
        let g1 = build_grid(0.0, 1.0, 10).unwrap();
        let g2 = build_grid(0.0, 1.0, 11).unwrap();
        let a = WaveFunction::gaussian(&g1, 0.5, 0.1, 0.0).unwrap();
        let b = WaveFunction::gaussian(&g2, 0.5, 0.1, 0.0).unwrap();
        assert_eq!(a.inner(&b), Err(VnlwError::GridMismatch));
    }
}
