//! Spatial grid, potentials and the finite-difference Hamiltonian.
//!
//! The grid includes both endpoints. Dirichlet walls sit on `x_min` and
//! `x_max`, so the Hamiltonian only acts on the `n_points − 2` interior
//! nodes; vectors over the full grid carry zeros at the two ends.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VnlwError};
use crate::C64;

/// Minimum number of grid points accepted by [`build_grid`].
pub const MIN_POINTS: usize = 8;

/// Uniform 1-D grid `x_i = x_min + i·dx`, `0 ≤ i < n_points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(VnlwError::DegenerateInterval { x_min, x_max });
        }
        if n_points < MIN_POINTS {
            return Err(VnlwError::TooFewPoints {
                n_points,
                min: MIN_POINTS,
            });
        }
        let dx = (x_max - x_min) / (n_points - 1) as f64;
        Ok(Self {
            x_min,
            x_max,
            n_points,
            dx,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Number of interior (unknown) nodes.
    pub fn dim(&self) -> usize {
        self.n_points - 2
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.x(i))
    }

    /// Index of the grid point nearest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx).round();
        i.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Half-open index range of grid points with `lo ≤ x ≤ hi`.
    pub fn index_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = ((lo - self.x_min) / self.dx - 1e-9).ceil().max(0.0) as usize;
        let end = (((hi - self.x_min) / self.dx + 1e-9).floor() + 1.0)
            .clamp(0.0, self.n_points as f64) as usize;
        start.min(end)..end
    }
}

pub fn build_grid(x_min: f64, x_max: f64, n_points: usize) -> Result<Grid1D> {
    Grid1D::new(x_min, x_max, n_points)
}

/// External potential `U(x)`.
///
/// `Harmonic` is the unit-mass form `½ω²x²`. `DoubleWell` is `a(x² − b²)²`.
/// `Barrier` is `height` on `|x − center| ≤ width/2` and zero elsewhere.
/// `InfiniteBox` is `U ≡ 0`; the walls are the grid ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    InfiniteBox,
    Harmonic { omega: f64 },
    DoubleWell { a: f64, b: f64 },
    Barrier { height: f64, width: f64, center: f64 },
    Tabulated { values: Vec<f64> },
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(VnlwError::InvalidPotential(msg));
        match self {
            PotentialSpec::InfiniteBox => Ok(()),
            PotentialSpec::Harmonic { omega } => {
                if !(omega.is_finite() && *omega > 0.0) {
                    return bad(format!("harmonic omega must be > 0, got {omega}"));
                }
                Ok(())
            }
            PotentialSpec::DoubleWell { a, b } => {
                if !(a.is_finite() && b.is_finite()) || *a < 0.0 {
                    return bad(format!("double-well needs finite a ≥ 0 and b, got a={a}, b={b}"));
                }
                Ok(())
            }
            PotentialSpec::Barrier {
                height,
                width,
                center,
            } => {
                if !(width.is_finite() && *width > 0.0) {
                    return bad(format!("barrier width must be > 0, got {width}"));
                }
                if !(height.is_finite() && center.is_finite()) {
                    return bad("barrier height and center must be finite".into());
                }
                Ok(())
            }
            PotentialSpec::Tabulated { values } => {
                if values.iter().any(|v| !v.is_finite()) {
                    return bad("tabulated potential contains non-finite values".into());
                }
                Ok(())
            }
        }
    }

    fn at(&self, x: f64) -> f64 {
        match *self {
            PotentialSpec::InfiniteBox | PotentialSpec::Tabulated { .. } => 0.0,
            PotentialSpec::Harmonic { omega } => 0.5 * omega * omega * x * x,
            PotentialSpec::DoubleWell { a, b } => {
                let s = x * x - b * b;
                a * s * s
            }
            PotentialSpec::Barrier {
                height,
                width,
                center,
            } => {
                if (x - center).abs() <= 0.5 * width {
                    height
                } else {
                    0.0
                }
            }
        }
    }
}

/// Samples `U(x_i)` at every grid point.
pub fn sample_potential(grid: &Grid1D, spec: &PotentialSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if let PotentialSpec::Tabulated { values } = spec {
        if values.len() != grid.n_points() {
            return Err(VnlwError::TabulatedLengthMismatch {
                expected: grid.n_points(),
                got: values.len(),
            });
        }
        return Ok(values.clone());
    }
    Ok(grid.points().map(|x| spec.at(x)).collect())
}

/// Reads a two-column `x,U` CSV table and linearly interpolates it onto the
/// grid. Points outside the table take the nearest end value.
pub fn tabulated_from_csv<R: Read>(grid: &Grid1D, reader: R) -> Result<PotentialSpec> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut table: Vec<(f64, f64)> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| VnlwError::InvalidPotential(format!("csv: {e}")))?;
        if rec.len() != 2 {
            return Err(VnlwError::InvalidPotential(format!(
                "csv row {} has {} columns, expected 2",
                line + 1,
                rec.len()
            )));
        }
        let parse = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
        match (parse(&rec[0]), parse(&rec[1])) {
            (Some(x), Some(u)) => table.push((x, u)),
            // a non-numeric first row is a header
            _ if line == 0 && table.is_empty() => continue,
            _ => {
                return Err(VnlwError::InvalidPotential(format!(
                    "csv row {} is not numeric",
                    line + 1
                )))
            }
        }
    }
    if table.len() < 2 {
        return Err(VnlwError::InvalidPotential(
            "csv table needs at least two rows".into(),
        ));
    }
    table.sort_by(|a, b| a.0.total_cmp(&b.0));
    if table.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(VnlwError::InvalidPotential("duplicate x in csv table".into()));
    }
    let values = grid.points().map(|x| interpolate(&table, x)).collect();
    Ok(PotentialSpec::Tabulated { values })
}

fn interpolate(table: &[(f64, f64)], x: f64) -> f64 {
    let first = table[0];
    let last = table[table.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let hi = table.partition_point(|p| p.0 <= x);
    let (x0, u0) = table[hi - 1];
    let (x1, u1) = table[hi];
    u0 + (u1 - u0) * (x - x0) / (x1 - x0)
}

/// Real symmetric tridiagonal `Ĥ = −ħ²/2m ∇² + U` on the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    diagonal: Vec<f64>,
    off_diagonal: Vec<f64>,
    hbar: f64,
    mass: f64,
    grid: Grid1D,
}

/// Builds the 3-point-stencil Hamiltonian. `potential` is sampled on the full
/// grid; its two endpoint values are unused (the wave function vanishes there).
pub fn build_hamiltonian(
    grid: &Grid1D,
    potential: &[f64],
    hbar: f64,
    mass: f64,
) -> Result<HamiltonianMatrix> {
    if potential.len() != grid.n_points() {
        return Err(VnlwError::LengthMismatch {
            expected: grid.n_points(),
            got: potential.len(),
        });
    }
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(VnlwError::NonpositiveConstant {
            name: "hbar",
            value: hbar,
        });
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(VnlwError::NonpositiveConstant {
            name: "mass",
            value: mass,
        });
    }
    let dx = grid.dx();
    let kinetic = hbar * hbar / (mass * dx * dx);
    let dim = grid.dim();
    let diagonal = potential[1..=dim].iter().map(|u| kinetic + u).collect();
    let off_diagonal = vec![-0.5 * kinetic; dim - 1];
    Ok(HamiltonianMatrix {
        diagonal,
        off_diagonal,
        hbar,
        mass,
        grid: *grid,
    })
}

impl HamiltonianMatrix {
    /// Diagonal over interior nodes `x_1 … x_{n−2}`.
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn off_diagonal(&self) -> &[f64] {
        &self.off_diagonal
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal.iter().sum()
    }

    /// Adds a pointwise potential (full-grid samples) to the diagonal.
    pub fn with_added_potential(&self, extra: &[f64]) -> Result<Self> {
        if extra.len() != self.grid.n_points() {
            return Err(VnlwError::LengthMismatch {
                expected: self.grid.n_points(),
                got: extra.len(),
            });
        }
        let mut out = self.clone();
        for (d, u) in out.diagonal.iter_mut().zip(&extra[1..=self.dim()]) {
            *d += u;
        }
        Ok(out)
    }

    /// `Hv` for a full-grid vector. Endpoint entries of `v` are treated as the
    /// (zero) boundary values; the result has zero endpoints.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.apply_generic(v)
    }

    pub fn apply_real(&self, v: &[f64]) -> Vec<f64> {
        self.apply_generic(v)
    }

    fn apply_generic<T>(&self, v: &[T]) -> Vec<T>
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        assert_eq!(v.len(), self.grid.n_points(), "vector length must match grid");
        let dim = self.dim();
        let mut out = vec![T::default(); v.len()];
        for k in 0..dim {
            let mut acc = v[k + 1] * self.diagonal[k];
            if k > 0 {
                acc = acc + v[k] * self.off_diagonal[k - 1];
            }
            if k + 1 < dim {
                acc = acc + v[k + 2] * self.off_diagonal[k];
            }
            out[k + 1] = acc;
        }
        out
    }

    /// Dense `dim × dim` matrix on the interior nodes.
    pub fn to_dense(&self) -> faer::Mat<f64> {
        let n = self.dim();
        faer::Mat::from_fn(n, n, |i, j| {
            if i == j {
                self.diagonal[i]
            } else if i + 1 == j {
                self.off_diagonal[i]
            } else if j + 1 == i {
                self.off_diagonal[j]
            } else {
                0.0
            }
        })
    }

    /// The Hamiltonian as an `n_points × n_points` operator matrix acting on
    /// full-grid amplitude vectors (zero rows/columns at the walls).
    pub fn to_grid_operator(&self) -> crate::CMat {
        let n = self.grid.n_points();
        let dim = self.dim();
        faer::Mat::from_fn(n, n, |i, j| {
            if i == 0 || j == 0 || i > dim || j > dim {
                return C64::new(0.0, 0.0);
            }
            let (a, b) = (i - 1, j - 1);
            let v = if a == b {
                self.diagonal[a]
            } else if a + 1 == b {
                self.off_diagonal[a]
            } else if b + 1 == a {
                self.off_diagonal[b]
            } else {
                0.0
            };
            C64::new(v, 0.0)
        })
    }
}

/// Dirichlet pinning: zero the two endpoint entries.
pub(crate) fn pin_boundary<T: Default>(v: &mut [T]) {
    if let Some(first) = v.first_mut() {
        *first = T::default();
    }
    if let Some(last) = v.last_mut() {
        *last = T::default();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(u: &[f64], v: &[f64], dx: f64) -> f64 {
        u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * dx
    }

    #[test]
    fn grid_spacing_and_points() {
        let g = build_grid(0.0, 1.0, 11).unwrap();
        assert!((g.dx() - 0.1).abs() < 1e-15);
        assert!((g.x(5) - 0.5).abs() < 1e-15);

        let g = build_grid(-10.0, 10.0, 201).unwrap();
        assert!((g.dx() - 0.1).abs() < 1e-14);
        assert!(g.x(100).abs() < 1e-12);
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(
            build_grid(0.0, 1.0, 2),
            Err(VnlwError::TooFewPoints { n_points: 2, .. })
        ));
        assert!(matches!(
            build_grid(1.0, 1.0, 20),
            Err(VnlwError::DegenerateInterval { .. })
        ));
        assert!(matches!(
            build_grid(2.0, 1.0, 20),
            Err(VnlwError::DegenerateInterval { .. })
        ));
    }

    #[test]
    fn index_range_is_inclusive() {
        let g = build_grid(-1.0, 1.0, 21).unwrap();
        let r = g.index_range(-0.5, 0.5);
        assert_eq!(r, 5..16);
        assert_eq!(g.index_range(-5.0, 5.0), 0..21);
        assert!(g.index_range(0.52, 0.58).is_empty());
    }

    #[test]
    fn potentials() {
        let g = build_grid(-2.0, 2.0, 41).unwrap();
        let u = sample_potential(&g, &PotentialSpec::Harmonic { omega: 1.0 }).unwrap();
        assert_eq!(u[20], 0.0);
        assert!((u[40] - 2.0).abs() < 1e-12);
        let u = sample_potential(&g, &PotentialSpec::InfiniteBox).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
        let u = sample_potential(
            &g,
            &PotentialSpec::Barrier {
                height: 3.0,
                width: 1.0,
                center: 0.0,
            },
        )
        .unwrap();
        assert_eq!(u[20], 3.0);
        assert_eq!(u[0], 0.0);
        let u = sample_potential(&g, &PotentialSpec::DoubleWell { a: 1.0, b: 1.0 }).unwrap();
        assert!(u[30].abs() < 1e-12);
        assert!((u[20] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn potential_errors() {
        let g = build_grid(0.0, 1.0, 10).unwrap();
        assert!(matches!(
            sample_potential(&g, &PotentialSpec::Tabulated { values: vec![0.0; 9] }),
            Err(VnlwError::TabulatedLengthMismatch {
                expected: 10,
                got: 9
            })
        ));
        assert!(sample_potential(&g, &PotentialSpec::Harmonic { omega: 0.0 }).is_err());
        assert!(sample_potential(
            &g,
            &PotentialSpec::Barrier {
                height: 1.0,
                width: 0.0,
                center: 0.5
            }
        )
        .is_err());
    }

    #[test]
    fn csv_interpolation() {
        let g = build_grid(0.0, 1.0, 11).unwrap();
        let data = "x,U\n0.0,0.0\n0.5,1.0\n1.0,0.0\n";
        let spec = tabulated_from_csv(&g, data.as_bytes()).unwrap();
        let PotentialSpec::Tabulated { values } = spec else {
            panic!("expected tabulated")
        };
        assert!((values[1] - 0.2).abs() < 1e-12);
        assert!((values[5] - 1.0).abs() < 1e-12);
        assert!((values[8] - 0.4).abs() < 1e-12);
        assert!(tabulated_from_csv(&g, "0,1\n".as_bytes()).is_err());
        assert!(tabulated_from_csv(&g, "0,1\nfoo,2\n".as_bytes()).is_err());
    }

    #[test]
    fn stencil_entries() {
        let g = build_grid(0.0, 9.0, 10).unwrap();
        let h = build_hamiltonian(&g, &[0.0; 10], 1.0, 1.0).unwrap();
        assert_eq!(h.dim(), 8);
        assert!(h.diagonal().iter().all(|&d| d == 1.0));
        assert!(h.off_diagonal().iter().all(|&e| e == -0.5));

        let shifted = build_hamiltonian(&g, &[2.5; 10], 1.0, 1.0).unwrap();
        assert!(shifted.diagonal().iter().all(|&d| d == 3.5));
        assert_eq!(shifted.off_diagonal(), h.off_diagonal());
    }

    #[test]
    fn constant_vector_has_zero_interior_laplacian() {
        let g = build_grid(0.0, 9.0, 10).unwrap();
        let h = build_hamiltonian(&g, &[0.0; 10], 1.0, 1.0).unwrap();
        let mut v = vec![1.0; 10];
        pin_boundary(&mut v);
        let hv = h.apply_real(&v);
        for (i, val) in hv.iter().enumerate().take(8).skip(2) {
            assert_eq!(*val, 0.0, "row {i}");
        }
        assert_ne!(hv[1], 0.0);
        assert_ne!(hv[8], 0.0);
    }

    #[test]
    fn hamiltonian_errors() {
        let g = build_grid(0.0, 1.0, 10).unwrap();
        assert!(matches!(
            build_hamiltonian(&g, &[0.0; 9], 1.0, 1.0),
            Err(VnlwError::LengthMismatch { .. })
        ));
        assert!(matches!(
            build_hamiltonian(&g, &[0.0; 10], 0.0, 1.0),
            Err(VnlwError::NonpositiveConstant { name: "hbar", .. })
        ));
        assert!(matches!(
            build_hamiltonian(&g, &[0.0; 10], 1.0, -1.0),
            Err(VnlwError::NonpositiveConstant { name: "mass", .. })
        ));
    }

    #[test]
    fn linear_in_potential() {
        let g = build_grid(-3.0, 3.0, 31).unwrap();
        let u1 = sample_potential(&g, &PotentialSpec::Harmonic { omega: 1.3 }).unwrap();
        let u2 = sample_potential(&g, &PotentialSpec::DoubleWell { a: 0.2, b: 1.0 }).unwrap();
        let sum: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a + b).collect();
        let direct = build_hamiltonian(&g, &sum, 1.0, 1.0).unwrap();
        let staged = build_hamiltonian(&g, &u1, 1.0, 1.0)
            .unwrap()
            .with_added_potential(&u2)
            .unwrap();
        for (a, b) in direct.diagonal().iter().zip(staged.diagonal()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(direct.off_diagonal(), staged.off_diagonal());
    }

    #[test]
    fn stencil_converges_second_order() {
        // sin(kx) with k = π on [0, 1] vanishes at both walls; H sin = (k²/2) sin
        let k = std::f64::consts::PI;
        let mut errs = Vec::new();
        for n in [51, 101, 201, 401] {
            let g = build_grid(0.0, 1.0, n).unwrap();
            let h = build_hamiltonian(&g, &vec![0.0; n], 1.0, 1.0).unwrap();
            let psi: Vec<f64> = g.points().map(|x| (k * x).sin()).collect();
            let hpsi = h.apply_real(&psi);
            let err: f64 = (1..n - 1)
                .map(|i| (hpsi[i] - 0.5 * k * k * psi[i]).powi(2))
                .sum::<f64>()
                * g.dx();
            errs.push(err.sqrt());
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
        }
    }

    #[test]
    fn hermitian_under_weighted_inner_product() {
        let g = build_grid(-4.0, 4.0, 41).unwrap();
        let u = sample_potential(&g, &PotentialSpec::Harmonic { omega: 0.7 }).unwrap();
        let h = build_hamiltonian(&g, &u, 1.0, 1.0).unwrap();
        let mut a: Vec<f64> = g.points().map(|x| (1.3 * x).cos() + 0.1 * x).collect();
        let mut b: Vec<f64> = g.points().map(|x| (-x * x).exp() * x).collect();
        pin_boundary(&mut a);
        pin_boundary(&mut b);
        let lhs = dot(&a, &h.apply_real(&b), g.dx());
        let rhs = dot(&h.apply_real(&a), &b, g.dx());
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));

        let d = h.to_dense();
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                assert_eq!(d[(i, j)], d[(j, i)]);
            }
        }
    }
}
