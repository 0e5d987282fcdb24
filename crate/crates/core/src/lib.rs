//! Bipartite ("two-copy") wave functions of a single particle on a 1-D grid.
//!
//! A state is a kernel `Ψ(x, y)` evolving under
//! `iħ ∂Ψ/∂t = (Ĥ(x) − Ĥ(y)) Ψ`. The crate builds the finite-difference
//! Hamiltonian ([`lattice`]), its eigenstates and level gaps ([`spectra`]),
//! propagates one- and two-copy states ([`dynamics`]), analyses kernels
//! (Schmidt form, entropy, measurement functional, collapse statistics;
//! [`bipartite`]) and packages the two-slit, collapse, gap and
//! product-state experiments ([`scenarios`]). The `vnlw` binary drives all of
//! it from JSON configs ([`cli`]).

pub mod bipartite;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod lattice;
mod linalg;
pub mod output;
pub mod scenarios;
pub mod spectra;
pub mod state;

pub use error::{Result, VnlwError};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix (column-major).
pub type CMat = faer::Mat<C64>;

pub use bipartite::{
    apply_rho, collapse_statistics, entanglement_entropy, entropy_from_reduced, expectation,
    from_product, position_density, projection_probability, schmidt, transition_amplitudes,
    CollapseStatistics, SchmidtDecomposition, TransitionAmplitudes,
};
pub use dynamics::{
    bipartite_norm, eigenbasis_bipartite_evolution, propagate_schrodinger, propagate_vnl, Method,
    PropagatorConfig,
};
pub use lattice::{build_grid, build_hamiltonian, sample_potential, Grid1D, HamiltonianMatrix, PotentialSpec};
pub use spectra::{difference_operator_spectrum, eigensystem, gap_spectrum, EigenSystem, GapSpectrum};
pub use state::{BipartiteWave, WaveFunction};
