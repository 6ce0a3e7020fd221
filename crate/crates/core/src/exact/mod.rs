//! Brute-force Lindblad master equation for small clusters.
//!
//! The density matrix lives in a truncated tensor-product Fock basis,
//! optionally displaced site by site (`a_j -> a_j + beta_j`). Displacing by
//! the mean-field amplitude leaves only the fluctuations to be resolved, so
//! strongly populated clusters fit a small cutoff. With zero displacement
//! this is the plain Fock basis.

mod basis;
mod evolve;
mod liouvillian;

pub use basis::{DensityMatrix, FockBasis, Observable};
pub use evolve::{
    converge_cutoff, evolve, steady_state, steady_state_direct, CutoffScan, Evolution, SteadyOptions, SteadyStateResult,
};
pub use liouvillian::{build_liouvillian, Liouvillian, DEFAULT_DIMENSION_CAP};
