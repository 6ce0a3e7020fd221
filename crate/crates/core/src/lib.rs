//! Simulation and analysis of the coherently driven, dissipative
//! Bose-Hubbard model on periodic 1D rings and 2D tori.
//!
//! * [`model`]: lattices, parameters and the Langevin drift.
//! * [`meanfield`]: homogeneous Gross-Pitaevskii fixed points.
//! * [`twa`]: truncated-Wigner trajectory ensembles.
//! * [`observables`]: normally ordered observables from Wigner moments.
//! * [`exact`]: Lindblad master equation in a truncated Fock space.
//! * [`fit`]: decay-rate and power-law fits.
//! * [`config`]: run-configuration files.
//!
//! All frequencies are in units of the loss rate `gamma`, times in `1/gamma`.

pub mod config;
pub mod error;
pub mod exact;
pub mod exec;
pub mod fit;
pub mod meanfield;
pub mod model;
pub mod observables;
pub mod twa;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{DriftKind, FieldState, LatticeKind, LatticeSpec, ModelParams};
