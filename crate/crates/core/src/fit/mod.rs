//! Decay-rate extraction and finite-size power-law fits.

mod exponential;
mod gap;
mod power_law;

pub use exponential::{bootstrap_lambda, fit_exponential, ExpFit, FitOptions};
pub use gap::{gap_vs_drive, GapMinimum, GapOptions, GapPoint, GapScan};
pub use power_law::{fit_power_law, PowerLawFit};
