use ddbh::config::RunConfig;
use ddbh::{Execution, LatticeSpec};

use crate::output::OutputDir;

pub mod benchmark;
pub mod gap;
pub mod histogram;
pub mod meanfield;
pub mod sweep;

pub struct Context {
    pub cfg: RunConfig,
    pub exec: Execution,
    pub out: OutputDir,
    /// Per-point failures; the run continues and exits with a numerical
    /// error once everything else is written.
    pub failures: Vec<String>,
}

impl Context {
    pub fn t_steady(&self) -> f64 {
        let e = &self.cfg.engine;
        e.t_steady_times_gamma.unwrap_or(0.5 * e.t_end_times_gamma)
    }
}

pub fn label(lattice: &LatticeSpec) -> String {
    format!("{}{}", lattice.kind(), lattice.size())
}
