use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),

    #[error("state has {got} sites, lattice has {expected}")]
    SiteMismatch { expected: usize, got: usize },

    #[error("non-finite amplitude encountered at site {site}")]
    NonFinite { site: usize },

    #[error("{diverged} of {total} trajectories diverged (limit {limit})")]
    TooManyDiverged { diverged: usize, total: usize, limit: usize },

    #[error("all {0} trajectories diverged")]
    AllDiverged(usize),

    #[error("no samples recorded after t_s = {0}")]
    NoSamples(f64),

    #[error("asymptotic regime not reached: {0}")]
    AsymptoticRegimeNotReached(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("Hilbert-space dimension {dimension} exceeds cap {cap}; try fewer sites or a smaller cutoff")]
    DimensionCap { dimension: usize, cap: usize },

    #[error("cutoff n_max = {n_max} too small: population {population:.4} within 2 of the cutoff")]
    CutoffTooSmall { n_max: usize, population: f64 },

    #[error("trace drifted by {0:.3e}; reduce the step size")]
    TraceDrift(f64),

    #[error("steady state not converged after {steps} steps (residual {residual:.3e})")]
    NotConverged { steps: usize, residual: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}
