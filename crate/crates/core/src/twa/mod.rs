//! Truncated-Wigner Langevin integration for trajectory ensembles.

mod dump;
mod engine;
mod ensemble;

pub use dump::{read_trajectory_dump, write_trajectory_dump, TrajectoryDump};
pub use engine::{
    noise_increment, sample_initial, step, trajectory_rng, EngineConfig, InitialState, Scheme, Stepper,
};
pub use ensemble::{run_ensemble, Ensemble, MomentAccumulator, Moment, TrajectoryRecord, WindowSamples};
