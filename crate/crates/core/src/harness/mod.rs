//! Signal generation and the experiment pipelines: phase transitions of the
//! refined condition, noise-free recovery sweeps, and recovery under bounded
//! and Gaussian noise. Every run is deterministic given its config and seed.

mod config;
mod experiments;
mod signals;
mod table;

pub use config::{grid, ExperimentConfig, Method, NoiseSpec};
pub use experiments::{
    run, run_bounded_noise_sweep, run_gaussian_sweep, run_phase_transition, run_recovery_sweep, trial_rng,
    BP_SUPPORT_THRESHOLD, BP_TOLERANCE,
};
pub use signals::{add_bounded_noise, add_gaussian_noise, gen_mixture, gen_sparse_mixture, minimal_period};
pub use table::{fmt_num, ExperimentKind, ExperimentTable, Row, CSV_HEADER};
