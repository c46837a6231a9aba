//! End-to-end experiments: configuration, perturbations, run drivers and
//! report output.

pub mod config;
pub mod perturb;
pub mod report;
pub mod runs;

pub use config::{ExperimentConfig, ExperimentKind, Shape};
pub use perturb::{perturb, perturbation};
pub use report::{sweep_csv, trajectory_csv, Check, ExperimentReport, SeriesRow, SWEEP_HEADER, TRAJECTORY_HEADER};
pub use runs::{
    linear_stability_bound, run_lyapunov, run_simulate, run_stability, run_sweep, run_travel, wall_kinematics,
};
