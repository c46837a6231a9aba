use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("integration diverged at step {step}")]
    Diverged { step: usize },

    /// The state is too far from the wall for the mobile-frame chart.
    #[error("state outside the mobile-frame chart at node {node} (v.M0 = {dot:.3e})")]
    RegimeViolation { node: usize, dot: f64 },

    #[error("frame coordinates leave the unit disk at node {node} (|r|^2 = {radius2:.6})")]
    FrameDomain { node: usize, radius2: f64 },

    #[error("perturbation norm {norm:.4e} exceeds chart radius {radius:.4e}")]
    OutsideChart { norm: f64, radius: f64 },

    #[error("collective-coordinate solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("ill-conditioned projection: {0}")]
    IllConditioned(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("perturbation does not decay: fitted slope {slope:.4e} >= 0")]
    NonDecay { slope: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
