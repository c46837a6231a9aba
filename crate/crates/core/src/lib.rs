pub mod chart;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod noise;
pub mod profiles;
pub mod snapshot;
pub mod spectral;

pub use error::{Error, Result};
