pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod imageio;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod swe;
pub mod trainer;

pub use error::{Error, Result};
