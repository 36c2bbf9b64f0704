//! Data-generating processes and the Monte Carlo runner.

mod dgp;
mod experiment;

pub use dgp::*;
pub use experiment::*;
