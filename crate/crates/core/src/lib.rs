pub mod competitors;
pub mod error;
pub mod inference;
pub mod nulldist;
pub mod numeric;
pub mod samplers;
pub mod standardize;
pub mod statistic;

pub use error::{Error, Result};
pub use numeric::QuadratureSpec;
pub use standardize::{scaled_residuals, DataMatrix, StandardizedSample};
pub use statistic::{t_stat, TestOutcome, WeightParam};
