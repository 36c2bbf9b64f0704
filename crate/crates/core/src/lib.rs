//! Kernel regression over singular and mixed regressor distributions.
//!
//! Nadaraya-Watson estimation with product kernels over scalar, ordered,
//! categorical and functional regressors, cross-validated and adaptive
//! bandwidths, small-cube probability diagnostics, inference tools, and a
//! Monte Carlo laboratory.

pub mod bandwidth;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod kernels;
pub mod measure;
pub mod rng;
pub mod simlab;
pub mod spaces;

pub use bandwidth::{BandwidthConfig, BandwidthVector, CvOptions, CvResult, Policy, SearchBox, Selection, Trim};
pub use error::{Error, Result};
pub use estimator::{loo_predict, nw_fit, nw_weights, FitPoint};
pub use kernels::Kernel;
pub use spaces::{Coord, Curve, Dataset, Query, RegressorColumn, RegressorKind};
