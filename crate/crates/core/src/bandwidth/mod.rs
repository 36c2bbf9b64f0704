//! Bandwidth vectors and their selection: leave-one-out cross-validation
//! with a multi-start grid search, density-adaptive bandwidths, and the
//! two-step procedure for regressors with mass points.

mod adaptive;
mod cv;
mod engine;
mod policy;

use serde::{Deserialize, Serialize};

pub use adaptive::{adaptive_bandwidths, detect_mass_points, masspoint_adaptive, masspoint_adaptive_with, MassPointFit};
pub use cv::{cv_criterion, cv_search, default_box, CvOptions, CvResult, CvScore, SearchBox, Trim};
pub(crate) use cv::quantile_sorted;
pub use engine::LooEngine;
pub use policy::{select_bandwidth, BandwidthConfig, Policy, Selection, Smoother};

use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// One bandwidth per regressor. `f64::INFINITY` smooths a continuous
/// component out entirely; discrete components hold the kernel's
/// smoothing parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BandwidthVector(Vec<f64>);

impl BandwidthVector {
    pub fn new(h: Vec<f64>) -> Self {
        BandwidthVector(h)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Largest component.
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest component.
    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Multiplies every continuous component by `factor`.
    pub fn scaled(&self, factor: f64, kernels: &[Kernel]) -> BandwidthVector {
        BandwidthVector(
            self.0
                .iter()
                .zip(kernels)
                .map(|(&h, k)| if k.is_discrete() { h } else { h * factor })
                .collect(),
        )
    }

    pub fn validate(&self, kernels: &[Kernel]) -> Result<()> {
        if self.0.len() != kernels.len() {
            return Err(Error::DimensionMismatch {
                expected: kernels.len(),
                got: self.0.len(),
            });
        }
        for (index, (&h, k)) in self.0.iter().zip(kernels).enumerate() {
            match k.discrete_range() {
                Some((low, high)) => {
                    if !(low..=high).contains(&h) {
                        return Err(Error::BandwidthOutOfRange { h, low, high });
                    }
                }
                None => {
                    if !(h > 0.0) {
                        return Err(Error::NonpositiveBandwidth { index, value: h });
                    }
                }
            }
        }
        Ok(())
    }
}

impl From<Vec<f64>> for BandwidthVector {
    fn from(v: Vec<f64>) -> Self {
        BandwidthVector(v)
    }
}
