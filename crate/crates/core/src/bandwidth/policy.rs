//! Bandwidth policies shared by the simulation runner and the command line.

use serde::{Deserialize, Serialize};

use super::{
    adaptive_bandwidths, cv_search, default_box, detect_mass_points, masspoint_adaptive_with, BandwidthVector,
    CvOptions, CvResult, MassPointFit, SearchBox, Trim,
};
use crate::error::{Error, Result};
use crate::estimator::{nw_fit, nw_fit_per_observation, FitPoint};
use crate::kernels::Kernel;
use crate::spaces::{Dataset, Query};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[default]
    Cv,
    Fixed,
    Adaptive,
    MasspointAdaptive,
}

fn default_restarts() -> usize {
    30
}
fn default_grid_points() -> usize {
    30
}
fn default_alpha() -> f64 {
    0.5
}
fn default_min_frac() -> f64 {
    0.01
}
fn default_scale() -> f64 {
    1.0
}

/// Bandwidth choice inside each replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthConfig {
    #[serde(default)]
    pub policy: Policy,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Adaptive sensitivity to the pilot density.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Duplicate share marking a mass point when none are given.
    #[serde(default = "default_min_frac")]
    pub min_frac: f64,
    /// Fixed bandwidth vector.
    #[serde(default)]
    pub h: Option<Vec<f64>>,
    /// When set, continuous search intervals become
    /// `[floor_ratio·high, high]` instead of starting at the largest
    /// nearest-neighbor distance.
    #[serde(default)]
    pub floor_ratio: Option<f64>,
    /// Multiplier applied to selected continuous bandwidths.
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub masspoints: Option<Vec<f64>>,
    /// Scalar column carrying the mass points.
    #[serde(default)]
    pub masspoint_column: usize,
}

impl Default for BandwidthConfig {
    fn default() -> Self {
        BandwidthConfig {
            policy: Policy::Cv,
            restarts: default_restarts(),
            grid_points: default_grid_points(),
            alpha: default_alpha(),
            min_frac: default_min_frac(),
            h: None,
            floor_ratio: None,
            scale: default_scale(),
            masspoints: None,
            masspoint_column: 0,
        }
    }
}

impl BandwidthConfig {
    pub fn cv_options(&self, seed: u64) -> CvOptions {
        CvOptions {
            grid_points: self.grid_points,
            restarts: self.restarts,
            seed,
        }
    }

    /// Default box, with the relative floor applied when configured.
    pub fn search_box(&self, ds: &Dataset, kernels: &[Kernel]) -> SearchBox {
        let b = default_box(ds, kernels);
        match self.floor_ratio {
            Some(r) => b.with_relative_floor(kernels, r),
            None => b,
        }
    }
}


/// Smoother produced by a bandwidth policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Smoother {
    Global { h: BandwidthVector },
    PerObservation { pilot: BandwidthVector, h: Vec<BandwidthVector> },
    MassPoint { fit: Box<MassPointFit> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub smoother: Smoother,
    /// Cross-validation outcome (the continuous step under the mass-point
    /// policy).
    pub cv: Option<CvResult>,
}

impl Selection {
    /// Global bandwidth, the adaptive pilot, or the bandwidth away from
    /// the mass points.
    pub fn h(&self) -> &BandwidthVector {
        match &self.smoother {
            Smoother::Global { h } => h,
            Smoother::PerObservation { pilot, .. } => pilot,
            Smoother::MassPoint { fit } => &fit.h_continuous.h_cv,
        }
    }

    pub fn h_mass(&self) -> Option<&BandwidthVector> {
        match &self.smoother {
            Smoother::MassPoint { fit } => Some(&fit.h_mass.h_cv),
            _ => None,
        }
    }

    /// The single bandwidth used at every query, when there is one.
    pub fn global(&self) -> Option<&BandwidthVector> {
        match &self.smoother {
            Smoother::Global { h } => Some(h),
            _ => None,
        }
    }

    pub fn fit(&self, ds: &Dataset, x: &Query, kernels: &[Kernel]) -> Result<FitPoint> {
        match &self.smoother {
            Smoother::Global { h } => nw_fit(ds, x, h, kernels),
            Smoother::PerObservation { h, .. } => nw_fit_per_observation(ds, x, h, kernels),
            Smoother::MassPoint { fit } => fit.fit(ds, x, kernels),
        }
    }
}

/// Applies `policy` to `ds`. Under the mass-point policy the atoms come from
/// the config, then from `known`, then from detection on the configured
/// column.
pub fn select_bandwidth(
    policy: &BandwidthConfig,
    ds: &Dataset,
    kernels: &[Kernel],
    seed: u64,
    known: Option<(usize, Vec<f64>)>,
) -> Result<Selection> {
    ds.check_kernels(kernels)?;
    let opts = policy.cv_options(seed);
    let scale = |h: &BandwidthVector| h.scaled(policy.scale, kernels);
    match policy.policy {
        Policy::Fixed => {
            let h = BandwidthVector::new(
                policy
                    .h
                    .clone()
                    .ok_or_else(|| Error::InvalidInput("fixed policy needs a bandwidth vector".into()))?,
            );
            h.validate(kernels)?;
            Ok(Selection {
                smoother: Smoother::Global { h },
                cv: None,
            })
        }
        Policy::Cv => {
            let r = cv_search(ds, kernels, &policy.search_box(ds, kernels), &opts, &Trim::None)?;
            Ok(Selection {
                smoother: Smoother::Global { h: scale(&r.h_cv) },
                cv: Some(r),
            })
        }
        Policy::Adaptive => {
            let r = cv_search(ds, kernels, &policy.search_box(ds, kernels), &opts, &Trim::None)?;
            let pilot = scale(&r.h_cv);
            let h = adaptive_bandwidths(ds, &pilot, kernels, policy.alpha)?;
            Ok(Selection {
                smoother: Smoother::PerObservation { pilot, h },
                cv: Some(r),
            })
        }
        Policy::MasspointAdaptive => {
            let (column, atoms) = match (&policy.masspoints, known) {
                (Some(m), _) => (policy.masspoint_column, m.clone()),
                (None, Some(k)) => k,
                (None, None) => {
                    if policy.masspoint_column >= ds.q() {
                        return Err(Error::DimensionMismatch {
                            expected: ds.q(),
                            got: policy.masspoint_column + 1,
                        });
                    }
                    let c = policy.masspoint_column;
                    (c, detect_mass_points(ds.column(c), policy.min_frac)?)
                }
            };
            let mut fit = masspoint_adaptive_with(ds, column, &atoms, kernels, &opts, policy.floor_ratio)?;
            fit.h_continuous.h_cv = scale(&fit.h_continuous.h_cv);
            fit.h_mass.h_cv = scale(&fit.h_mass.h_cv);
            Ok(Selection {
                cv: Some(fit.h_continuous.clone()),
                smoother: Smoother::MassPoint { fit: Box::new(fit) },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Dataset {
        let x: Vec<f64> = (0..40).map(|i| if i % 4 == 0 { 0.0 } else { i as f64 / 40.0 }).collect();
        let y = x.iter().map(|v| v * v).collect();
        Dataset::from_scalar_rows(y, &x.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn fixed_needs_vector() {
        let ds = data();
        let k = [Kernel::Epanechnikov];
        let mut p = BandwidthConfig {
            policy: Policy::Fixed,
            ..BandwidthConfig::default()
        };
        assert!(select_bandwidth(&p, &ds, &k, 0, None).is_err());
        p.h = Some(vec![0.2]);
        let s = select_bandwidth(&p, &ds, &k, 0, None).unwrap();
        assert_eq!(s.global().unwrap().as_slice(), &[0.2]);
    }

    #[test]
    fn masspoints_detected() {
        let ds = data();
        let p = BandwidthConfig {
            policy: Policy::MasspointAdaptive,
            restarts: 1,
            grid_points: 8,
            ..BandwidthConfig::default()
        };
        let s = select_bandwidth(&p, &ds, &[Kernel::Epanechnikov], 0, None).unwrap();
        match &s.smoother {
            Smoother::MassPoint { fit } => assert_eq!(fit.masspoints, vec![0.0]),
            other => panic!("{other:?}"),
        }
        assert!(s.h_mass().is_some());
    }

    #[test]
    fn scale_leaves_discrete_alone() {
        let p = BandwidthConfig {
            scale: 0.5,
            restarts: 1,
            grid_points: 6,
            ..BandwidthConfig::default()
        };
        let ds = data();
        let s = select_bandwidth(&p, &ds, &[Kernel::Epanechnikov], 3, None).unwrap();
        assert!((s.h().as_slice()[0] - 0.5 * s.cv.unwrap().h_cv.as_slice()[0]).abs() < 1e-15);
    }
}
