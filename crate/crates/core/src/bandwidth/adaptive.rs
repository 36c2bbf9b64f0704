use serde::{Deserialize, Serialize};

use super::cv::{box_for_targets, grid_search, CvOptions, CvResult, Trim};
use super::engine::LooEngine;
use super::BandwidthVector;
use crate::error::{Error, Result};
use crate::estimator::{nw_fit, nw_fit_filtered, FitPoint};
use crate::kernels::Kernel;
use crate::measure::CubeCounter;
use crate::spaces::{Coord, Dataset, Query, RegressorColumn};

/// Per-observation bandwidths `h(X_i) = h̃ (f̂(X_i)/G)^{-α}`, with the
/// pilot `f̂(X_i)` the share of observations in the `h̃` cuboid around
/// `X_i` and `G` its geometric mean. Discrete components keep `h̃`.
pub fn adaptive_bandwidths(
    ds: &Dataset,
    h_tilde: &BandwidthVector,
    kernels: &[Kernel],
    alpha: f64,
) -> Result<Vec<BandwidthVector>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    ds.check_kernels(kernels)?;
    h_tilde.validate(kernels)?;
    let counter = CubeCounter::new(ds);
    let mut log_f = Vec::with_capacity(ds.n());
    for i in 0..ds.n() {
        let c = counter.count(&ds.row_query(i), h_tilde.as_slice())?;
        if c == 0 {
            return Err(Error::ZeroPilotDensity(i));
        }
        log_f.push((c as f64 / ds.n() as f64).ln());
    }
    let log_g = log_f.iter().sum::<f64>() / log_f.len().max(1) as f64;
    Ok(log_f
        .iter()
        .map(|&lf| h_tilde.scaled((-alpha * (lf - log_g)).exp(), kernels))
        .collect())
}

/// Values of a scalar column repeated at least `max(2, min_frac·n)` times.
pub fn detect_mass_points(col: &RegressorColumn, min_frac: f64) -> Result<Vec<f64>> {
    let v = match col {
        RegressorColumn::Scalar(v) => v,
        other => {
            return Err(Error::KindMismatch(format!(
                "mass points need a scalar column, got {:?}",
                other.kind()
            )))
        }
    };
    if !(min_frac > 0.0 && min_frac < 1.0) {
        return Err(Error::InvalidInput(format!("min_frac must lie in (0, 1), got {min_frac}")));
    }
    let mut s = v.clone();
    s.sort_by(f64::total_cmp);
    let threshold = (min_frac * v.len() as f64).max(2.0);
    let mut out = Vec::new();
    let mut start = 0;
    while start < s.len() {
        let mut end = start + 1;
        while end < s.len() && s[end] == s[start] {
            end += 1;
        }
        if (end - start) as f64 >= threshold {
            out.push(s[start]);
        }
        start = end;
    }
    Ok(out)
}

/// Bandwidths from the two-step mass-point procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassPointFit {
    /// Scalar column carrying the mass points.
    pub column: usize,
    pub masspoints: Vec<f64>,
    /// Cross-validated on the observations away from the mass points.
    pub h_continuous: CvResult,
    /// Cross-validated on the mass-point observations only.
    pub h_mass: CvResult,
}

impl MassPointFit {
    fn at_mass(&self, v: f64) -> bool {
        self.masspoints.contains(&v)
    }

    pub fn is_mass_query(&self, x: &Query) -> bool {
        matches!(x.get(self.column), Some(Coord::Scalar(v)) if self.at_mass(*v))
    }

    fn is_mass_obs(&self, ds: &Dataset, i: usize) -> bool {
        match ds.column(self.column) {
            RegressorColumn::Scalar(v) => self.at_mass(v[i]),
            _ => false,
        }
    }

    /// Fit at `x`: mass-point queries use `h_mass` on the full sample,
    /// other queries use `h_continuous` on the non-mass subsample.
    pub fn fit(&self, ds: &Dataset, x: &Query, kernels: &[Kernel]) -> Result<FitPoint> {
        if self.is_mass_query(x) {
            nw_fit(ds, x, &self.h_mass.h_cv, kernels)
        } else {
            nw_fit_filtered(ds, x, &self.h_continuous.h_cv, kernels, |i| !self.is_mass_obs(ds, i))
        }
    }
}

/// Two-step procedure for a scalar regressor with known mass points.
/// Step 1 drops every mass-point observation and cross-validates on the
/// rest; step 2 cross-validates with the criterion summed over mass-point
/// observations only, each predicted from all other observations.
pub fn masspoint_adaptive(
    ds: &Dataset,
    column: usize,
    masspoints: &[f64],
    kernels: &[Kernel],
    opts: &CvOptions,
) -> Result<MassPointFit> {
    masspoint_adaptive_with(ds, column, masspoints, kernels, opts, None)
}

/// As [`masspoint_adaptive`]; `floor_ratio` replaces each continuous
/// lower search bound with that fraction of the upper bound.
pub fn masspoint_adaptive_with(
    ds: &Dataset,
    column: usize,
    masspoints: &[f64],
    kernels: &[Kernel],
    opts: &CvOptions,
    floor_ratio: Option<f64>,
) -> Result<MassPointFit> {
    ds.check_kernels(kernels)?;
    if masspoints.is_empty() {
        return Err(Error::InvalidInput("no mass points given".into()));
    }
    let v = match ds.columns().get(column) {
        Some(RegressorColumn::Scalar(v)) => v,
        Some(other) => {
            return Err(Error::KindMismatch(format!(
                "mass points need a scalar column, got {:?}",
                other.kind()
            )))
        }
        None => {
            return Err(Error::DimensionMismatch {
                expected: ds.q(),
                got: column + 1,
            })
        }
    };
    let (mass, cont): (Vec<usize>, Vec<usize>) = (0..ds.n()).partition(|&i| masspoints.contains(&v[i]));
    if cont.len() < 2 {
        return Err(Error::EmptyStratum(cont.len()));
    }
    if mass.len() < 2 {
        return Err(Error::EmptyStratum(mass.len()));
    }
    let refloor = |b: super::SearchBox| match floor_ratio {
        Some(r) => b.with_relative_floor(kernels, r),
        None => b,
    };

    let sub = ds.subset(&cont);
    let box1 = refloor(box_for_targets(&sub, kernels, None));
    let h_continuous = grid_search(&LooEngine::new(&sub, kernels), None, &box1, opts, &Trim::None)?;

    let box2 = refloor(box_for_targets(ds, kernels, Some(&mass)));
    let h_mass = grid_search(&LooEngine::new(ds, kernels), Some(&mass), &box2, opts, &Trim::None)?;

    Ok(MassPointFit {
        column,
        masspoints: masspoints.to_vec(),
        h_continuous,
        h_mass,
    })
}
