//! Nadaraya-Watson estimation: weights, point fits and leave-one-out
//! predictions.
//!
//! Weights are computed with a full scan over the observations for every
//! query. Bounded kernel support keeps each scan `O(n)`.

use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthVector;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::spaces::{scale, Coord, Dataset, Query, RegressorColumn};

/// Pointwise estimate `m̂(x) = A_n(x) / B_n(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub estimate: f64,
    /// `A_n(x) = n⁻¹ Σ K(W_i(x)) Y_i`
    pub numerator: f64,
    /// `B_n(x) = n⁻¹ Σ K(W_i(x))`
    pub denominator: f64,
    pub neighbors: usize,
    /// Plug-in variance, filled in by [`crate::inference`].
    pub variance: Option<f64>,
}

/// Weight contributed by one component of observation `i`.
#[inline]
pub(crate) fn component_weight(col: &RegressorColumn, kernel: Kernel, h: f64, i: usize, x: &Coord) -> f64 {
    match (col, x) {
        (RegressorColumn::Scalar(v), Coord::Scalar(q)) => kernel.eval(scale((v[i] - q).abs(), h)),
        (RegressorColumn::Ordered(v), Coord::Code(c)) => {
            if kernel.is_discrete() {
                kernel.discrete_weight(h, v[i], *c)
            } else {
                kernel.eval(scale(v[i].abs_diff(*c) as f64, h))
            }
        }
        (RegressorColumn::Categorical(v), Coord::Code(c)) => kernel.discrete_weight(h, v[i], *c),
        (RegressorColumn::Functional(_), Coord::Curve(_)) => {
            let d = col.metric_distance(i, x).unwrap_or(f64::INFINITY);
            kernel.eval(scale(d, h))
        }
        _ => 0.0,
    }
}

/// Product-kernel weight `K(W_i(x))`, stopping at the first zero factor.
#[inline]
pub(crate) fn observation_weight(ds: &Dataset, kernels: &[Kernel], h: &[f64], i: usize, x: &Query) -> f64 {
    let mut w = 1.0;
    for (l, col) in ds.columns().iter().enumerate() {
        w *= component_weight(col, kernels[l], h[l], i, &x[l]);
        if w == 0.0 {
            return 0.0;
        }
    }
    w
}

pub(crate) fn check_inputs(ds: &Dataset, x: &Query, h: &BandwidthVector, kernels: &[Kernel]) -> Result<()> {
    ds.check_kernels(kernels)?;
    ds.check_query(x)?;
    h.validate(kernels)
}

/// Unnormalized weights `K(W_i(x))` for every observation.
pub fn nw_weights(ds: &Dataset, x: &Query, h: &BandwidthVector, kernels: &[Kernel]) -> Result<Vec<f64>> {
    check_inputs(ds, x, h, kernels)?;
    Ok((0..ds.n())
        .map(|i| observation_weight(ds, kernels, h.as_slice(), i, x))
        .collect())
}

fn fit_from_weights(y: &[f64], weights: impl Iterator<Item = (usize, f64)>, n: usize) -> Result<FitPoint> {
    let (mut num, mut den, mut neighbors) = (0.0, 0.0, 0usize);
    for (i, w) in weights {
        if w > 0.0 {
            num += w * y[i];
            den += w;
            neighbors += 1;
        }
    }
    if !(den > 0.0) {
        return Err(Error::NoNeighbor);
    }
    let nf = n as f64;
    // The ratio is formed from the raw sums; the 1/n scaling cancels.
    Ok(FitPoint {
        estimate: num / den,
        numerator: num / nf,
        denominator: den / nf,
        neighbors,
        variance: None,
    })
}

/// Nadaraya-Watson fit at `x`.
pub fn nw_fit(ds: &Dataset, x: &Query, h: &BandwidthVector, kernels: &[Kernel]) -> Result<FitPoint> {
    check_inputs(ds, x, h, kernels)?;
    let hs = h.as_slice();
    fit_from_weights(
        ds.y(),
        (0..ds.n()).map(|i| (i, observation_weight(ds, kernels, hs, i, x))),
        ds.n(),
    )
}

/// Fit with one bandwidth vector per observation (sample-point adaptive
/// smoothing): observation `i` contributes `K((x - X_i) / h(X_i))`.
pub fn nw_fit_per_observation(
    ds: &Dataset,
    x: &Query,
    hs: &[BandwidthVector],
    kernels: &[Kernel],
) -> Result<FitPoint> {
    if hs.len() != ds.n() {
        return Err(Error::DimensionMismatch {
            expected: ds.n(),
            got: hs.len(),
        });
    }
    ds.check_kernels(kernels)?;
    ds.check_query(x)?;
    for h in hs {
        h.validate(kernels)?;
    }
    fit_from_weights(
        ds.y(),
        (0..ds.n()).map(|i| (i, observation_weight(ds, kernels, hs[i].as_slice(), i, x))),
        ds.n(),
    )
}

/// Fit at `x` using only the observations for which `keep(i)` holds.
pub(crate) fn nw_fit_filtered(
    ds: &Dataset,
    x: &Query,
    h: &BandwidthVector,
    kernels: &[Kernel],
    keep: impl Fn(usize) -> bool,
) -> Result<FitPoint> {
    check_inputs(ds, x, h, kernels)?;
    let hs = h.as_slice();
    let n_kept = (0..ds.n()).filter(|&i| keep(i)).count();
    fit_from_weights(
        ds.y(),
        (0..ds.n())
            .filter(|&i| keep(i))
            .map(|i| (i, observation_weight(ds, kernels, hs, i, x))),
        n_kept.max(1),
    )
}

/// Leave-one-out prediction `m̂_{-i}(X_i)`.
pub fn loo_predict(ds: &Dataset, i: usize, h: &BandwidthVector, kernels: &[Kernel]) -> Result<f64> {
    if ds.n() < 2 {
        return Err(Error::InvalidInput("leave-one-out needs at least 2 observations".into()));
    }
    if i >= ds.n() {
        return Err(Error::InvalidInput(format!("observation index {i} out of range")));
    }
    let x = ds.row_query(i);
    nw_fit_filtered(ds, &x, h, kernels, |j| j != i).map(|f| f.estimate)
}
