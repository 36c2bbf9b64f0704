//! Empirical small-cube probabilities and the diagnostics built on them:
//! doubling ratios, local Ahlfors exponents, the one-term moment formula
//! and moment bounds.

mod kdtree;

use serde::{Deserialize, Serialize};

pub use kdtree::KdTree;

use crate::bandwidth::BandwidthVector;
use crate::error::{Error, Result};
use crate::estimator::observation_weight;
use crate::kernels::Kernel;
use crate::spaces::{Coord, Dataset, Query, RegressorColumn};

/// Quadrature nodes per axis for [`moment_oracle`].
pub const ORACLE_NODES: usize = 33;

/// Share of observations inside the cuboid `C(x, h)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeProbe {
    #[serde(skip)]
    pub x: Query,
    pub h: BandwidthVector,
    pub p_hat: f64,
    pub count: usize,
}

/// Counts observations in cuboids around arbitrary points. All-scalar
/// datasets are indexed by a k-d tree; other datasets are scanned.
pub struct CubeCounter<'a> {
    ds: &'a Dataset,
    tree: Option<KdTree>,
}

impl<'a> CubeCounter<'a> {
    pub fn new(ds: &'a Dataset) -> Self {
        let tree = ds.is_all_scalar().then(|| {
            let rows: Vec<Vec<f64>> = (0..ds.n())
                .map(|i| {
                    ds.columns()
                        .iter()
                        .map(|c| match c {
                            RegressorColumn::Scalar(v) => v[i],
                            _ => unreachable!(),
                        })
                        .collect()
                })
                .collect();
            KdTree::build(&rows)
        });
        CubeCounter { ds, tree }
    }

    pub fn dataset(&self) -> &Dataset {
        self.ds
    }

    fn check(&self, x: &Query, h: &[f64]) -> Result<()> {
        self.ds.check_query(x)?;
        if h.len() != self.ds.q() {
            return Err(Error::DimensionMismatch {
                expected: self.ds.q(),
                got: h.len(),
            });
        }
        for (index, &value) in h.iter().enumerate() {
            if !(value > 0.0) {
                return Err(Error::NonpositiveBandwidth { index, value });
            }
        }
        Ok(())
    }

    /// Observations whose every component lies within `h` of `x`.
    pub fn count(&self, x: &Query, h: &[f64]) -> Result<usize> {
        self.check(x, h)?;
        Ok(self.count_unchecked(x, h))
    }

    fn count_unchecked(&self, x: &Query, h: &[f64]) -> usize {
        match &self.tree {
            Some(tree) => {
                let c: Vec<f64> = x.iter().map(|v| v.as_scalar().unwrap_or(f64::NAN)).collect();
                let lo: Vec<f64> = c.iter().zip(h).map(|(a, b)| a - b).collect();
                let hi: Vec<f64> = c.iter().zip(h).map(|(a, b)| a + b).collect();
                tree.count(&lo, &hi)
            }
            None => (0..self.ds.n()).filter(|&i| self.contains(i, x, h)).count(),
        }
    }

    /// Linear-scan membership test for observation `i`.
    pub fn contains(&self, i: usize, x: &Query, h: &[f64]) -> bool {
        self.ds
            .columns()
            .iter()
            .zip(x)
            .zip(h)
            .all(|((col, coord), &hl)| col.metric_distance(i, coord).map_or(false, |d| d <= hl))
    }

    /// Linear-scan count, bypassing the tree.
    pub fn count_scan(&self, x: &Query, h: &[f64]) -> Result<usize> {
        self.check(x, h)?;
        Ok((0..self.ds.n()).filter(|&i| self.contains(i, x, h)).count())
    }

    pub fn probe(&self, x: &Query, h: &BandwidthVector) -> Result<CubeProbe> {
        let count = self.count(x, h.as_slice())?;
        Ok(CubeProbe {
            x: x.clone(),
            h: h.clone(),
            p_hat: count as f64 / self.ds.n() as f64,
            count,
        })
    }
}

/// Empirical probability of the cuboid `C(x, h)`.
pub fn cube_probability(ds: &Dataset, x: &Query, h: &BandwidthVector) -> Result<CubeProbe> {
    CubeCounter::new(ds).probe(x, h)
}

fn scaled(h: &[f64], c: f64) -> Vec<f64> {
    h.iter().map(|v| v * c).collect()
}

/// `p̂(C(x,h)) / p̂(C(x,εh))`, or `None` when the inner cuboid is empty.
pub fn doubling_ratio(ds: &Dataset, x: &Query, h: &BandwidthVector, eps: f64) -> Result<Option<f64>> {
    doubling_ratio_with(&CubeCounter::new(ds), x, h.as_slice(), eps)
}

pub(crate) fn doubling_ratio_with(counter: &CubeCounter<'_>, x: &Query, h: &[f64], eps: f64) -> Result<Option<f64>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("eps must lie in (0, 1), got {eps}")));
    }
    let outer = counter.count(x, h)?;
    let inner = counter.count(x, &scaled(h, eps))?;
    Ok((inner > 0).then(|| outer as f64 / inner as f64))
}

/// Local decay exponent `s(x)` in `P(C(x,h)) ≍ h^{s q}`: the least-squares
/// slope of `log p̂` on `log h̄` over the ladder `c·h`, divided by `q`.
/// Ladder levels with an empty cuboid are dropped.
pub fn ahlfors_exponent(ds: &Dataset, x: &Query, h: &BandwidthVector, ladder: &[f64]) -> Result<f64> {
    let counter = CubeCounter::new(ds);
    let hmax = h.max();
    let mut pts = Vec::new();
    for &c in ladder {
        if !(c > 0.0) {
            return Err(Error::InvalidInput(format!("ladder multipliers must be positive, got {c}")));
        }
        let k = counter.count(x, &scaled(h.as_slice(), c))?;
        if k > 0 {
            pts.push(((c * hmax).ln(), (k as f64 / ds.n() as f64).ln()));
        }
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientLevels(pts.len()));
    }
    let (slope, _) = ols(&pts);
    Ok(slope / ds.q() as f64)
}

/// Ordinary least squares `y = a + b x`; returns `(b, a)`.
pub(crate) fn ols(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (b, my - b * mx)
}

/// Sample mean of a kernel moment with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Direct sample mean of `Π_l k^m(d_l/h_l)` over the observations.
pub fn kernel_moment(ds: &Dataset, kernel: Kernel, x: &Query, h: &BandwidthVector, m: u32) -> Result<MomentEstimate> {
    let kernels = vec![kernel; ds.q()];
    crate::estimator::check_inputs(ds, x, h, &kernels)?;
    let vals: Vec<f64> = (0..ds.n())
        .map(|i| observation_weight(ds, &kernels, h.as_slice(), i, x).powi(m as i32))
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = if vals.len() > 1 {
        vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(MomentEstimate {
        mean,
        stderr: (var / n).sqrt(),
    })
}

fn check_moment_kernel(ds: &Dataset, kernel: Kernel, m: u32) -> Result<()> {
    if kernel.is_discrete() {
        return Err(Error::NotApplicable("moment formulas for a discrete kernel"));
    }
    if ds.q() > 3 {
        return Err(Error::DimensionTooHigh(ds.q()));
    }
    if m == 0 {
        return Err(Error::InvalidInput("moment power must be at least 1".into()));
    }
    Ok(())
}

/// `E[Π k^m(|x_l − X_l|/h_l)]` by the one-term formula
/// `∫_{[0,1]^q} P̂(C(x, h∘v)) Π_l −(k^m)'(v_l) dv`, valid for kernels that
/// vanish at the edge of their support. Trapezoid rule on
/// [`ORACLE_NODES`] nodes per axis.
pub fn moment_oracle(ds: &Dataset, kernel: Kernel, x: &Query, h: &BandwidthVector, m: u32) -> Result<f64> {
    check_moment_kernel(ds, kernel, m)?;
    if kernel.eval(1.0) != 0.0 {
        return Err(Error::KernelNotZeroAtBoundary);
    }
    let counter = CubeCounter::new(ds);
    counter.check(x, h.as_slice())?;
    let q = ds.q();
    let g = ORACLE_NODES;
    let step = 1.0 / (g - 1) as f64;
    let nodes: Vec<f64> = (0..g).map(|k| k as f64 * step).collect();
    let wts: Vec<f64> = (0..g)
        .map(|k| {
            let t = if k == 0 || k + 1 == g { 0.5 * step } else { step };
            t * -kernel.power_derivative(nodes[k], m)
        })
        .collect();
    let n = ds.n() as f64;
    let mut total = 0.0;
    let mut idx = vec![0usize; q];
    let mut hv = vec![0.0; q];
    loop {
        let mut w = 1.0;
        for l in 0..q {
            w *= wts[idx[l]];
            hv[l] = h.as_slice()[l] * nodes[idx[l]];
        }
        // v_l = 0 has zero weight for the shipped kernels and an empty cuboid
        if w != 0.0 && hv.iter().all(|&v| v > 0.0) {
            total += w * counter.count_unchecked(x, &hv) as f64 / n;
        }
        let mut l = 0;
        loop {
            if l == q {
                return Ok(total);
            }
            idx[l] += 1;
            if idx[l] < g {
                break;
            }
            idx[l] = 0;
            l += 1;
        }
    }
}

/// Lower and upper constants times `p̂` bracketing the kernel moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBounds {
    pub lower: f64,
    pub upper: f64,
    pub p_hat: f64,
    /// Empirical doubling ratio at `eps`, when defined.
    pub doubling: Option<f64>,
}

/// Bounds `L ≤ E[K^m] ≤ U`. The upper constant is
/// `2^q Π max(k^m(0) − k^m(1), k^m(1))`; the lower one is the larger of
/// `Π (k^m(ε) − k^m(1)) / C_ε` (with `C_ε` the empirical doubling ratio)
/// and `k(1)^{mq}` for kernels positive on their boundary.
pub fn moment_bounds(
    ds: &Dataset,
    kernel: Kernel,
    x: &Query,
    h: &BandwidthVector,
    m: u32,
    eps: f64,
) -> Result<MomentBounds> {
    check_moment_kernel(ds, kernel, m)?;
    let counter = CubeCounter::new(ds);
    let count = counter.count(x, h.as_slice())?;
    let p_hat = count as f64 / ds.n() as f64;
    let doubling = doubling_ratio_with(&counter, x, h.as_slice(), eps)?;
    let q = ds.q() as i32;
    let mi = m as i32;
    let k0 = kernel.eval(0.0).powi(mi);
    let k1 = kernel.eval(1.0).powi(mi);
    let ke = kernel.eval(eps).powi(mi);
    let upper = 2f64.powi(q) * (k0 - k1).max(k1).powi(q) * p_hat;
    let part_b = doubling.map_or(0.0, |c| (ke - k1).powi(q) / c * p_hat);
    let part_c = k1.powi(q) * p_hat;
    Ok(MomentBounds {
        lower: part_b.max(part_c),
        upper,
        p_hat,
        doubling,
    })
}

/// `n⁻¹ Σ K^s(W_i(x)) / p̂(C(x,h))` with the dataset's product kernel.
pub fn bbar_ratio(ds: &Dataset, x: &Query, h: &BandwidthVector, kernels: &[Kernel], s: u32) -> Result<f64> {
    crate::estimator::check_inputs(ds, x, h, kernels)?;
    let count = CubeCounter::new(ds).count(x, h.as_slice())?;
    if count == 0 {
        return Err(Error::EmptyCuboid);
    }
    let sum: f64 = (0..ds.n())
        .map(|i| observation_weight(ds, kernels, h.as_slice(), i, x).powi(s as i32))
        .sum();
    Ok(sum / count as f64)
}

/// Scalar query helper.
pub fn scalar_query(x: &[f64]) -> Query {
    x.iter().map(|&v| Coord::Scalar(v)).collect()
}
