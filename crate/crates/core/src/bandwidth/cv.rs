use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::engine::{LooEngine, LooSums};
use super::BandwidthVector;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::rng::stream_seed;
use crate::spaces::{Dataset, RegressorColumn};

/// Observation weights `M(X_i)` in the CV criterion.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Trim {
    #[default]
    None,
    Weights(Vec<f64>),
}

impl Trim {
    /// Zero weight for observations whose scalar regressors fall in the
    /// outer `frac` quantile range (split evenly between both tails).
    pub fn boundary(ds: &Dataset, frac: f64) -> Trim {
        let mut keep = vec![1.0; ds.n()];
        for col in ds.columns() {
            if let RegressorColumn::Scalar(v) = col {
                let mut s = v.clone();
                s.sort_by(f64::total_cmp);
                let lo = quantile_sorted(&s, frac / 2.0);
                let hi = quantile_sorted(&s, 1.0 - frac / 2.0);
                for (k, &x) in keep.iter_mut().zip(v) {
                    if x < lo || x > hi {
                        *k = 0.0;
                    }
                }
            }
        }
        Trim::Weights(keep)
    }

    #[inline]
    fn weight(&self, i: usize) -> f64 {
        match self {
            Trim::None => 1.0,
            Trim::Weights(w) => w[i],
        }
    }
}

pub(crate) fn quantile_sorted(s: &[f64], p: f64) -> f64 {
    if s.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// CV value at one bandwidth, with the number of observations that had
/// no neighbor and were left out of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub value: f64,
    pub skipped: usize,
}

fn score(y: &[f64], sums: &LooSums, targets: Option<&[usize]>, trim: &Trim) -> Result<CvScore> {
    let mut acc = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    let mut visit = |i: usize| {
        let den = sums.den[i];
        if den > 0.0 {
            let e = y[i] - sums.num[i] / den;
            acc += e * e * trim.weight(i);
            used += 1;
        } else {
            skipped += 1;
        }
    };
    match targets {
        Some(t) => t.iter().copied().for_each(&mut visit),
        None => (0..y.len()).for_each(&mut visit),
    }
    if used == 0 {
        return Err(Error::AllSkipped);
    }
    Ok(CvScore {
        value: acc / used as f64,
        skipped,
    })
}

/// Leave-one-out CV criterion `n⁻¹ Σ (Y_i − m̂_{−i}(X_i))² M(X_i)`.
/// Observations without a neighbor are dropped from the mean and counted.
pub fn cv_criterion(ds: &Dataset, h: &BandwidthVector, kernels: &[Kernel], trim: &Trim) -> Result<CvScore> {
    if ds.n() < 2 {
        return Err(Error::InvalidInput("cross-validation needs at least 2 observations".into()));
    }
    ds.check_kernels(kernels)?;
    h.validate(kernels)?;
    let engine = LooEngine::new(ds, kernels);
    score(ds.y(), &engine.sums(h.as_slice()), None, trim)
}

/// Per-component search interval `[low, high]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchBox(pub Vec<(f64, f64)>);

impl SearchBox {
    /// Replaces each continuous lower end with `ratio` times its upper end.
    pub fn with_relative_floor(mut self, kernels: &[Kernel], ratio: f64) -> SearchBox {
        for (b, k) in self.0.iter_mut().zip(kernels) {
            if !k.is_discrete() {
                b.0 = b.1 * ratio;
            }
        }
        self
    }

    pub fn contains(&self, h: &BandwidthVector) -> bool {
        self.0.len() == h.len()
            && self
                .0
                .iter()
                .zip(h.as_slice())
                .all(|(&(lo, hi), &v)| v >= lo && v <= hi)
    }
}

/// Bounds from the data: the lower end is the largest nearest-neighbor
/// distance, so each observation keeps at least one neighbor; the upper end
/// is half the largest pairwise distance. An inverted box becomes
/// `[low, 2 low]`. Discrete components span the kernel's admissible range.
pub fn default_box(ds: &Dataset, kernels: &[Kernel]) -> SearchBox {
    box_for_targets(ds, kernels, None)
}

/// As [`default_box`], with the nearest-neighbor floor taken over `targets`
/// only (their neighbors may be any other observation).
pub(crate) fn box_for_targets(ds: &Dataset, kernels: &[Kernel], targets: Option<&[usize]>) -> SearchBox {
    let n = ds.n();
    let all: Vec<usize>;
    let targets = match targets {
        Some(t) => t,
        None => {
            all = (0..n).collect();
            &all
        }
    };
    let mut out = Vec::with_capacity(ds.q());
    for (col, k) in ds.columns().iter().zip(kernels) {
        if let Some(range) = k.discrete_range() {
            out.push(range);
            continue;
        }
        let (nn_max, max_d) = match col {
            RegressorColumn::Scalar(v) => {
                let mut s = v.clone();
                s.sort_by(f64::total_cmp);
                let mut nn_max: f64 = 0.0;
                for &i in targets {
                    let xi = v[i];
                    let lo = s.partition_point(|&a| a < xi);
                    let hi = s.partition_point(|&a| a <= xi);
                    let nn = if hi - lo > 1 {
                        0.0
                    } else {
                        let left = if lo > 0 { xi - s[lo - 1] } else { f64::INFINITY };
                        let right = if hi < n { s[hi] - xi } else { f64::INFINITY };
                        left.min(right)
                    };
                    if nn.is_finite() {
                        nn_max = nn_max.max(nn);
                    }
                }
                (nn_max, s.last().copied().unwrap_or(0.0) - s.first().copied().unwrap_or(0.0))
            }
            _ => {
                let mut max_d: f64 = 0.0;
                for i in 0..n {
                    for j in i + 1..n {
                        max_d = max_d.max(col.pair_distance(i, j));
                    }
                }
                let mut nn_max: f64 = 0.0;
                for &i in targets {
                    let nn = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| col.pair_distance(i, j))
                        .fold(f64::INFINITY, f64::min);
                    if nn.is_finite() {
                        nn_max = nn_max.max(nn);
                    }
                }
                (nn_max, max_d)
            }
        };
        let low = if nn_max > 0.0 { nn_max } else { f64::EPSILON };
        let high = 0.5 * max_d;
        out.push(if low > high { (low, 2.0 * low) } else { (low, high) });
    }
    SearchBox(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub grid_points: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            grid_points: 30,
            restarts: 30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub h_cv: BandwidthVector,
    pub cv_value: f64,
    pub restarts_used: usize,
    pub skipped: usize,
    pub evaluations: usize,
}

/// Candidate values along one component. Continuous components use a
/// log-spaced grid whose lower end is kept within three decades of the
/// upper end; discrete components use an evenly spaced grid.
fn component_grid(kernel: Kernel, (low, high): (f64, f64), points: usize) -> Vec<f64> {
    let points = points.max(2);
    if kernel.is_discrete() {
        return (0..points)
            .map(|k| low + (high - low) * k as f64 / (points - 1) as f64)
            .collect();
    }
    let lo = low.max(high * 1e-3);
    if !(high > lo) {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), high.ln());
    (0..points)
        .map(|k| {
            if k + 1 == points {
                high
            } else {
                (a + (b - a) * k as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

/// Multi-start coordinate descent over the tensor grid. Each coordinate
/// step scans the full grid line and moves to its minimum; restarts begin
/// at random grid nodes drawn from `(seed, restart)`.
pub(crate) fn grid_search(
    engine: &LooEngine<'_>,
    targets: Option<&[usize]>,
    search_box: &SearchBox,
    opts: &CvOptions,
    trim: &Trim,
) -> Result<CvResult> {
    let kernels = engine.kernels();
    let q = kernels.len();
    if search_box.0.len() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: search_box.0.len(),
        });
    }
    if opts.grid_points < 2 {
        return Err(Error::InvalidInput("grid_points must be at least 2".into()));
    }
    for &(lo, hi) in &search_box.0 {
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::InvalidInput(format!("invalid search interval [{lo}, {hi}]")));
        }
    }
    let grids: Vec<Vec<f64>> = kernels
        .iter()
        .zip(&search_box.0)
        .map(|(&k, &b)| component_grid(k, b, opts.grid_points))
        .collect();
    let y = engine.dataset().y();

    let mut memo: HashMap<Vec<usize>, (f64, usize)> = HashMap::new();
    let mut eval = |idx: &[usize]| -> (f64, usize) {
        if let Some(&v) = memo.get(idx) {
            return v;
        }
        let h: Vec<f64> = idx.iter().zip(&grids).map(|(&k, g)| g[k]).collect();
        let sums = match targets {
            Some(t) => engine.sums_for(&h, t),
            None => engine.sums(&h),
        };
        let v = match score(y, &sums, targets, trim) {
            Ok(s) => (s.value, s.skipped),
            Err(_) => (f64::INFINITY, targets.map_or(y.len(), <[usize]>::len)),
        };
        memo.insert(idx.to_vec(), v);
        v
    };

    let restarts = opts.restarts.max(1);
    let mut best: Option<(Vec<usize>, f64, usize)> = None;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(opts.seed, &[r as u64]));
        let mut cur: Vec<usize> = grids.iter().map(|g| rng.gen_range(0..g.len())).collect();
        let (mut cur_val, mut cur_skip) = eval(&cur);
        for _sweep in 0..100 {
            let mut moved = false;
            for l in 0..q {
                let mut probe = cur.clone();
                for k in 0..grids[l].len() {
                    probe[l] = k;
                    let (v, s) = eval(&probe);
                    if v < cur_val {
                        cur_val = v;
                        cur_skip = s;
                        cur[l] = k;
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
        }
        let better = match &best {
            None => true,
            Some((_, bv, _)) => cur_val < *bv,
        };
        if better {
            best = Some((cur, cur_val, cur_skip));
        }
    }
    let (idx, value, skipped) = best.expect("at least one restart");
    if !value.is_finite() {
        return Err(Error::AllSkipped);
    }
    Ok(CvResult {
        h_cv: BandwidthVector::new(idx.iter().zip(&grids).map(|(&k, g)| g[k]).collect()),
        cv_value: value,
        restarts_used: restarts,
        skipped,
        evaluations: memo.len(),
    })
}

/// Cross-validated bandwidth over `search_box`.
pub fn cv_search(
    ds: &Dataset,
    kernels: &[Kernel],
    search_box: &SearchBox,
    opts: &CvOptions,
    trim: &Trim,
) -> Result<CvResult> {
    if ds.n() < 2 {
        return Err(Error::InvalidInput("cross-validation needs at least 2 observations".into()));
    }
    ds.check_kernels(kernels)?;
    let engine = LooEngine::new(ds, kernels);
    grid_search(&engine, None, search_box, opts, trim)
}
