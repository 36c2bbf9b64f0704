//! Leave-one-out sums for many bandwidth candidates over one dataset.
//!
//! Pairs are enumerated once per candidate. When some scalar regressor has
//! a finite bandwidth, observations are visited in sorted order of that
//! regressor and the inner loop stops at the edge of the kernel window.
//! Functional regressors get their pairwise semi-metric matrix cached up
//! front.

use crate::kernels::Kernel;
use crate::spaces::{scale, Dataset, RegressorColumn};

/// Above this size the functional distance cache is skipped (memory bound).
const FUNCTIONAL_CACHE_MAX_N: usize = 4096;

/// Leave-one-out numerator and denominator sums per observation.
#[derive(Debug, Clone)]
pub struct LooSums {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

pub struct LooEngine<'a> {
    ds: &'a Dataset,
    kernels: &'a [Kernel],
    /// For each scalar column with a continuous kernel: observation indices
    /// sorted by value, and the sorted values.
    sorted: Vec<Option<(Vec<usize>, Vec<f64>)>>,
    ranges: Vec<f64>,
    functional: Vec<Option<Vec<f64>>>,
}

impl<'a> LooEngine<'a> {
    pub fn new(ds: &'a Dataset, kernels: &'a [Kernel]) -> Self {
        let n = ds.n();
        let mut sorted = Vec::with_capacity(ds.q());
        let mut ranges = Vec::with_capacity(ds.q());
        let mut functional = Vec::with_capacity(ds.q());
        for (col, k) in ds.columns().iter().zip(kernels) {
            match col {
                RegressorColumn::Scalar(v) if !k.is_discrete() => {
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
                    let vals: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
                    let range = vals.last().copied().unwrap_or(0.0) - vals.first().copied().unwrap_or(0.0);
                    ranges.push(range);
                    sorted.push(Some((idx, vals)));
                }
                _ => {
                    sorted.push(None);
                    ranges.push(f64::INFINITY);
                }
            }
            functional.push(match col {
                RegressorColumn::Functional(_) if n <= FUNCTIONAL_CACHE_MAX_N => {
                    let mut m = vec![0.0; n * n];
                    for i in 0..n {
                        for j in i + 1..n {
                            let d = col.pair_distance(i, j);
                            m[i * n + j] = d;
                            m[j * n + i] = d;
                        }
                    }
                    Some(m)
                }
                _ => None,
            });
        }
        LooEngine {
            ds,
            kernels,
            sorted,
            ranges,
            functional,
        }
    }

    pub fn dataset(&self) -> &Dataset {
        self.ds
    }

    pub fn kernels(&self) -> &[Kernel] {
        self.kernels
    }

    /// Symmetric product-kernel weight between observations `i` and `j`.
    #[inline]
    pub fn pair_weight(&self, h: &[f64], i: usize, j: usize) -> f64 {
        let n = self.ds.n();
        let mut w = 1.0;
        for (l, col) in self.ds.columns().iter().enumerate() {
            let k = self.kernels[l];
            let hl = h[l];
            let c = match col {
                RegressorColumn::Scalar(v) => k.eval(scale((v[i] - v[j]).abs(), hl)),
                RegressorColumn::Ordered(v) => {
                    if k.is_discrete() {
                        k.discrete_weight(hl, v[i], v[j])
                    } else {
                        k.eval(scale(v[i].abs_diff(v[j]) as f64, hl))
                    }
                }
                RegressorColumn::Categorical(v) => k.discrete_weight(hl, v[i], v[j]),
                RegressorColumn::Functional(f) => {
                    let d = match &self.functional[l] {
                        Some(m) => m[i * n + j],
                        None => f.pair_distance(i, j),
                    };
                    k.eval(scale(d, hl))
                }
            };
            w *= c;
            if w == 0.0 {
                return 0.0;
            }
        }
        w
    }

    /// Scalar column whose kernel window is narrowest relative to its range.
    fn pruning_column(&self, h: &[f64]) -> Option<usize> {
        (0..self.ds.q())
            .filter(|&l| self.sorted[l].is_some() && h[l].is_finite())
            .min_by(|&a, &b| (h[a] / self.ranges[a]).total_cmp(&(h[b] / self.ranges[b])))
    }

    /// Leave-one-out sums for every observation.
    pub fn sums(&self, h: &[f64]) -> LooSums {
        let n = self.ds.n();
        let y = self.ds.y();
        let mut num = vec![0.0; n];
        let mut den = vec![0.0; n];
        let mut add = |i: usize, j: usize, w: f64| {
            num[i] += w * y[j];
            den[i] += w;
            num[j] += w * y[i];
            den[j] += w;
        };
        match self.pruning_column(h) {
            Some(c) => {
                let (idx, vals) = self.sorted[c].as_ref().expect("pruning column is sorted");
                let hc = h[c];
                for p in 0..n {
                    let i = idx[p];
                    for qq in p + 1..n {
                        if vals[qq] - vals[p] > hc {
                            break;
                        }
                        let j = idx[qq];
                        let w = self.pair_weight(h, i, j);
                        if w > 0.0 {
                            add(i, j, w);
                        }
                    }
                }
            }
            None => {
                for i in 0..n {
                    for j in i + 1..n {
                        let w = self.pair_weight(h, i, j);
                        if w > 0.0 {
                            add(i, j, w);
                        }
                    }
                }
            }
        }
        LooSums { num, den }
    }

    /// Leave-one-out sums for the listed targets only; every other
    /// observation may act as a neighbor.
    pub fn sums_for(&self, h: &[f64], targets: &[usize]) -> LooSums {
        let n = self.ds.n();
        let y = self.ds.y();
        let mut num = vec![0.0; n];
        let mut den = vec![0.0; n];
        let pruning = self.pruning_column(h);
        for &i in targets {
            let (mut a, mut b) = (0.0, 0.0);
            let mut visit = |j: usize| {
                if j != i {
                    let w = self.pair_weight(h, i, j);
                    if w > 0.0 {
                        a += w * y[j];
                        b += w;
                    }
                }
            };
            match pruning {
                Some(c) => {
                    let (idx, vals) = self.sorted[c].as_ref().expect("pruning column is sorted");
                    let xi = match self.ds.column(c) {
                        RegressorColumn::Scalar(v) => v[i],
                        _ => unreachable!(),
                    };
                    let lo = vals.partition_point(|&v| v < xi - h[c]);
                    for p in lo..n {
                        if vals[p] - xi > h[c] {
                            break;
                        }
                        visit(idx[p]);
                    }
                }
                None => (0..n).for_each(&mut visit),
            }
            num[i] = a;
            den[i] = b;
        }
        LooSums { num, den }
    }
}
