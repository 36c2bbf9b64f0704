//! Monte Carlo runner: replications over a sample-size grid, bandwidth
//! selection per policy, and aggregate tables.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{sigma_from_sd, Dgp, Sample};
use crate::bandwidth::{select_bandwidth, BandwidthConfig, BandwidthVector, LooEngine, Policy};
use crate::error::{Error, Result};
use crate::inference::{empirical_rate, mean_sd};
use crate::rng::{stream, stream_seed};
use crate::spaces::{Coord, Dataset, Query, RegressorColumn};

fn default_snr() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dgp: Dgp,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    #[serde(default = "default_snr")]
    pub snr: f64,
    #[serde(default)]
    pub bandwidth: BandwidthConfig,
    /// Numeric query points; codes are written as numbers.
    #[serde(default)]
    pub eval_points: Vec<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    /// Size of a fixed out-of-sample point set, drawn once and shared by all replications.
    #[serde(default)]
    pub out_of_sample: usize,
    /// Also compute full-sample in-sample fits (quadratic in `n`).
    #[serde(default)]
    pub in_sample: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be at least 1".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("n_grid must be non-empty and strictly ascending".into()));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::InvalidInput("sample sizes must be at least 2".into()));
        }
        if !(self.snr > 0.0) {
            return Err(Error::InvalidInput(format!("snr must be positive, got {}", self.snr)));
        }
        let q = self.dgp.kernels().len();
        if self.bandwidth.policy == Policy::Fixed {
            match &self.bandwidth.h {
                Some(h) => BandwidthVector::new(h.clone()).validate(&self.dgp.kernels())?,
                None => return Err(Error::InvalidInput("fixed policy needs bandwidth.h".into())),
            }
        }
        if self.bandwidth.policy == Policy::MasspointAdaptive && q != 1 && self.bandwidth.masspoints.is_none() {
            // detection works on the first column; other designs must be explicit
            if self.dgp.mass_points().is_none() {
                return Err(Error::InvalidInput("masspoint_adaptive needs a scalar design with mass points".into()));
            }
        }
        for p in &self.eval_points {
            self.dgp.mean_at(p)?;
        }
        Ok(())
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub n: usize,
    pub rep: usize,
    /// Selected (or fixed) bandwidth; for the mass-point policy, the
    /// bandwidth away from the atoms.
    pub h: Vec<f64>,
    /// Bandwidth at the atoms under the mass-point policy.
    pub h_mass: Option<Vec<f64>>,
    pub cv_value: Option<f64>,
    pub cv_skipped: Option<usize>,
    pub estimates: Vec<Option<f64>>,
    pub loo_mae: Option<f64>,
    pub loo_rmse: Option<f64>,
    /// Leave-one-out fit against the true mean.
    pub loo_rmse_m: Option<f64>,
    pub insample_rmse: Option<f64>,
    pub oos_rmse: Option<f64>,
    pub oos_no_neighbor: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub n: usize,
    pub point: String,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    /// Population standard deviation across replications.
    pub sd: f64,
    pub rmse: f64,
    pub count: usize,
    pub no_neighbor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub point: String,
    pub slope: f64,
    pub intercept: f64,
    pub sizes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthRow {
    pub n: usize,
    pub component: String,
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub n: usize,
    pub reps: usize,
    pub failures: usize,
    pub cv_mean: f64,
    pub cv_skipped_mean: f64,
    pub loo_mae: f64,
    pub loo_rmse: f64,
    pub loo_rmse_m: f64,
    pub insample_rmse: f64,
    pub oos_rmse: f64,
    pub oos_no_neighbor_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub sigma: f64,
    pub records: Vec<RepRecord>,
    pub pointwise: Vec<PointRow>,
    pub rates: Vec<RateRow>,
    pub bandwidths: Vec<BandwidthRow>,
    pub aggregate: Vec<AggregateRow>,
}

pub fn point_label(p: &[f64]) -> String {
    p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// Query for a numeric point against the columns of `ds`.
pub fn numeric_query(ds: &Dataset, p: &[f64]) -> Result<Query> {
    if p.len() != ds.q() {
        return Err(Error::DimensionMismatch {
            expected: ds.q(),
            got: p.len(),
        });
    }
    ds.columns()
        .iter()
        .zip(p)
        .map(|(c, &v)| match c {
            RegressorColumn::Scalar(_) => Ok(Coord::Scalar(v)),
            RegressorColumn::Ordered(_) | RegressorColumn::Categorical(_) => {
                if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                    Ok(Coord::Code(v as u32))
                } else {
                    Err(Error::InvalidInput(format!("code coordinate must be a non-negative integer, got {v}")))
                }
            }
            RegressorColumn::Functional(_) => Err(Error::NotApplicable("numeric coordinate for a functional column")),
        })
        .collect()
}

fn rms(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| (v.iter().map(|e| e * e).sum::<f64>() / v.len() as f64).sqrt())
}

fn run_rep(cfg: &ExperimentConfig, sigma: f64, n: usize, rep: usize) -> RepRecord {
    let kernels = cfg.dgp.kernels();
    let mut record = RepRecord {
        n,
        rep,
        h: Vec::new(),
        h_mass: None,
        cv_value: None,
        cv_skipped: None,
        estimates: vec![None; cfg.eval_points.len()],
        loo_mae: None,
        loo_rmse: None,
        loo_rmse_m: None,
        insample_rmse: None,
        oos_rmse: None,
        oos_no_neighbor: 0,
        error: None,
    };
    let keys = [n as u64, rep as u64];
    let Sample { ds, m, .. } = cfg.dgp.sample(n, sigma, &mut stream(cfg.seed, &keys));
    let seed = stream_seed(cfg.seed, &[n as u64, rep as u64, 2]);
    let sel = match select_bandwidth(&cfg.bandwidth, &ds, &kernels, seed, cfg.dgp.mass_points()) {
        Ok(s) => s,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.h = sel.h().as_slice().to_vec();
    record.h_mass = sel.h_mass().map(|h| h.as_slice().to_vec());
    if let Some(cv) = &sel.cv {
        record.cv_value = Some(cv.cv_value);
        record.cv_skipped = Some(cv.skipped);
    }
    for (slot, p) in record.estimates.iter_mut().zip(&cfg.eval_points) {
        *slot = numeric_query(&ds, p).and_then(|x| sel.fit(&ds, &x, &kernels)).ok().map(|f| f.estimate);
    }
    if let Some(h) = sel.global() {
        let sums = LooEngine::new(&ds, &kernels).sums(h.as_slice());
        let (mut abs, mut err_y, mut err_m) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..n {
            if sums.den[i] > 0.0 {
                let f = sums.num[i] / sums.den[i];
                abs.push((ds.y()[i] - f).abs());
                err_y.push(ds.y()[i] - f);
                err_m.push(m[i] - f);
            }
        }
        if !abs.is_empty() {
            record.loo_mae = Some(abs.iter().sum::<f64>() / abs.len() as f64);
        }
        record.loo_rmse = rms(&err_y);
        record.loo_rmse_m = rms(&err_m);
    }
    if cfg.in_sample {
        let errs: Vec<f64> = (0..n)
            .filter_map(|i| sel.fit(&ds, &ds.row_query(i), &kernels).ok().map(|f| m[i] - f.estimate))
            .collect();
        record.insample_rmse = rms(&errs);
    }
    if cfg.out_of_sample > 0 {
        // one set of evaluation points shared by every replication
        let test = cfg.dgp.draw(cfg.out_of_sample, &mut stream(cfg.seed, &[u64::MAX, 1]));
        let test_ds = Dataset::with_names(test.m.clone(), test.columns, test.names).expect("generated columns agree");
        let mut errs = Vec::new();
        for i in 0..test_ds.n() {
            match sel.fit(&ds, &test_ds.row_query(i), &kernels) {
                Ok(f) => errs.push(test.m[i] - f.estimate),
                Err(_) => record.oos_no_neighbor += 1,
            }
        }
        record.oos_rmse = rms(&errs);
    }
    record
}

fn mean_of(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn rms_of(v: impl Iterator<Item = f64>) -> f64 {
    mean_of(v.map(|e| e * e)).sqrt()
}

/// Runs every `(n, replication)` pair; per-replication failures are
/// recorded, never fatal. Output is identical for any worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let sigma = sigma_from_sd(cfg.dgp.signal_sd(), cfg.snr)?;
    let tasks: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.reps).map(move |r| (n, r)))
        .collect();
    let records: Vec<RepRecord> = tasks.par_iter().map(|&(n, r)| run_rep(cfg, sigma, n, r)).collect();
    Ok(summarize(cfg.clone(), sigma, records))
}

/// Aggregates replication records into the output tables.
pub fn summarize(config: ExperimentConfig, sigma: f64, records: Vec<RepRecord>) -> ExperimentResult {
    let mut pointwise = Vec::new();
    let mut bandwidths = Vec::new();
    let mut aggregate = Vec::new();
    let q = config.dgp.kernels().len();
    for &n in &config.n_grid {
        let recs: Vec<&RepRecord> = records.iter().filter(|r| r.n == n).collect();
        for (k, p) in config.eval_points.iter().enumerate() {
            let truth = config.dgp.mean_at(p).unwrap_or(f64::NAN);
            let errs: Vec<f64> = recs.iter().filter_map(|r| r.estimates[k]).map(|e| e - truth).collect();
            let cnt = errs.len();
            let bias = mean_of(errs.iter().copied());
            let sd = mean_of(errs.iter().map(|e| (e - bias) * (e - bias))).sqrt();
            pointwise.push(PointRow {
                n,
                point: point_label(p),
                truth,
                mean_estimate: truth + bias,
                bias,
                sd,
                rmse: rms_of(errs.iter().copied()),
                count: cnt,
                no_neighbor: recs.iter().filter(|r| r.error.is_none() && r.estimates[k].is_none()).count(),
            });
        }
        let ok: Vec<&&RepRecord> = recs.iter().filter(|r| r.error.is_none()).collect();
        for l in 0..q {
            let hs: Vec<f64> = ok.iter().filter_map(|r| r.h.get(l).copied()).collect();
            let (mean, sd) = mean_sd(&hs);
            bandwidths.push(BandwidthRow {
                n,
                component: format!("h{}", l + 1),
                mean,
                sd,
                count: hs.len(),
            });
            let hm: Vec<f64> = ok
                .iter()
                .filter_map(|r| r.h_mass.as_ref().and_then(|v| v.get(l).copied()))
                .collect();
            if !hm.is_empty() {
                let (mean, sd) = mean_sd(&hm);
                bandwidths.push(BandwidthRow {
                    n,
                    component: format!("h{}_mass", l + 1),
                    mean,
                    sd,
                    count: hm.len(),
                });
            }
        }
        aggregate.push(AggregateRow {
            n,
            reps: recs.len(),
            failures: recs.len() - ok.len(),
            cv_mean: mean_of(ok.iter().filter_map(|r| r.cv_value)),
            cv_skipped_mean: mean_of(ok.iter().filter_map(|r| r.cv_skipped.map(|s| s as f64))),
            loo_mae: mean_of(ok.iter().filter_map(|r| r.loo_mae)),
            loo_rmse: rms_of(ok.iter().filter_map(|r| r.loo_rmse)),
            loo_rmse_m: rms_of(ok.iter().filter_map(|r| r.loo_rmse_m)),
            insample_rmse: rms_of(ok.iter().filter_map(|r| r.insample_rmse)),
            oos_rmse: rms_of(ok.iter().filter_map(|r| r.oos_rmse)),
            oos_no_neighbor_reps: ok.iter().filter(|r| r.oos_no_neighbor > 0).count(),
        });
    }
    let rates = config
        .eval_points
        .iter()
        .map(|p| {
            let label = point_label(p);
            let by_n: Vec<(usize, f64)> = pointwise
                .iter()
                .filter(|r| r.point == label && r.rmse > 0.0 && r.rmse.is_finite())
                .map(|r| (r.n, r.rmse))
                .collect();
            match empirical_rate(&by_n) {
                Ok(r) => RateRow {
                    point: label,
                    slope: r.slope,
                    intercept: r.intercept,
                    sizes: by_n.len(),
                },
                Err(_) => RateRow {
                    point: label,
                    slope: f64::NAN,
                    intercept: f64::NAN,
                    sizes: by_n.len(),
                },
            }
        })
        .collect();
    ExperimentResult {
        config,
        sigma,
        records,
        pointwise,
        rates,
        bandwidths,
        aggregate,
    }
}

#[derive(Serialize)]
struct ReplicationRow {
    n: usize,
    rep: usize,
    h: String,
    h_mass: String,
    cv_value: Option<f64>,
    cv_skipped: Option<usize>,
    loo_mae: Option<f64>,
    loo_rmse: Option<f64>,
    loo_rmse_m: Option<f64>,
    insample_rmse: Option<f64>,
    oos_rmse: Option<f64>,
    oos_no_neighbor: usize,
    error: String,
}

#[derive(Serialize)]
struct EstimateRow<'a> {
    n: usize,
    rep: usize,
    point: &'a str,
    estimate: Option<f64>,
}

fn join(v: &[f64]) -> String {
    point_label(v)
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl ExperimentResult {
    pub fn rate_at(&self, point: &[f64]) -> Option<f64> {
        let label = point_label(point);
        self.rates.iter().find(|r| r.point == label).map(|r| r.slope)
    }

    /// Writes `pointwise.csv`, `rates.csv`, `bandwidths.csv`,
    /// `aggregate.csv`, `replications.csv` and `estimates.csv` into `dir`.
    pub fn write_tables(&self, dir: &Path) -> Result<Vec<String>> {
        fs::create_dir_all(dir)?;
        write_rows(&dir.join("pointwise.csv"), &self.pointwise)?;
        write_rows(&dir.join("rates.csv"), &self.rates)?;
        write_rows(&dir.join("bandwidths.csv"), &self.bandwidths)?;
        write_rows(&dir.join("aggregate.csv"), &self.aggregate)?;
        write_rows(
            &dir.join("replications.csv"),
            self.records.iter().map(|r| ReplicationRow {
                n: r.n,
                rep: r.rep,
                h: join(&r.h),
                h_mass: r.h_mass.as_deref().map(join).unwrap_or_default(),
                cv_value: r.cv_value,
                cv_skipped: r.cv_skipped,
                loo_mae: r.loo_mae,
                loo_rmse: r.loo_rmse,
                loo_rmse_m: r.loo_rmse_m,
                insample_rmse: r.insample_rmse,
                oos_rmse: r.oos_rmse,
                oos_no_neighbor: r.oos_no_neighbor,
                error: r.error.clone().unwrap_or_default(),
            }),
        )?;
        let labels: Vec<String> = self.config.eval_points.iter().map(|p| point_label(p)).collect();
        write_rows(
            &dir.join("estimates.csv"),
            self.records.iter().flat_map(|r| {
                labels.iter().zip(&r.estimates).map(move |(l, e)| EstimateRow {
                    n: r.n,
                    rep: r.rep,
                    point: l,
                    estimate: *e,
                })
            }),
        )?;
        Ok(["pointwise", "rates", "bandwidths", "aggregate", "replications", "estimates"]
            .iter()
            .map(|s| format!("{s}.csv"))
            .collect())
    }
}
