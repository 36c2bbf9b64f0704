use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use ssmooth::bandwidth::{cv_search, select_bandwidth, BandwidthConfig, CvResult, Policy, Selection, Trim};
use ssmooth::inference::{catt, empirical_rate, pointwise_ci};
use ssmooth::measure::{ahlfors_exponent, cube_probability, doubling_ratio, kernel_moment, moment_bounds, moment_oracle};
use ssmooth::simlab::{numeric_query, run_experiment, Dgp, ExperimentConfig, X2Mode};
use ssmooth::spaces::ingest::{load_dataset, read_table_path, Schema};
use ssmooth::{BandwidthVector, Dataset, Error, Kernel};

use crate::manifest::{config_digest, write_json};
use crate::{BandwidthArgs, Command, DataArgs, Outcome};

pub fn name(c: &Command) -> &'static str {
    match c {
        Command::Fit { .. } => "fit",
        Command::Cv { .. } => "cv",
        Command::Simulate { .. } => "simulate",
        Command::Rate { .. } => "rate",
        Command::Catt { .. } => "catt",
        Command::Diagnose { .. } => "diagnose",
    }
}

pub fn run(command: Command, seed: Option<u64>, out: &Path) -> Result<Outcome> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match command {
        Command::Fit { data, bw, at, level } => fit(&data, &bw, &at, level, seed.unwrap_or(0), out),
        Command::Cv { data, bw, trim } => cv(&data, &bw, trim, seed.unwrap_or(0), out),
        Command::Simulate { config } => simulate(&config, seed, out),
        Command::Rate { input } => rate(&input, out),
        Command::Catt { data, bw, treatment } => catt_cmd(&data, &bw, &treatment, seed.unwrap_or(0), out),
        Command::Diagnose {
            data,
            at,
            h,
            eps,
            ladder,
            kernel,
            power,
        } => diagnose(&data, &at, &h, eps, &ladder, &kernel, power, out),
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("{what}: cannot parse {t:?} as a number"))
        })
        .collect()
}

fn load(data: &DataArgs) -> Result<(Schema, Dataset, Vec<Kernel>)> {
    let schema = Schema::from_path(&data.schema)?;
    let (ds, kernels) = load_dataset(&data.data, &schema).with_context(|| format!("reading {}", data.data.display()))?;
    Ok((schema, ds, kernels))
}

fn policy(bw: &BandwidthArgs) -> Result<BandwidthConfig> {
    let mut cfg = BandwidthConfig {
        grid_points: bw.grid_points,
        restarts: bw.restarts,
        alpha: bw.alpha,
        min_frac: bw.min_frac,
        floor_ratio: bw.floor_ratio,
        ..BandwidthConfig::default()
    };
    cfg.policy = match bw.bandwidth.trim() {
        "cv" => Policy::Cv,
        "adaptive" => Policy::Adaptive,
        "masspoint" | "masspoint_adaptive" => Policy::MasspointAdaptive,
        other => {
            cfg.h = Some(parse_list(other, "--bandwidth")?);
            Policy::Fixed
        }
    };
    Ok(cfg)
}

#[derive(Serialize)]
struct Inputs<'a, T: Serialize> {
    command: &'a str,
    seed: u64,
    args: T,
}

fn digest<T: Serialize>(command: &str, seed: u64, args: T) -> Result<String> {
    config_digest(&Inputs { command, seed, args })
}

#[derive(Serialize)]
struct FitRow {
    query: usize,
    estimate: Option<f64>,
    numerator: Option<f64>,
    denominator: Option<f64>,
    neighbors: usize,
    variance: Option<f64>,
    lower: Option<f64>,
    upper: Option<f64>,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn fit(data: &DataArgs, bw: &BandwidthArgs, at: &Path, level: f64, seed: u64, out: &Path) -> Result<Outcome> {
    if !(level > 0.0 && level < 1.0) {
        bail!("--level must lie in (0, 1)");
    }
    let (schema, ds, kernels) = load(data)?;
    let queries = read_table_path(at, &schema)
        .with_context(|| format!("reading {}", at.display()))?
        .queries();
    let sel = select_bandwidth(&policy(bw)?, &ds, &kernels, seed, None)?;
    let mut rows = Vec::with_capacity(queries.len());
    let mut skipped = 0;
    for (k, x) in queries.iter().enumerate() {
        let mut row = FitRow {
            query: k,
            estimate: None,
            numerator: None,
            denominator: None,
            neighbors: 0,
            variance: None,
            lower: None,
            upper: None,
        };
        match sel.fit(&ds, x, &kernels) {
            Ok(f) => {
                row.estimate = Some(f.estimate);
                row.numerator = Some(f.numerator);
                row.denominator = Some(f.denominator);
                row.neighbors = f.neighbors;
                if let Some(h) = sel.global() {
                    let ci = pointwise_ci(&ds, x, h, &kernels, level)?;
                    row.variance = Some(ci.variance);
                    row.lower = Some(ci.lower);
                    row.upper = Some(ci.upper);
                }
            }
            Err(Error::NoNeighbor) => skipped += 1,
            Err(e) => return Err(anyhow::Error::new(e).context(format!("query row {}", k + 1))),
        }
        rows.push(row);
    }
    write_csv(&out.join("fit.csv"), rows)?;
    write_json(&out.join("bandwidth.json"), &sel)?;
    let mut warnings = Vec::new();
    if skipped > 0 {
        warnings.push(format!("{skipped} of {} queries have no neighbor", queries.len()));
    }
    Ok(Outcome {
        partial: skipped > 0,
        warnings,
        config_digest: digest("fit", seed, (data, bw, at, level))?,
        seed,
        details: json!({ "h": sel.h(), "queries": queries.len(), "no_neighbor": skipped }),
    })
}

fn cv(data: &DataArgs, bw: &BandwidthArgs, trim: Option<f64>, seed: u64, out: &Path) -> Result<Outcome> {
    let (_, ds, kernels) = load(data)?;
    let cfg = policy(bw)?;
    let trim = match trim {
        Some(f) if (0.0..1.0).contains(&f) => Trim::boundary(&ds, f),
        Some(f) => bail!("--trim must lie in [0, 1), got {f}"),
        None => Trim::None,
    };
    let r: CvResult = cv_search(&ds, &kernels, &cfg.search_box(&ds, &kernels), &cfg.cv_options(seed), &trim)?;
    write_json(&out.join("cv.json"), &r)?;
    let mut warnings = Vec::new();
    if r.skipped > 0 {
        warnings.push(format!("{} observations had no neighbor at the selected bandwidth", r.skipped));
    }
    Ok(Outcome {
        partial: r.skipped > 0,
        warnings,
        config_digest: digest("cv", seed, (data, bw, trim_label(&trim)))?,
        seed,
        details: json!({ "h_cv": r.h_cv, "cv_value": r.cv_value, "skipped": r.skipped }),
    })
}

fn trim_label(t: &Trim) -> Option<usize> {
    match t {
        Trim::None => None,
        Trim::Weights(w) => Some(w.iter().filter(|&&v| v == 0.0).count()),
    }
}

fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> Result<Outcome> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let result = run_experiment(&cfg)?;
    let files = result.write_tables(out)?;
    let failures: usize = result.aggregate.iter().map(|a| a.failures).sum();
    let no_neighbor: usize = result.pointwise.iter().map(|p| p.no_neighbor).sum();
    let cv_skipped: usize = result.records.iter().filter_map(|r| r.cv_skipped).sum();
    let mut warnings = Vec::new();
    if failures > 0 {
        let first = result.records.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        warnings.push(format!("{failures} replications failed (first: {first})"));
    }
    if no_neighbor > 0 {
        warnings.push(format!("{no_neighbor} evaluation fits had no neighbor"));
    }
    let mut notes = vec!["snr = sd(m) / sigma".to_string()];
    if matches!(cfg.dgp, Dgp::Functional { x2: X2Mode::FunctionalZ { .. }, .. }) {
        notes.push("curve-parameter correlation via a Gaussian copula with uniform marginals".into());
    }
    Ok(Outcome {
        partial: failures > 0 || no_neighbor > 0,
        warnings,
        config_digest: config_digest(&cfg)?,
        seed: cfg.seed,
        details: json!({
            "sigma": result.sigma,
            "files": files,
            "replications": result.records.len(),
            "failures": failures,
            "no_neighbor": no_neighbor,
            "cv_skipped_total": cv_skipped,
            "notes": notes,
        }),
    })
}

#[derive(Serialize)]
struct RateRow {
    point: String,
    slope: f64,
    intercept: f64,
    sizes: usize,
}

fn rate(input: &Path, out: &Path) -> Result<Outcome> {
    let mut rdr = csv::Reader::from_path(input).with_context(|| format!("reading {}", input.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let n_col = col("n").context("rate input needs an `n` column")?;
    let r_col = col("rmse").context("rate input needs an `rmse` column")?;
    let p_col = col("point");
    let mut groups: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(row as u64 + 2, |p| p.line());
        let n: usize = rec[n_col]
            .trim()
            .parse()
            .with_context(|| format!("line {line}: bad n {:?}", &rec[n_col]))?;
        let r: f64 = rec[r_col]
            .trim()
            .parse()
            .with_context(|| format!("line {line}: bad rmse {:?}", &rec[r_col]))?;
        let point = p_col.map(|k| rec[k].trim().to_string()).unwrap_or_default();
        groups.entry(point).or_default().push((n, r));
    }
    if groups.is_empty() {
        bail!("{} has no rows", input.display());
    }
    let mut rows = Vec::new();
    for (point, pts) in &groups {
        let r = empirical_rate(pts).with_context(|| format!("point {point:?}"))?;
        println!("{}\t{}", if point.is_empty() { "-" } else { point }, r.slope);
        rows.push(RateRow {
            point: point.clone(),
            slope: r.slope,
            intercept: r.intercept,
            sizes: pts.len(),
        });
    }
    write_csv(&out.join("rates.csv"), &rows)?;
    Ok(Outcome {
        partial: false,
        warnings: Vec::new(),
        config_digest: digest("rate", 0, input)?,
        seed: 0,
        details: json!({ "points": rows.len() }),
    })
}

fn catt_cmd(data: &DataArgs, bw: &BandwidthArgs, treatment: &str, seed: u64, out: &Path) -> Result<Outcome> {
    let (_, ds, kernels) = load(data)?;
    let column = ds
        .names()
        .iter()
        .position(|n| n == treatment)
        .with_context(|| format!("treatment column {treatment} is not a regressor in the schema"))?;
    let sel: Selection = select_bandwidth(&policy(bw)?, &ds, &kernels, seed, None)?;
    let h: &BandwidthVector = sel
        .global()
        .context("the effect on the treated needs a single bandwidth (cv or an explicit vector)")?;
    let report = catt(&ds, h, &kernels, column)?;
    write_json(&out.join("catt.json"), &report)?;
    #[derive(Serialize)]
    struct Unit {
        unit: usize,
        tau_hat: f64,
    }
    write_csv(
        &out.join("catt_units.csv"),
        report.units.iter().zip(&report.tau_hat).map(|(&unit, &tau_hat)| Unit { unit, tau_hat }),
    )?;
    let mut warnings = Vec::new();
    if report.skipped > 0 {
        warnings.push(format!("{} treated units lack a neighbor in one arm", report.skipped));
    }
    Ok(Outcome {
        partial: report.skipped > 0,
        warnings,
        config_digest: digest("catt", seed, (data, bw, treatment))?,
        seed,
        details: json!({ "h": h, "mean": report.mean, "stderr": report.stderr, "skipped": report.skipped }),
    })
}

#[allow(clippy::too_many_arguments)]
fn diagnose(
    data: &DataArgs,
    at: &str,
    h: &str,
    eps: f64,
    ladder: &str,
    kernel: &str,
    power: u32,
    out: &Path,
) -> Result<Outcome> {
    let (_, ds, _) = load(data)?;
    let xs = parse_list(at, "--at")?;
    let x = numeric_query(&ds, &xs)?;
    let hv = BandwidthVector::new(parse_list(h, "--h")?);
    let ladder = parse_list(ladder, "--ladder")?;
    let k = Kernel::from_name(kernel).with_context(|| format!("unknown kernel {kernel}"))?;
    let probe = cube_probability(&ds, &x, &hv)?;
    let mut warnings = Vec::new();
    let mut keep = |what: &str, r: ssmooth::Result<serde_json::Value>| match r {
        Ok(v) => v,
        Err(e) => {
            warnings.push(format!("{what}: {e}"));
            serde_json::Value::Null
        }
    };
    let doubling = keep("doubling_ratio", doubling_ratio(&ds, &x, &hv, eps).map(|v| json!(v)));
    let s_hat = keep("s_hat", ahlfors_exponent(&ds, &x, &hv, &ladder).map(|v| json!(v)));
    let bounds = keep(
        "bounds",
        moment_bounds(&ds, k, &x, &hv, power, eps).map(|b| json!({ "L": b.lower, "U": b.upper })),
    );
    let oracle = keep("oracle", moment_oracle(&ds, k, &x, &hv, power).map(|v| json!(v)));
    let (mean, stderr) = match kernel_moment(&ds, k, &x, &hv, power) {
        Ok(m) => (json!(m.mean), json!(m.stderr)),
        Err(e) => {
            warnings.push(format!("sample_mean: {e}"));
            (serde_json::Value::Null, serde_json::Value::Null)
        }
    };
    let report = json!({
        "x": xs,
        "h": hv,
        "p_hat": probe.p_hat,
        "count": probe.count,
        "doubling_ratio": doubling,
        "s_hat": s_hat,
        "bounds": bounds,
        "oracle": oracle,
        "sample_mean": mean,
        "sample_stderr": stderr,
    });
    write_json(&out.join("diagnose.json"), &report)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(Outcome {
        partial: !warnings.is_empty(),
        warnings,
        config_digest: digest("diagnose", 0, (data, at, h, eps, &ladder, kernel, power))?,
        seed: 0,
        details: serde_json::Value::Null,
    })
}
