use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ssmooth::simlab::gen_unit_circle;
use ssmooth::spaces::RegressorColumn;
use tempfile::TempDir;

fn ssmooth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssmooth"))
        .args(args)
        .env_remove("SSMOOTH_JOBS")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SCALAR_SCHEMA: &str = r#"{"y": {"role": "response"}, "x": {"role": "regressor", "kind": "scalar"}}"#;

fn toy(dir: &Path) {
    fs::write(dir.join("data.csv"), "x,y\n0,1\n0.5,2\n2,5\n").unwrap();
    fs::write(dir.join("schema.json"), SCALAR_SCHEMA).unwrap();
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let k = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[k].to_string()).collect()
}

#[test]
fn toy_fit() {
    let dir = TempDir::new().unwrap();
    toy(dir.path());
    fs::write(dir.path().join("at.csv"), "x\n0\n").unwrap();
    let out = dir.path().join("out");
    let o = ssmooth(&[
        "fit",
        "--data",
        s(&dir.path().join("data.csv")),
        "--schema",
        s(&dir.path().join("schema.json")),
        "--bandwidth",
        "1",
        "--at",
        s(&dir.path().join("at.csv")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let est: f64 = column(&out.join("fit.csv"), "estimate")[0].parse().unwrap();
    // Epanechnikov weights 0.75 and 0.5625 on y = 1 and 2
    let by_hand = (0.75 * 1.0 + 0.5625 * 2.0) / (0.75 + 0.5625);
    assert!((est - 1.428571).abs() < 1e-6);
    assert!((est - by_hand).abs() < 1e-12);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn fit_round_trips() {
    let dir = TempDir::new().unwrap();
    let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 2.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.exp() / 3.0).collect();
    let mut text = String::from("x,y\n");
    for (x, y) in xs.iter().zip(&ys) {
        text.push_str(&format!("{x},{y}\n"));
    }
    fs::write(dir.path().join("data.csv"), text).unwrap();
    fs::write(dir.path().join("schema.json"), SCALAR_SCHEMA).unwrap();
    let queries = [-1.3, 0.1, 0.77, 1.9];
    let q: String = queries.iter().map(|v| format!("{v}\n")).collect();
    fs::write(dir.path().join("at.csv"), format!("x\n{q}")).unwrap();
    let out = dir.path().join("out");
    let o = ssmooth(&[
        "fit",
        "--data",
        s(&dir.path().join("data.csv")),
        "--schema",
        s(&dir.path().join("schema.json")),
        "--bandwidth",
        "0.6",
        "--at",
        s(&dir.path().join("at.csv")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let ds = ssmooth::Dataset::from_scalar_rows(ys, &xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap();
    let h = ssmooth::BandwidthVector::new(vec![0.6]);
    for (cell, &x) in column(&out.join("fit.csv"), "estimate").iter().zip(&queries) {
        let want = ssmooth::nw_fit(&ds, &vec![ssmooth::Coord::Scalar(x)], &h, &[ssmooth::Kernel::Epanechnikov])
            .unwrap()
            .estimate;
        assert_eq!(cell.parse::<f64>().unwrap(), want);
    }
}

#[test]
fn missing_schema_is_input_error() {
    let dir = TempDir::new().unwrap();
    toy(dir.path());
    fs::write(dir.path().join("at.csv"), "x\n0\n").unwrap();
    let o = ssmooth(&[
        "fit",
        "--data",
        s(&dir.path().join("data.csv")),
        "--schema",
        s(&dir.path().join("nope.json")),
        "--bandwidth",
        "1",
        "--at",
        s(&dir.path().join("at.csv")),
        "--out",
        s(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_row_names_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("data.csv"), "x,y\n0,1\nabc,2\n").unwrap();
    fs::write(dir.path().join("schema.json"), SCALAR_SCHEMA).unwrap();
    let o = ssmooth(&[
        "cv",
        "--data",
        s(&dir.path().join("data.csv")),
        "--schema",
        s(&dir.path().join("schema.json")),
        "--out",
        s(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn all_no_neighbor_is_partial() {
    let dir = TempDir::new().unwrap();
    toy(dir.path());
    fs::write(dir.path().join("at.csv"), "x\n10\n-10\n").unwrap();
    let out = dir.path().join("out");
    let o = ssmooth(&[
        "fit",
        "--data",
        s(&dir.path().join("data.csv")),
        "--schema",
        s(&dir.path().join("schema.json")),
        "--bandwidth",
        "1",
        "--at",
        s(&dir.path().join("at.csv")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(column(&out.join("fit.csv"), "estimate").iter().all(String::is_empty));
}

#[test]
fn rate_recovers_exact_power() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("n,rmse\n");
    for n in [50, 100, 200, 400, 800, 1600, 3200] {
        text.push_str(&format!("{n},{}\n", 2.5 * (n as f64).powf(-0.4)));
    }
    fs::write(dir.path().join("rmse.csv"), text).unwrap();
    let out = dir.path().join("out");
    let o = ssmooth(&["rate", "--input", s(&dir.path().join("rmse.csv")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let slope: f64 = column(&out.join("rates.csv"), "slope")[0].parse().unwrap();
    assert!((slope + 0.4).abs() < 1e-12);
}

fn run_sim(dir: &Path, jobs: &str) -> (Vec<(String, Vec<u8>)>, String) {
    let out = dir.join(format!("out{jobs}"));
    let o = ssmooth(&[
        "simulate",
        "--config",
        s(&dir.join("cfg.json")),
        "--jobs",
        jobs,
        "--seed",
        "11",
        "--out",
        s(&out),
    ]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&o.stderr));
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    (files, manifest["config_digest"].as_str().unwrap().to_string())
}

#[test]
fn simulate_is_deterministic_across_jobs() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"dgp": {"kind": "mass_point", "p": 0.2}, "n_grid": [40, 80, 160], "reps": 8,
            "bandwidth": {"policy": "cv", "restarts": 2, "grid_points": 10, "floor_ratio": 0.01},
            "eval_points": [[0.0], [0.3]]}"#,
    )
    .unwrap();
    let (a, da) = run_sim(dir.path(), "1");
    let (b, db) = run_sim(dir.path(), "8");
    assert_eq!(da, db);
    assert_eq!(a.len(), 6);
    assert_eq!(a, b);
}

#[test]
fn diagnose_reports_half_dimension_on_circle() {
    let dir = TempDir::new().unwrap();
    let sample = gen_unit_circle(20_000, true, 1.0, 5).unwrap();
    let col = |l: usize| match sample.ds.column(l) {
        RegressorColumn::Scalar(v) => v.clone(),
        _ => unreachable!(),
    };
    let (x1, x2) = (col(0), col(1));
    let mut text = String::from("x1,x2,y\n");
    for i in 0..sample.ds.n() {
        text.push_str(&format!("{},{},{}\n", x1[i], x2[i], sample.ds.y()[i]));
    }
    fs::write(dir.path().join("data.csv"), text).unwrap();
    fs::write(
        dir.path().join("schema.json"),
        r#"{"y": {"role": "response"}, "x1": {"role": "regressor", "kind": "scalar"},
            "x2": {"role": "regressor", "kind": "scalar"}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = ssmooth(&[
        "diagnose",
        "--data",
        s(&dir.path().join("data.csv")),
        "--schema",
        s(&dir.path().join("schema.json")),
        "--at",
        "0.6,0.8",
        "--h",
        "0.4,0.4",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("diagnose.json")).unwrap()).unwrap();
    let s_hat = r["s_hat"].as_f64().unwrap();
    assert!((s_hat - 0.5).abs() < 0.1, "s_hat {s_hat}");
    let (l, u, mean) = (
        r["bounds"]["L"].as_f64().unwrap(),
        r["bounds"]["U"].as_f64().unwrap(),
        r["sample_mean"].as_f64().unwrap(),
    );
    assert!(l <= mean && mean <= u);
}

#[test]
fn catt_recovers_additive_effect() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("x,t,y\n");
    for i in 0..400 {
        let x = (i as f64 * 0.618).fract() * 2.0;
        let t = i % 3 == 0;
        let y = x.sin() + if t { 1.5 } else { 0.0 };
        text.push_str(&format!("{x},{},{y}\n", t as u8));
    }
    fs::write(dir.path().join("data.csv"), text).unwrap();
    fs::write(
        dir.path().join("schema.json"),
        r#"{"y": {"role": "response"}, "x": {"role": "regressor", "kind": "scalar"},
            "t": {"role": "regressor", "kind": "categorical"}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = ssmooth(&[
        "catt",
        "--data",
        s(&dir.path().join("data.csv")),
        "--schema",
        s(&dir.path().join("schema.json")),
        "--treatment",
        "t",
        "--bandwidth",
        "0.2,0",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("catt.json")).unwrap()).unwrap();
    // smoothing bias differs slightly between the two arms
    assert!((r["mean"].as_f64().unwrap() - 1.5).abs() < 0.02, "{r}");
    assert!(out.join("catt_units.csv").exists());
}
