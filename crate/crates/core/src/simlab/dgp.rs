//! Data-generating processes for the Monte Carlo experiments.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::inference::mean_sd;
use crate::kernels::Kernel;
use crate::rng::stream;
use crate::spaces::{trapezoid, uniform_grid, Dataset, FunctionalColumn, RegressorColumn};

/// Grid points of simulated curves on `[-1, 1]`.
pub const CURVE_GRID: usize = 101;
/// Quadrature nodes for the functional mean `m₁`.
const M1_NODES: usize = 1001;
/// Draws used to calibrate the population spread of `m(X)`.
const CALIBRATION_DRAWS: usize = 100_000;
const CALIBRATION_SEED: u64 = 0x5EED_CA11;

/// Which regressors of the reduced-dimension design enter the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReducedView {
    /// `(X₁, X₂)`, both scalar.
    #[default]
    Continuous,
    /// `(X₁, d)` with `d` ordered and smoothed by Wang-van Ryzin.
    Ordered,
    /// `(X₁, d)` with `d` smoothed by Epanechnikov on its numeric value.
    Unordered,
}

/// Which regressors of the functional design enter the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalView {
    #[default]
    Full,
    /// Curve only.
    DropScalar,
    /// Scalar only.
    DropCurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum X2Mode {
    /// Independent standard normal.
    Normal,
    /// `m₁(Z)` for a curve `Z` whose parameters are tied to those of `X₁`
    /// by a Gaussian copula with correlation `rho`.
    FunctionalZ { rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dgp {
    /// `X` uniform on `{-1, 0, 1}` with probability `p`, else `N(0,1)`;
    /// `m(x) = sin(2.5x)`.
    MassPoint { p: f64 },
    /// Three-component normal mixture with weights 0.5, 0.3, 0.2;
    /// `m(x) = sin(2.5x)`.
    Trinormal,
    /// `X₁ ~ U[1,3]`, `X₂ = d − X₁`, `d ∈ {4,6,7}` w.p. 0.5, 0.3, 0.2;
    /// `m = log X₁ + log X₂`.
    ReducedDim {
        #[serde(default)]
        view: ReducedView,
    },
    /// On the unit circle, or uniform on `[-1,1]²`; `m = X₁ + X₂`.
    UnitCircle { singular: bool },
    /// Curve `X₁(t) = sin(wt) + (a+2π)t + b` and scalar `X₂`;
    /// `m = m₁(X₁) + X₂`.
    Functional {
        x2: X2Mode,
        #[serde(default)]
        view: FunctionalView,
    },
}

/// Regressors and noiseless mean of one draw.
#[derive(Debug, Clone)]
pub struct Draw {
    pub columns: Vec<RegressorColumn>,
    pub names: Vec<String>,
    pub m: Vec<f64>,
}

/// A simulated dataset with its true conditional mean.
#[derive(Debug, Clone)]
pub struct Sample {
    pub ds: Dataset,
    pub m: Vec<f64>,
    pub sigma: f64,
}

pub const MASS_POINTS: [f64; 3] = [-1.0, 0.0, 1.0];
const REDUCED_D: [u32; 3] = [4, 6, 7];

fn sin_mean(x: f64) -> f64 {
    (2.5 * x).sin()
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn draw_reduced_d(rng: &mut impl Rng) -> u32 {
    let u: f64 = rng.gen();
    if u < 0.5 {
        REDUCED_D[0]
    } else if u < 0.8 {
        REDUCED_D[1]
    } else {
        REDUCED_D[2]
    }
}

/// Curve parameters `(a, b, w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveParams {
    pub a: f64,
    pub b: f64,
    pub w: f64,
}

impl CurveParams {
    pub fn value(&self, t: f64) -> f64 {
        (self.w * t).sin() + (self.a + TAU) * t + self.b
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.w * (self.w * t).cos() + self.a + TAU
    }

    /// `m₁ = ∫_{-1}^{1} |X'(t)| (1 − cos πt) dt`.
    pub fn m1(&self) -> f64 {
        let g = m1_grid();
        let f: Vec<f64> = g.iter().map(|&t| self.derivative(t).abs() * (1.0 - (PI * t).cos())).collect();
        trapezoid(g, &f)
    }
}

fn m1_grid() -> &'static [f64] {
    static GRID: std::sync::OnceLock<Arc<[f64]>> = std::sync::OnceLock::new();
    GRID.get_or_init(|| uniform_grid(-1.0, 1.0, M1_NODES))
}

fn curve_grid() -> Arc<[f64]> {
    static GRID: std::sync::OnceLock<Arc<[f64]>> = std::sync::OnceLock::new();
    GRID.get_or_init(|| uniform_grid(-1.0, 1.0, CURVE_GRID)).clone()
}

fn uniform_from_normal(z: f64, lo: f64, hi: f64) -> f64 {
    let u = Normal::new(0.0, 1.0).expect("unit normal").cdf(z);
    lo + (hi - lo) * u
}

/// Parameters of `X₁` and, under the copula mode, of `Z`.
fn draw_curve_params(rng: &mut impl Rng, rho: Option<f64>) -> (CurveParams, Option<CurveParams>) {
    match rho {
        None => (
            CurveParams {
                a: rng.gen_range(-1.0..1.0),
                b: rng.gen_range(-1.0..1.0),
                w: rng.gen_range(-PI..PI),
            },
            None,
        ),
        Some(rho) => {
            let z: [f64; 3] = [normal(rng), normal(rng), normal(rng)];
            let c = (1.0 - rho * rho).max(0.0).sqrt();
            let zp: [f64; 3] = [
                rho * z[0] + c * normal(rng),
                rho * z[1] + c * normal(rng),
                rho * z[2] + c * normal(rng),
            ];
            let to = |v: [f64; 3]| CurveParams {
                a: uniform_from_normal(v[0], -1.0, 1.0),
                b: uniform_from_normal(v[1], -1.0, 1.0),
                w: uniform_from_normal(v[2], -PI, PI),
            };
            (to(z), Some(to(zp)))
        }
    }
}

impl Dgp {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Dgp::MassPoint { p } if !(0.0..1.0).contains(&p) => {
                Err(Error::InvalidInput(format!("mass probability must lie in [0, 1), got {p}")))
            }
            Dgp::Functional {
                x2: X2Mode::FunctionalZ { rho },
                ..
            } if !(-1.0..=1.0).contains(&rho) => Err(Error::InvalidInput(format!("rho must lie in [-1, 1], got {rho}"))),
            _ => Ok(()),
        }
    }

    /// Kernels matching the columns of [`Dgp::draw`].
    pub fn kernels(&self) -> Vec<Kernel> {
        match self {
            Dgp::MassPoint { .. } | Dgp::Trinormal => vec![Kernel::Epanechnikov],
            Dgp::ReducedDim { view } => match view {
                ReducedView::Continuous | ReducedView::Unordered => vec![Kernel::Epanechnikov; 2],
                ReducedView::Ordered => vec![Kernel::Epanechnikov, Kernel::WangVanRyzin],
            },
            Dgp::UnitCircle { .. } => vec![Kernel::Epanechnikov; 2],
            Dgp::Functional { view, .. } => match view {
                FunctionalView::Full => vec![Kernel::AsymmetricQuadratic, Kernel::Epanechnikov],
                FunctionalView::DropScalar => vec![Kernel::AsymmetricQuadratic],
                FunctionalView::DropCurve => vec![Kernel::Epanechnikov],
            },
        }
    }

    /// Known atoms of a scalar regressor, as `(column, values)`.
    pub fn mass_points(&self) -> Option<(usize, Vec<f64>)> {
        match self {
            Dgp::MassPoint { p } if *p > 0.0 => Some((0, MASS_POINTS.to_vec())),
            _ => None,
        }
    }

    /// True mean at a numeric query. Codes are given as numbers.
    pub fn mean_at(&self, point: &[f64]) -> Result<f64> {
        let need = |k: usize| {
            if point.len() == k {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    expected: k,
                    got: point.len(),
                })
            }
        };
        match self {
            Dgp::MassPoint { .. } | Dgp::Trinormal => {
                need(1)?;
                Ok(sin_mean(point[0]))
            }
            Dgp::ReducedDim { view } => {
                need(2)?;
                let x2 = match view {
                    ReducedView::Continuous => point[1],
                    _ => point[1] - point[0],
                };
                Ok(point[0].ln() + x2.ln())
            }
            Dgp::UnitCircle { .. } => {
                need(2)?;
                Ok(point[0] + point[1])
            }
            Dgp::Functional { .. } => Err(Error::NotApplicable("numeric query points for a functional design")),
        }
    }

    /// Regressors and `m(X)` for `n` draws.
    pub fn draw(&self, n: usize, rng: &mut impl Rng) -> Draw {
        let name = |s: &str| s.to_string();
        match self {
            Dgp::MassPoint { p } => {
                let x: Vec<f64> = (0..n)
                    .map(|_| {
                        if rng.gen::<f64>() < *p {
                            MASS_POINTS[rng.gen_range(0..3)]
                        } else {
                            normal(rng)
                        }
                    })
                    .collect();
                let m = x.iter().map(|&v| sin_mean(v)).collect();
                Draw {
                    columns: vec![RegressorColumn::Scalar(x)],
                    names: vec![name("x")],
                    m,
                }
            }
            Dgp::Trinormal => {
                let c = -0.767;
                let x: Vec<f64> = (0..n)
                    .map(|_| {
                        let u: f64 = rng.gen();
                        let z = normal(rng);
                        if u < 0.5 {
                            c + z
                        } else if u < 0.8 {
                            c + 0.8 + 0.1 * z
                        } else {
                            c + 1.2 + 0.1 * z
                        }
                    })
                    .collect();
                let m = x.iter().map(|&v| sin_mean(v)).collect();
                Draw {
                    columns: vec![RegressorColumn::Scalar(x)],
                    names: vec![name("x")],
                    m,
                }
            }
            Dgp::ReducedDim { view } => {
                let mut x1 = Vec::with_capacity(n);
                let mut d = Vec::with_capacity(n);
                for _ in 0..n {
                    d.push(draw_reduced_d(rng));
                    x1.push(rng.gen_range(1.0..3.0));
                }
                let x2: Vec<f64> = x1.iter().zip(&d).map(|(&a, &k)| k as f64 - a).collect();
                let m = x1.iter().zip(&x2).map(|(a, b)| a.ln() + b.ln()).collect();
                let columns = match view {
                    ReducedView::Continuous => vec![RegressorColumn::Scalar(x1), RegressorColumn::Scalar(x2)],
                    _ => vec![RegressorColumn::Scalar(x1), RegressorColumn::Ordered(d)],
                };
                let names = match view {
                    ReducedView::Continuous => vec![name("x1"), name("x2")],
                    _ => vec![name("x1"), name("d")],
                };
                Draw { columns, names, m }
            }
            Dgp::UnitCircle { singular } => {
                let (x1, x2): (Vec<f64>, Vec<f64>) = (0..n)
                    .map(|_| {
                        if *singular {
                            let phi: f64 = rng.gen_range(0.0..TAU);
                            (phi.cos(), phi.sin())
                        } else {
                            (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                        }
                    })
                    .unzip();
                let m = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
                Draw {
                    columns: vec![RegressorColumn::Scalar(x1), RegressorColumn::Scalar(x2)],
                    names: vec![name("x1"), name("x2")],
                    m,
                }
            }
            Dgp::Functional { x2: mode, view } => {
                let rho = match mode {
                    X2Mode::Normal => None,
                    X2Mode::FunctionalZ { rho } => Some(*rho),
                };
                let grid = curve_grid();
                let mut curves = Vec::with_capacity(n);
                let mut x2 = Vec::with_capacity(n);
                let mut m = Vec::with_capacity(n);
                for _ in 0..n {
                    let (p, zp) = draw_curve_params(rng, rho);
                    let second = match zp {
                        Some(z) => z.m1(),
                        None => normal(rng),
                    };
                    curves.push(grid.iter().map(|&t| p.value(t)).collect::<Vec<f64>>());
                    m.push(p.m1() + second);
                    x2.push(second);
                }
                let curve_col = || {
                    RegressorColumn::Functional(FunctionalColumn::new(grid.clone(), curves.clone()).expect("valid simulated curves"))
                };
                let (columns, names) = match view {
                    FunctionalView::Full => (vec![curve_col(), RegressorColumn::Scalar(x2)], vec![name("x1"), name("x2")]),
                    FunctionalView::DropScalar => (vec![curve_col()], vec![name("x1")]),
                    FunctionalView::DropCurve => (vec![RegressorColumn::Scalar(x2)], vec![name("x2")]),
                };
                Draw { columns, names, m }
            }
        }
    }

    /// Population standard deviation of `m(X)`, from a fixed large draw.
    pub fn signal_sd(&self) -> f64 {
        let mut rng = stream(CALIBRATION_SEED, &[]);
        let m = self.draw(CALIBRATION_DRAWS, &mut rng).m;
        mean_sd(&m).1
    }

    /// `n` draws with `Y = m(X) + σε`.
    pub fn sample(&self, n: usize, sigma: f64, rng: &mut impl Rng) -> Sample {
        let d = self.draw(n, rng);
        let y = d.m.iter().map(|&m| m + sigma * normal(rng)).collect();
        Sample {
            ds: Dataset::with_names(y, d.columns, d.names).expect("generated columns agree in length"),
            m: d.m,
            sigma,
        }
    }
}

/// `σ = sd(m) / snr`.
pub fn sigma_for_snr(m_values: &[f64], snr: f64) -> Result<f64> {
    if m_values.len() < 2 {
        return Err(Error::InvalidInput("signal needs at least 2 values".into()));
    }
    sigma_from_sd(mean_sd(m_values).1, snr)
}

pub(crate) fn sigma_from_sd(sd: f64, snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::InvalidInput(format!("snr must be positive, got {snr}")));
    }
    if !(sd > 0.0) {
        return Err(Error::DegenerateSignal);
    }
    Ok(sd / snr)
}

fn generate(dgp: Dgp, n: usize, snr: f64, seed: u64) -> Result<Sample> {
    dgp.validate()?;
    let sigma = sigma_from_sd(dgp.signal_sd(), snr)?;
    Ok(dgp.sample(n, sigma, &mut stream(seed, &[n as u64])))
}

pub fn gen_masspoint(n: usize, p: f64, snr: f64, seed: u64) -> Result<Sample> {
    generate(Dgp::MassPoint { p }, n, snr, seed)
}

pub fn gen_trinormal(n: usize, snr: f64, seed: u64) -> Result<Sample> {
    generate(Dgp::Trinormal, n, snr, seed)
}

pub fn gen_reduced_dim(n: usize, view: ReducedView, snr: f64, seed: u64) -> Result<Sample> {
    generate(Dgp::ReducedDim { view }, n, snr, seed)
}

pub fn gen_unit_circle(n: usize, singular: bool, snr: f64, seed: u64) -> Result<Sample> {
    generate(Dgp::UnitCircle { singular }, n, snr, seed)
}

pub fn gen_functional(n: usize, x2: X2Mode, snr: f64, seed: u64) -> Result<Sample> {
    generate(Dgp::Functional { x2, view: FunctionalView::Full }, n, snr, seed)
}
