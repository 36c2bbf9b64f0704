use std::sync::Arc;

use crate::error::{Error, Result};

/// A curve sampled on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Arc<[f64]>,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Arc<[f64]>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 3 {
            return Err(Error::GridTooShort(grid.len()));
        }
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("curve grid must be strictly increasing".into()));
        }
        Ok(Curve { grid, values })
    }

    /// Samples `f` on `grid`.
    pub fn from_fn(grid: Arc<[f64]>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.iter().map(|&t| f(t)).collect();
        Curve::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<[f64]> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shares_grid(&self, other: &Curve) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid[..] == other.grid[..]
    }

    /// Finite-difference derivative on the same grid: central differences
    /// inside, one-sided differences at both ends.
    pub fn derivative(&self) -> Result<Curve> {
        let values = derivative_values(&self.grid, &self.values)?;
        Ok(Curve {
            grid: Arc::clone(&self.grid),
            values,
        })
    }
}

/// `n` equally spaced points covering `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Arc<[f64]> {
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + step * i as f64 })
        .collect::<Vec<_>>()
        .into()
}

pub(crate) fn derivative_values(grid: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let g = grid.len();
    if g < 3 {
        return Err(Error::GridTooShort(g));
    }
    let mut out = vec![0.0; g];
    out[0] = (values[1] - values[0]) / (grid[1] - grid[0]);
    out[g - 1] = (values[g - 1] - values[g - 2]) / (grid[g - 1] - grid[g - 2]);
    for k in 1..g - 1 {
        out[k] = (values[k + 1] - values[k - 1]) / (grid[k + 1] - grid[k - 1]);
    }
    Ok(out)
}

/// Trapezoid rule for samples `f` on `grid`.
pub fn trapezoid(grid: &[f64], f: &[f64]) -> f64 {
    grid.windows(2)
        .zip(f.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// L2 distance between two derivative samples on a shared grid.
#[inline]
pub(crate) fn deriv_l2(grid: &[f64], d1: &[f64], d2: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut prev = {
        let e = d1[0] - d2[0];
        e * e
    };
    for k in 1..grid.len() {
        let e = d1[k] - d2[k];
        let cur = e * e;
        acc += 0.5 * (grid[k] - grid[k - 1]) * (prev + cur);
        prev = cur;
    }
    acc.sqrt()
}

/// Semi-metric `sqrt(∫ (c1'(t) - c2'(t))^2 dt)` with finite-difference
/// derivatives and trapezoid quadrature.
pub fn semi_metric_deriv_l2(c1: &Curve, c2: &Curve) -> Result<f64> {
    if !c1.shares_grid(c2) {
        return Err(Error::GridMismatch);
    }
    let d1 = derivative_values(&c1.grid, &c1.values)?;
    let d2 = derivative_values(&c2.grid, &c2.values)?;
    Ok(deriv_l2(&c1.grid, &d1, &d2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<[f64]> {
        uniform_grid(-1.0, 1.0, 101)
    }

    #[test]
    fn derivative_of_identity_is_one() {
        let c = Curve::from_fn(grid(), |t| t).unwrap();
        for v in c.derivative().unwrap().values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_square_exact_inside() {
        let g = grid();
        let c = Curve::from_fn(g.clone(), |t| t * t).unwrap();
        let d = c.derivative().unwrap();
        for k in 1..g.len() - 1 {
            assert!((d.values()[k] - 2.0 * g[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let c = Curve::from_fn(grid(), |_| 3.5).unwrap();
        assert!(c.derivative().unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_grid_rejected() {
        let g: Arc<[f64]> = vec![0.0, 1.0].into();
        assert_eq!(Curve::new(g, vec![0.0, 1.0]), Err(Error::GridTooShort(2)));
    }

    #[test]
    fn semi_metric_examples() {
        let g = grid();
        let t = Curve::from_fn(g.clone(), |t| t).unwrap();
        let t2 = Curve::from_fn(g.clone(), |t| 2.0 * t).unwrap();
        let t5 = Curve::from_fn(g.clone(), |t| t + 5.0).unwrap();
        assert_eq!(semi_metric_deriv_l2(&t, &t).unwrap(), 0.0);
        assert!((semi_metric_deriv_l2(&t, &t2).unwrap() - 2f64.sqrt()).abs() < 1e-3);
        assert!(semi_metric_deriv_l2(&t, &t5).unwrap() < 1e-12);
    }

    #[test]
    fn grid_mismatch() {
        let a = Curve::from_fn(uniform_grid(-1.0, 1.0, 11), |t| t).unwrap();
        let b = Curve::from_fn(uniform_grid(0.0, 1.0, 11), |t| t).unwrap();
        assert_eq!(semi_metric_deriv_l2(&a, &b), Err(Error::GridMismatch));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn curve() -> impl Strategy<Value = Curve> {
            (-2.0f64..2.0, -2.0f64..2.0, -3.0f64..3.0).prop_map(|(a, b, w)| {
                Curve::from_fn(uniform_grid(-1.0, 1.0, 41), move |t| (w * t).sin() + a * t * t + b)
                    .unwrap()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]
            #[test]
            fn triangle_inequality(a in curve(), b in curve(), c in curve()) {
                let ab = semi_metric_deriv_l2(&a, &b).unwrap();
                let bc = semi_metric_deriv_l2(&b, &c).unwrap();
                let ac = semi_metric_deriv_l2(&a, &c).unwrap();
                prop_assert!(ac <= ab + bc + 1e-9);
            }

            #[test]
            fn symmetric(a in curve(), b in curve()) {
                prop_assert_eq!(semi_metric_deriv_l2(&a, &b).unwrap(), semi_metric_deriv_l2(&b, &a).unwrap());
            }
        }
    }
}
