//! Univariate, discrete and product kernels.
//!
//! Continuous kernels have compact support, either `[-1, 1]` for the
//! symmetric kinds or `[0, 1]` for the asymmetric quadratic used with
//! non-negative (semi-)metric distances. Discrete kernels take a smoothing
//! parameter in a bounded interval and a pair of integer codes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel choice for one regressor component.
///
/// Config files name the kinds `"epanechnikov"`, `"uniform"`, `"quartic"`,
/// `"asymq"`, `"aitchison"` and `"wvr"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kernel {
    #[serde(rename = "epanechnikov")]
    Epanechnikov,
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "quartic")]
    Quartic,
    /// `1 - u^2` on `[0, 1]`, left unnormalized.
    #[serde(rename = "asymq")]
    AsymmetricQuadratic,
    /// Unordered categorical weights: `1 - h` on a match, `h` otherwise.
    #[serde(rename = "aitchison")]
    AitchisonAitkin,
    /// Ordered geometric weights: `1 - h` on a match, `(1 - h) h^|i-j| / 2` otherwise.
    #[serde(rename = "wvr")]
    WangVanRyzin,
}

/// Support of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    SymmetricUnit,
    PositiveUnit,
    Discrete,
}

impl Kernel {
    pub const ALL: [Kernel; 6] = [
        Kernel::Epanechnikov,
        Kernel::Uniform,
        Kernel::Quartic,
        Kernel::AsymmetricQuadratic,
        Kernel::AitchisonAitkin,
        Kernel::WangVanRyzin,
    ];

    pub fn support(self) -> Support {
        match self {
            Kernel::Epanechnikov | Kernel::Uniform | Kernel::Quartic => Support::SymmetricUnit,
            Kernel::AsymmetricQuadratic => Support::PositiveUnit,
            Kernel::AitchisonAitkin | Kernel::WangVanRyzin => Support::Discrete,
        }
    }

    pub fn is_discrete(self) -> bool {
        self.support() == Support::Discrete
    }

    /// Config-file name of the kernel.
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Uniform => "uniform",
            Kernel::Quartic => "quartic",
            Kernel::AsymmetricQuadratic => "asymq",
            Kernel::AitchisonAitkin => "aitchison",
            Kernel::WangVanRyzin => "wvr",
        }
    }

    pub fn from_name(name: &str) -> Option<Kernel> {
        Kernel::ALL.iter().copied().find(|k| k.name() == name)
    }

    /// Evaluates a continuous kernel at `u`. Discrete kinds return 0.
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Uniform => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            Kernel::Quartic => {
                if u.abs() <= 1.0 {
                    let a = 1.0 - u * u;
                    0.9375 * a * a
                } else {
                    0.0
                }
            }
            Kernel::AsymmetricQuadratic => {
                if (0.0..=1.0).contains(&u) {
                    1.0 - u * u
                } else {
                    0.0
                }
            }
            Kernel::AitchisonAitkin | Kernel::WangVanRyzin => 0.0,
        }
    }

    /// Admissible smoothing-parameter interval of a discrete kernel.
    pub fn discrete_range(self) -> Option<(f64, f64)> {
        match self {
            Kernel::AitchisonAitkin => Some((0.0, 0.5)),
            Kernel::WangVanRyzin => Some((0.0, 1.0)),
            _ => None,
        }
    }

    /// Discrete kernel weight between codes `i` and `j` at smoothing `h`.
    pub fn eval_discrete(self, h: f64, i: u32, j: u32) -> Result<f64> {
        let (low, high) = self
            .discrete_range()
            .ok_or(Error::NotApplicable("eval_discrete on a continuous kernel"))?;
        if !(low..=high).contains(&h) {
            return Err(Error::BandwidthOutOfRange { h, low, high });
        }
        Ok(self.discrete_weight(h, i, j))
    }

    /// Unchecked discrete weight; `h` must already lie in the admissible range.
    #[inline]
    pub(crate) fn discrete_weight(self, h: f64, i: u32, j: u32) -> f64 {
        if i == j {
            return 1.0 - h;
        }
        match self {
            Kernel::AitchisonAitkin => h,
            Kernel::WangVanRyzin => {
                let d = i.abs_diff(j) as i32;
                0.5 * (1.0 - h) * h.powi(d)
            }
            _ => 0.0,
        }
    }

    /// True iff the kernel stays strictly positive on the closure of its
    /// support (`K(1) > 0`).
    pub fn is_type_one(self) -> Result<bool> {
        if self.is_discrete() {
            return Err(Error::NotApplicable("type-I classification of a discrete kernel"));
        }
        Ok(self.eval(1.0) > 0.0)
    }

    /// Derivative of `K(u)^m` on `[0, 1]`, for the shipped continuous kernels.
    pub(crate) fn power_derivative(self, u: f64, m: u32) -> f64 {
        if !(0.0..=1.0).contains(&u) || m == 0 {
            return 0.0;
        }
        let base = self.eval(u);
        let dbase = match self {
            Kernel::Epanechnikov => -1.5 * u,
            Kernel::Quartic => -3.75 * u * (1.0 - u * u),
            Kernel::AsymmetricQuadratic => -2.0 * u,
            _ => 0.0,
        };
        m as f64 * base.powi(m as i32 - 1) * dbase
    }
}

/// Product of already-evaluated per-component weights.
pub fn eval_product(specs: &[Kernel], weights: &[f64]) -> Result<f64> {
    if specs.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: specs.len(),
            got: weights.len(),
        });
    }
    Ok(specs
        .iter()
        .zip(weights)
        .map(|(k, &w)| if k.is_discrete() { w } else { k.eval(w) })
        .product())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn univariate_values() {
        assert_eq!(Kernel::Epanechnikov.eval(0.0), 0.75);
        assert_eq!(Kernel::Epanechnikov.eval(1.0), 0.0);
        assert_eq!(Kernel::Uniform.eval(0.3), 0.5);
        assert_eq!(Kernel::AsymmetricQuadratic.eval(0.5), 0.75);
        assert_eq!(Kernel::AsymmetricQuadratic.eval(-0.1), 0.0);
        assert_eq!(Kernel::Quartic.eval(0.0), 0.9375);
        assert_eq!(Kernel::Uniform.eval(1.0001), 0.0);
    }

    #[test]
    fn discrete_values() {
        let aa = Kernel::AitchisonAitkin.eval_discrete(0.1, 3, 3).unwrap();
        assert!((aa - 0.9).abs() < 1e-15);
        assert_eq!(Kernel::AitchisonAitkin.eval_discrete(0.1, 3, 4).unwrap(), 0.1);
        assert_eq!(Kernel::WangVanRyzin.eval_discrete(0.5, 2, 3).unwrap(), 0.125);
        assert_eq!(Kernel::WangVanRyzin.eval_discrete(0.0, 2, 5).unwrap(), 0.0);
        assert!(matches!(
            Kernel::AitchisonAitkin.eval_discrete(0.6, 0, 1),
            Err(Error::BandwidthOutOfRange { .. })
        ));
        assert!(Kernel::WangVanRyzin.eval_discrete(1.2, 0, 1).is_err());
        assert!(Kernel::Uniform.eval_discrete(0.2, 0, 1).is_err());
    }

    #[test]
    fn product_values() {
        let e = Kernel::Epanechnikov;
        assert_eq!(eval_product(&[e, e], &[0.0, 0.0]).unwrap(), 0.5625);
        assert_eq!(eval_product(&[e, Kernel::Uniform], &[0.5, 2.0]).unwrap(), 0.0);
        assert_eq!(eval_product(&[Kernel::AsymmetricQuadratic], &[1.0]).unwrap(), 0.0);
        assert_eq!(
            eval_product(&[e, Kernel::AitchisonAitkin], &[0.0, 0.9]).unwrap(),
            0.75 * 0.9
        );
        assert!(matches!(
            eval_product(&[e], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn type_one() {
        assert!(Kernel::Uniform.is_type_one().unwrap());
        assert!(!Kernel::Epanechnikov.is_type_one().unwrap());
        assert!(!Kernel::Quartic.is_type_one().unwrap());
        assert!(!Kernel::AsymmetricQuadratic.is_type_one().unwrap());
        assert!(Kernel::WangVanRyzin.is_type_one().is_err());
    }

    #[test]
    fn names_round_trip() {
        for k in Kernel::ALL {
            assert_eq!(Kernel::from_name(k.name()), Some(k));
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
    }

    #[test]
    fn power_derivative_matches_finite_difference() {
        for k in [Kernel::Epanechnikov, Kernel::Quartic, Kernel::AsymmetricQuadratic] {
            for m in 1..=3 {
                for i in 1..20 {
                    let u = i as f64 / 20.0;
                    let eps = 1e-6;
                    let fd = (k.eval(u + eps).powi(m) - k.eval(u - eps).powi(m)) / (2.0 * eps);
                    assert!((fd - k.power_derivative(u, m as u32)).abs() < 1e-6);
                }
            }
        }
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn continuous_kernels_integrate_to_one() {
        for k in [Kernel::Epanechnikov, Kernel::Uniform, Kernel::Quartic] {
            let total = simpson(|u| k.eval(u), -1.0, 1.0, 2000);
            assert!((total - 1.0).abs() < 1e-8, "{k:?}: {total}");
        }
        let asym = simpson(|u| Kernel::AsymmetricQuadratic.eval(u), 0.0, 1.0, 2000);
        assert!((asym - 2.0 / 3.0).abs() < 1e-8);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn symmetric_kernels_are_even(u in -2.0f64..2.0) {
                for k in [Kernel::Epanechnikov, Kernel::Uniform, Kernel::Quartic] {
                    prop_assert_eq!(k.eval(u), k.eval(-u));
                }
            }

            #[test]
            fn monotone_in_distance(a in 0.0f64..1.2, b in 0.0f64..1.2) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                for k in [Kernel::Epanechnikov, Kernel::Uniform, Kernel::Quartic, Kernel::AsymmetricQuadratic] {
                    prop_assert!(k.eval(lo) >= k.eval(hi));
                }
            }

            #[test]
            fn product_positive_iff_all_positive(w in proptest::collection::vec(-1.5f64..1.5, 1..5)) {
                let specs = vec![Kernel::Epanechnikov; w.len()];
                let p = eval_product(&specs, &w).unwrap();
                let all = w.iter().all(|&u| Kernel::Epanechnikov.eval(u) > 0.0);
                prop_assert_eq!(p > 0.0, all);
            }
        }
    }
}
