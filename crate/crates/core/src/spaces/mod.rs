//! Regressor domains, per-component distances and the scaled distance
//! vector fed to the kernels.

mod curve;
pub mod ingest;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use curve::{semi_metric_deriv_l2, trapezoid, uniform_grid, Curve};
pub(crate) use curve::{deriv_l2, derivative_values};

use crate::bandwidth::BandwidthVector;
use crate::error::{Error, Result};
use crate::kernels::Kernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    Scalar,
    Ordered,
    Categorical,
    Functional,
}

/// Curves sharing one grid, with their derivatives cached.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalColumn {
    grid: Arc<[f64]>,
    values: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
}

impl FunctionalColumn {
    pub fn new(grid: Arc<[f64]>, values: Vec<Vec<f64>>) -> Result<Self> {
        if grid.len() < 3 {
            return Err(Error::GridTooShort(grid.len()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("curve grid must be strictly increasing".into()));
        }
        let derivs = values
            .iter()
            .map(|v| {
                if v.len() != grid.len() {
                    return Err(Error::GridMismatch);
                }
                derivative_values(&grid, v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FunctionalColumn {
            grid,
            values,
            derivs,
        })
    }

    pub fn grid(&self) -> &Arc<[f64]> {
        &self.grid
    }

    pub fn curve(&self, i: usize) -> Curve {
        Curve::new(Arc::clone(&self.grid), self.values[i].clone()).expect("validated on construction")
    }

    pub fn values(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub(crate) fn pair_distance(&self, i: usize, j: usize) -> f64 {
        deriv_l2(&self.grid, &self.derivs[i], &self.derivs[j])
    }

    #[inline]
    fn distance_to(&self, i: usize, q: &QueryCurve) -> f64 {
        deriv_l2(&self.grid, &self.derivs[i], &q.deriv)
    }

    fn subset(&self, idx: &[usize]) -> Self {
        FunctionalColumn {
            grid: Arc::clone(&self.grid),
            values: idx.iter().map(|&i| self.values[i].clone()).collect(),
            derivs: idx.iter().map(|&i| self.derivs[i].clone()).collect(),
        }
    }
}

/// One regressor: a homogeneous column of observations.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressorColumn {
    Scalar(Vec<f64>),
    Ordered(Vec<u32>),
    Categorical(Vec<u32>),
    Functional(FunctionalColumn),
}

impl RegressorColumn {
    pub fn kind(&self) -> RegressorKind {
        match self {
            RegressorColumn::Scalar(_) => RegressorKind::Scalar,
            RegressorColumn::Ordered(_) => RegressorKind::Ordered,
            RegressorColumn::Categorical(_) => RegressorKind::Categorical,
            RegressorColumn::Functional(_) => RegressorKind::Functional,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RegressorColumn::Scalar(v) => v.len(),
            RegressorColumn::Ordered(v) | RegressorColumn::Categorical(v) => v.len(),
            RegressorColumn::Functional(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value of observation `i` as a query coordinate.
    pub fn coord(&self, i: usize) -> Coord {
        match self {
            RegressorColumn::Scalar(v) => Coord::Scalar(v[i]),
            RegressorColumn::Ordered(v) | RegressorColumn::Categorical(v) => Coord::Code(v[i]),
            RegressorColumn::Functional(f) => Coord::Curve(QueryCurve {
                values: f.values[i].clone(),
                deriv: f.derivs[i].clone(),
            }),
        }
    }

    /// Metric distance between two observations of this column: absolute
    /// difference for scalars and ordered codes, the 0/1 metric for
    /// categories, the derivative semi-metric for curves.
    #[inline]
    pub fn pair_distance(&self, i: usize, j: usize) -> f64 {
        match self {
            RegressorColumn::Scalar(v) => (v[i] - v[j]).abs(),
            RegressorColumn::Ordered(v) => v[i].abs_diff(v[j]) as f64,
            RegressorColumn::Categorical(v) => (v[i] != v[j]) as u8 as f64,
            RegressorColumn::Functional(f) => f.pair_distance(i, j),
        }
    }

    /// Metric distance between observation `i` and a query coordinate.
    #[inline]
    pub fn metric_distance(&self, i: usize, x: &Coord) -> Result<f64> {
        Ok(match (self, x) {
            (RegressorColumn::Scalar(v), Coord::Scalar(q)) => (v[i] - q).abs(),
            (RegressorColumn::Ordered(v), Coord::Code(c)) => v[i].abs_diff(*c) as f64,
            (RegressorColumn::Categorical(v), Coord::Code(c)) => (v[i] != *c) as u8 as f64,
            (RegressorColumn::Functional(f), Coord::Curve(q)) => {
                if q.deriv.len() != f.grid.len() {
                    return Err(Error::GridMismatch);
                }
                f.distance_to(i, q)
            }
            _ => return Err(kind_mismatch(self.kind(), x)),
        })
    }

    fn subset(&self, idx: &[usize]) -> Self {
        match self {
            RegressorColumn::Scalar(v) => RegressorColumn::Scalar(idx.iter().map(|&i| v[i]).collect()),
            RegressorColumn::Ordered(v) => RegressorColumn::Ordered(idx.iter().map(|&i| v[i]).collect()),
            RegressorColumn::Categorical(v) => {
                RegressorColumn::Categorical(idx.iter().map(|&i| v[i]).collect())
            }
            RegressorColumn::Functional(f) => RegressorColumn::Functional(f.subset(idx)),
        }
    }
}

fn kind_mismatch(kind: RegressorKind, x: &Coord) -> Error {
    Error::KindMismatch(format!("column is {kind:?}, query coordinate is {}", x.label()))
}

/// A query curve with its derivative precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryCurve {
    values: Vec<f64>,
    deriv: Vec<f64>,
}

impl QueryCurve {
    pub fn new(curve: &Curve) -> Result<Self> {
        Ok(QueryCurve {
            values: curve.values().to_vec(),
            deriv: derivative_values(curve.grid(), curve.values())?,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One coordinate of a query point.
#[derive(Debug, Clone, PartialEq)]
pub enum Coord {
    Scalar(f64),
    Code(u32),
    Curve(QueryCurve),
}

impl Coord {
    pub fn curve(c: &Curve) -> Result<Coord> {
        Ok(Coord::Curve(QueryCurve::new(c)?))
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Coord::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Coord::Scalar(_) => "scalar",
            Coord::Code(_) => "code",
            Coord::Curve(_) => "curve",
        }
    }
}

/// A point in the product regressor space.
pub type Query = Vec<Coord>;

/// Distance of one component, as consumed by the kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentDistance {
    Metric(f64),
    /// Codes are handed to the discrete kernel untouched: (observation, query).
    Codes(u32, u32),
}

/// One entry of the scaled distance vector `W_i(x)`.
pub type ScaledComponent = ComponentDistance;

/// Response vector with typed regressor columns. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    columns: Vec<RegressorColumn>,
    names: Vec<String>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, columns: Vec<RegressorColumn>) -> Result<Self> {
        let names = (0..columns.len()).map(|l| format!("x{}", l + 1)).collect();
        Dataset::with_names(y, columns, names)
    }

    pub fn with_names(y: Vec<f64>, columns: Vec<RegressorColumn>, names: Vec<String>) -> Result<Self> {
        let n = y.len();
        if names.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                got: names.len(),
            });
        }
        for c in &columns {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.len(),
                });
            }
        }
        Ok(Dataset { y, columns, names })
    }

    /// Convenience constructor for all-scalar regressors given row-major.
    pub fn from_scalar_rows(y: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let q = rows.first().map_or(0, Vec::len);
        let mut cols = vec![Vec::with_capacity(rows.len()); q];
        for r in rows {
            if r.len() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    got: r.len(),
                });
            }
            for (c, &v) in cols.iter_mut().zip(r) {
                c.push(v);
            }
        }
        Dataset::new(y, cols.into_iter().map(RegressorColumn::Scalar).collect())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn q(&self) -> usize {
        self.columns.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn columns(&self) -> &[RegressorColumn] {
        &self.columns
    }

    pub fn column(&self, l: usize) -> &RegressorColumn {
        &self.columns[l]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_all_scalar(&self) -> bool {
        self.columns.iter().all(|c| matches!(c, RegressorColumn::Scalar(_)))
    }

    /// Observation `i` as a query point.
    pub fn row_query(&self, i: usize) -> Query {
        self.columns.iter().map(|c| c.coord(i)).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            y: idx.iter().map(|&i| self.y[i]).collect(),
            columns: self.columns.iter().map(|c| c.subset(idx)).collect(),
            names: self.names.clone(),
        }
    }

    /// Same regressors, new response.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Dataset> {
        Dataset::with_names(y, self.columns.clone(), self.names.clone())
    }

    /// Keeps only the listed regressor columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Dataset {
        Dataset {
            y: self.y.clone(),
            columns: keep.iter().map(|&l| self.columns[l].clone()).collect(),
            names: keep.iter().map(|&l| self.names[l].clone()).collect(),
        }
    }

    /// Checks that each kernel suits its column: scalar and functional
    /// columns need continuous kernels, categorical columns discrete ones.
    pub fn check_kernels(&self, kernels: &[Kernel]) -> Result<()> {
        if kernels.len() != self.q() {
            return Err(Error::DimensionMismatch {
                expected: self.q(),
                got: kernels.len(),
            });
        }
        for (l, (c, k)) in self.columns.iter().zip(kernels).enumerate() {
            let ok = match c.kind() {
                RegressorKind::Scalar | RegressorKind::Functional => !k.is_discrete(),
                RegressorKind::Ordered => true,
                RegressorKind::Categorical => k.is_discrete(),
            };
            if !ok {
                return Err(Error::KindMismatch(format!(
                    "kernel {} cannot smooth {:?} column {}",
                    k.name(),
                    c.kind(),
                    self.names[l]
                )));
            }
        }
        Ok(())
    }

    pub fn check_query(&self, x: &Query) -> Result<()> {
        if x.len() != self.q() {
            return Err(Error::DimensionMismatch {
                expected: self.q(),
                got: x.len(),
            });
        }
        for (c, coord) in self.columns.iter().zip(x) {
            let ok = matches!(
                (c.kind(), coord),
                (RegressorKind::Scalar, Coord::Scalar(_))
                    | (RegressorKind::Ordered | RegressorKind::Categorical, Coord::Code(_))
                    | (RegressorKind::Functional, Coord::Curve(_))
            );
            if !ok {
                return Err(kind_mismatch(c.kind(), coord));
            }
        }
        Ok(())
    }
}

/// Distance of observation `i` of `col` to the query coordinate `x`.
pub fn component_distance(col: &RegressorColumn, i: usize, x: &Coord) -> Result<ComponentDistance> {
    match (col, x) {
        (RegressorColumn::Ordered(v) | RegressorColumn::Categorical(v), Coord::Code(c)) => {
            Ok(ComponentDistance::Codes(v[i], *c))
        }
        _ => col.metric_distance(i, x).map(ComponentDistance::Metric),
    }
}

/// `W_i(x)`: each metric component divided by its bandwidth; an infinite
/// bandwidth maps to 0 so that the component is smoothed out.
pub fn scaled_distance_vector(
    ds: &Dataset,
    i: usize,
    x: &Query,
    h: &BandwidthVector,
) -> Result<Vec<ScaledComponent>> {
    if h.len() != ds.q() {
        return Err(Error::DimensionMismatch {
            expected: ds.q(),
            got: h.len(),
        });
    }
    ds.check_query(x)?;
    ds.columns
        .iter()
        .zip(x)
        .zip(h.as_slice())
        .enumerate()
        .map(|(l, ((col, coord), &hl))| {
            if !(hl > 0.0) {
                return Err(Error::NonpositiveBandwidth { index: l, value: hl });
            }
            Ok(match component_distance(col, i, coord)? {
                ComponentDistance::Metric(d) => ComponentDistance::Metric(scale(d, hl)),
                codes => codes,
            })
        })
        .collect()
}

#[inline]
pub(crate) fn scale(d: f64, h: f64) -> f64 {
    if h.is_infinite() {
        0.0
    } else {
        d / h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_ds(x: &[f64]) -> Dataset {
        Dataset::new(vec![0.0; x.len()], vec![RegressorColumn::Scalar(x.to_vec())]).unwrap()
    }

    #[test]
    fn scalar_component_distance() {
        let col = RegressorColumn::Scalar(vec![2.0]);
        assert_eq!(
            component_distance(&col, 0, &Coord::Scalar(3.5)).unwrap(),
            ComponentDistance::Metric(1.5)
        );
    }

    #[test]
    fn codes_pass_through() {
        let col = RegressorColumn::Categorical(vec![1]);
        assert_eq!(
            component_distance(&col, 0, &Coord::Code(1)).unwrap(),
            ComponentDistance::Codes(1, 1)
        );
        assert!(matches!(
            component_distance(&col, 0, &Coord::Scalar(1.0)),
            Err(Error::KindMismatch(_))
        ));
    }

    #[test]
    fn scaled_distances() {
        let ds = scalar_ds(&[2.0]);
        let x = vec![Coord::Scalar(3.5)];
        let w = scaled_distance_vector(&ds, 0, &x, &BandwidthVector::new(vec![3.0])).unwrap();
        assert_eq!(w, vec![ComponentDistance::Metric(0.5)]);
        let w = scaled_distance_vector(&ds, 0, &x, &BandwidthVector::new(vec![f64::INFINITY])).unwrap();
        assert_eq!(w, vec![ComponentDistance::Metric(0.0)]);
        assert!(matches!(
            scaled_distance_vector(&ds, 0, &x, &BandwidthVector::new(vec![0.0])),
            Err(Error::NonpositiveBandwidth { .. })
        ));

        let ds2 = Dataset::from_scalar_rows(vec![0.0], &[vec![0.0, 0.0]]).unwrap();
        let x2 = vec![Coord::Scalar(1.0), Coord::Scalar(2.0)];
        let w = scaled_distance_vector(&ds2, 0, &x2, &BandwidthVector::new(vec![2.0, 2.0])).unwrap();
        assert_eq!(w, vec![ComponentDistance::Metric(0.5), ComponentDistance::Metric(1.0)]);
    }

    #[test]
    fn column_length_checked() {
        let err = Dataset::new(vec![1.0, 2.0], vec![RegressorColumn::Scalar(vec![1.0])]);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn kernel_compatibility() {
        let ds = Dataset::new(
            vec![0.0],
            vec![RegressorColumn::Scalar(vec![0.0]), RegressorColumn::Categorical(vec![0])],
        )
        .unwrap();
        assert!(ds.check_kernels(&[Kernel::Epanechnikov, Kernel::AitchisonAitkin]).is_ok());
        assert!(ds.check_kernels(&[Kernel::AitchisonAitkin, Kernel::AitchisonAitkin]).is_err());
        assert!(ds.check_kernels(&[Kernel::Epanechnikov, Kernel::Uniform]).is_err());
    }

    #[test]
    fn functional_column_distance_matches_semi_metric() {
        let g = uniform_grid(-1.0, 1.0, 51);
        let a = Curve::from_fn(g.clone(), |t| t.sin()).unwrap();
        let b = Curve::from_fn(g.clone(), |t| t * t).unwrap();
        let col = FunctionalColumn::new(g, vec![a.values().to_vec(), b.values().to_vec()]).unwrap();
        let direct = semi_metric_deriv_l2(&a, &b).unwrap();
        assert!((col.pair_distance(0, 1) - direct).abs() < 1e-15);
        let rc = RegressorColumn::Functional(col);
        assert!((rc.metric_distance(0, &Coord::curve(&b).unwrap()).unwrap() - direct).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn homogeneous_in_bandwidth(xs in proptest::collection::vec(-5.0f64..5.0, 2), q in -5.0f64..5.0,
                                        h1 in 0.1f64..3.0, h2 in 0.1f64..3.0) {
                let ds = Dataset::from_scalar_rows(vec![0.0], &[xs.clone()]).unwrap();
                let x = vec![Coord::Scalar(q), Coord::Scalar(-q)];
                let w1 = scaled_distance_vector(&ds, 0, &x, &BandwidthVector::new(vec![h1, h2])).unwrap();
                let w2 = scaled_distance_vector(&ds, 0, &x, &BandwidthVector::new(vec![2.0 * h1, 2.0 * h2])).unwrap();
                for (a, b) in w1.iter().zip(&w2) {
                    match (a, b) {
                        (ComponentDistance::Metric(a), ComponentDistance::Metric(b)) => {
                            prop_assert!((a - 2.0 * b).abs() <= 1e-12 * a.abs().max(1.0));
                        }
                        _ => prop_assert!(false),
                    }
                }
            }

            #[test]
            fn scalar_distance_symmetric(a in -10.0f64..10.0, b in -10.0f64..10.0) {
                let col = RegressorColumn::Scalar(vec![a, b]);
                prop_assert_eq!(col.pair_distance(0, 1), col.pair_distance(1, 0));
                prop_assert_eq!(col.metric_distance(0, &Coord::Scalar(b)).unwrap(),
                                col.metric_distance(1, &Coord::Scalar(a)).unwrap());
            }
        }
    }
}
