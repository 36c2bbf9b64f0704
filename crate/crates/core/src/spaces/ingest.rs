//! CSV ingestion driven by a JSON sidecar schema.
//!
//! The schema maps column names to their role and kind:
//!
//! ```json
//! {
//!   "y":     { "role": "response" },
//!   "x":     { "role": "regressor", "kind": "scalar", "kernel": "epanechnikov" },
//!   "educ":  { "role": "regressor", "kind": "ordered" },
//!   "curve": { "role": "regressor", "kind": "functional", "grid": [-1.0, 0.0, 1.0] }
//! }
//! ```
//!
//! A functional column occupies `grid.len()` consecutive CSV columns, the
//! first of which is headed `name`, `name_0` or `name[0]`. Regressors keep
//! the order in which they appear in the CSV header.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Coord, Dataset, FunctionalColumn, Query, QueryCurve, RegressorColumn, RegressorKind};
use crate::error::{Error, Result};
use crate::kernels::Kernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Response,
    Regressor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<RegressorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Kernel>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    pub columns: BTreeMap<String, ColumnSchema>,
}

/// Kernel used when the schema leaves it unspecified.
pub fn default_kernel(kind: RegressorKind) -> Kernel {
    match kind {
        RegressorKind::Scalar => Kernel::Epanechnikov,
        RegressorKind::Ordered => Kernel::WangVanRyzin,
        RegressorKind::Categorical => Kernel::AitchisonAitkin,
        RegressorKind::Functional => Kernel::AsymmetricQuadratic,
    }
}

impl Schema {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Schema> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Schema::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Schema> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        let responses = self.columns.values().filter(|c| c.role == Role::Response).count();
        if responses > 1 {
            return Err(Error::InvalidInput("schema declares more than one response".into()));
        }
        for (name, c) in &self.columns {
            if c.role == Role::Regressor {
                let kind = c
                    .kind
                    .ok_or_else(|| Error::InvalidInput(format!("regressor {name} has no kind")))?;
                if kind == RegressorKind::Functional && c.grid.as_ref().map_or(true, |g| g.len() < 3) {
                    return Err(Error::InvalidInput(format!(
                        "functional regressor {name} needs a grid of at least 3 points"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Parsed table: optional response plus regressor columns and their kernels.
#[derive(Debug, Clone)]
pub struct Table {
    pub y: Option<Vec<f64>>,
    pub names: Vec<String>,
    pub columns: Vec<RegressorColumn>,
    pub kernels: Vec<Kernel>,
}

impl Table {
    pub fn into_dataset(self) -> Result<(Dataset, Vec<Kernel>)> {
        let y = self
            .y
            .ok_or_else(|| Error::InvalidInput("data file has no response column".into()))?;
        let ds = Dataset::with_names(y, self.columns, self.names)?;
        ds.check_kernels(&self.kernels)?;
        Ok((ds, self.kernels))
    }

    /// Rows as query points.
    pub fn queries(&self) -> Vec<Query> {
        let n = self.columns.first().map_or(0, RegressorColumn::len);
        (0..n)
            .map(|i| self.columns.iter().map(|c| c.coord(i)).collect())
            .collect()
    }
}

enum Slot {
    Response,
    Scalar(Vec<f64>),
    Codes(RegressorKind, Vec<u32>),
    Curves(Arc<[f64]>, Vec<Vec<f64>>),
}

struct Binding {
    name: String,
    start: usize,
    kernel: Kernel,
    slot: Slot,
}

fn header_matches(name: &str, header: &str) -> bool {
    header == name || header == format!("{name}_0") || header == format!("{name}[0]")
}

/// Reads a CSV with `schema`. The response column is optional so the same
/// routine parses query files.
pub fn read_table<R: Read>(reader: R, schema: &Schema) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();

    let mut bindings = Vec::new();
    let mut response_found = false;
    for (name, col) in &schema.columns {
        let start = headers.iter().position(|h| header_matches(name, h));
        let Some(start) = start else {
            if col.role == Role::Response {
                continue;
            }
            return Err(Error::InvalidInput(format!("column {name} not found in CSV header")));
        };
        let slot = match col.role {
            Role::Response => {
                response_found = true;
                Slot::Response
            }
            Role::Regressor => match col.kind.expect("validated") {
                RegressorKind::Scalar => Slot::Scalar(Vec::new()),
                k @ (RegressorKind::Ordered | RegressorKind::Categorical) => Slot::Codes(k, Vec::new()),
                RegressorKind::Functional => {
                    let grid = col.grid.clone().expect("validated");
                    if start + grid.len() > headers.len() {
                        return Err(Error::InvalidInput(format!(
                            "functional column {name} needs {} CSV columns starting at {}",
                            grid.len(),
                            start + 1
                        )));
                    }
                    Slot::Curves(grid.into(), Vec::new())
                }
            },
        };
        let kernel = col
            .kernel
            .unwrap_or_else(|| col.kind.map_or(Kernel::Epanechnikov, default_kernel));
        bindings.push(Binding {
            name: name.clone(),
            start,
            kernel,
            slot,
        });
    }
    bindings.sort_by_key(|b| b.start);

    let mut y = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(row as u64 + 2, |p| p.line());
        let field = |k: usize, name: &str| -> Result<&str> {
            record.get(k).ok_or_else(|| {
                Error::InvalidInput(format!("line {line}: missing field for column {name}"))
            })
        };
        for b in &mut bindings {
            let parse_f = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!("line {line}: column {}: cannot parse '{s}' as a number", b.name))
                })
            };
            match &mut b.slot {
                Slot::Response => y.push(parse_f(field(b.start, &b.name)?)?),
                Slot::Scalar(v) => v.push(parse_f(field(b.start, &b.name)?)?),
                Slot::Codes(_, v) => {
                    let s = field(b.start, &b.name)?;
                    let code = s
                        .parse::<u32>()
                        .ok()
                        .or_else(|| {
                            s.parse::<f64>()
                                .ok()
                                .filter(|f| f.fract() == 0.0 && *f >= 0.0 && *f <= u32::MAX as f64)
                                .map(|f| f as u32)
                        })
                        .ok_or_else(|| {
                            Error::InvalidInput(format!(
                                "line {line}: column {}: '{s}' is not a non-negative integer code",
                                b.name
                            ))
                        })?;
                    v.push(code);
                }
                Slot::Curves(grid, curves) => {
                    let mut values = Vec::with_capacity(grid.len());
                    for k in 0..grid.len() {
                        values.push(parse_f(field(b.start + k, &b.name)?)?);
                    }
                    curves.push(values);
                }
            }
        }
    }

    let mut names = Vec::new();
    let mut columns = Vec::new();
    let mut kernels = Vec::new();
    for b in bindings {
        let col = match b.slot {
            Slot::Response => continue,
            Slot::Scalar(v) => RegressorColumn::Scalar(v),
            Slot::Codes(RegressorKind::Ordered, v) => RegressorColumn::Ordered(v),
            Slot::Codes(_, v) => RegressorColumn::Categorical(v),
            Slot::Curves(grid, curves) => RegressorColumn::Functional(FunctionalColumn::new(grid, curves)?),
        };
        names.push(b.name);
        columns.push(col);
        kernels.push(b.kernel);
    }
    Ok(Table {
        y: response_found.then_some(y),
        names,
        columns,
        kernels,
    })
}

pub fn read_table_path(path: impl AsRef<Path>, schema: &Schema) -> Result<Table> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_table(file, schema)
}

/// Loads a dataset (response required) and the schema's kernels.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<(Dataset, Vec<Kernel>)> {
    read_table_path(path, schema)?.into_dataset()
}

/// Builds a query coordinate from a curve sample without a dataset.
pub fn curve_coord(grid: &Arc<[f64]>, values: Vec<f64>) -> Result<Coord> {
    let c = super::Curve::new(Arc::clone(grid), values)?;
    Ok(Coord::Curve(QueryCurve::new(&c)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &str = r#"{
        "y": {"role": "response"},
        "x": {"role": "regressor", "kind": "scalar"},
        "d": {"role": "regressor", "kind": "categorical", "kernel": "aitchison"},
        "c": {"role": "regressor", "kind": "functional", "grid": [0.0, 0.5, 1.0]}
    }"#;

    #[test]
    fn reads_mixed_table() {
        let csv = "y,d,x,c_0,c_1,c_2\n1.0,0,0.5,0,1,2\n2.0,1,1.5,0,2,4\n";
        let schema = Schema::from_json(SCHEMA).unwrap();
        let (ds, kernels) = read_table(csv.as_bytes(), &schema).unwrap().into_dataset().unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.names(), &["d".to_string(), "x".into(), "c".into()]);
        assert_eq!(
            kernels,
            vec![Kernel::AitchisonAitkin, Kernel::Epanechnikov, Kernel::AsymmetricQuadratic]
        );
        assert_eq!(ds.y(), &[1.0, 2.0]);
        assert_eq!(ds.column(0), &RegressorColumn::Categorical(vec![0, 1]));
        // derivatives 2 and 4 on [0,1]: distance sqrt(∫ 2^2) = 2
        assert!((ds.column(2).pair_distance(0, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn error_names_line() {
        let csv = "y,d,x,c_0,c_1,c_2\n1.0,0,0.5,0,1,2\n2.0,1,abc,0,2,4\n";
        let schema = Schema::from_json(SCHEMA).unwrap();
        let err = read_table(csv.as_bytes(), &schema).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn missing_column_rejected() {
        let schema = Schema::from_json(SCHEMA).unwrap();
        assert!(read_table("y,x\n1,2\n".as_bytes(), &schema).is_err());
    }

    #[test]
    fn query_file_without_response() {
        let schema = Schema::from_json(r#"{"y":{"role":"response"},"x":{"role":"regressor","kind":"scalar"}}"#).unwrap();
        let t = read_table("x\n0.0\n1.0\n".as_bytes(), &schema).unwrap();
        assert!(t.y.is_none());
        assert_eq!(t.queries(), vec![vec![Coord::Scalar(0.0)], vec![Coord::Scalar(1.0)]]);
    }

    #[test]
    fn schema_requires_kind() {
        assert!(Schema::from_json(r#"{"x":{"role":"regressor"}}"#).is_err());
    }
}
