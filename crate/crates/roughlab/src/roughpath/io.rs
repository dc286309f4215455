use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::grid::TimeGrid;
use super::path::GridPath;
use super::rough::RoughPath;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Decimal with 17 significant digits; parses back to the same bits.
pub fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Provenance attached to serialized paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub generator: String,
    pub seed: Option<u64>,
    pub stream: Vec<String>,
}

/// JSON envelope for a rough path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoughPathEnvelope {
    pub times: Vec<f64>,
    pub dim: usize,
    pub values: Vec<Vec<f64>>,
    /// One row-major `dim x dim` block per grid cell.
    pub level2: Vec<Vec<f64>>,
    pub p: Option<f64>,
    pub provenance: Provenance,
}

impl RoughPathEnvelope {
    pub fn from_rough_path<S: Scalar>(rp: &RoughPath<S>, p: Option<f64>, provenance: Provenance) -> Self {
        let d = rp.dim();
        Self {
            times: rp.grid().times().iter().map(|t| t.as_f64()).collect(),
            dim: d,
            values: (0..rp.len())
                .map(|i| rp.path().value(i).iter().map(|x| x.as_f64()).collect())
                .collect(),
            level2: (0..rp.grid().cells())
                .map(|k| rp.cell_level2(k).iter().map(|x| x.as_f64()).collect())
                .collect(),
            p,
            provenance,
        }
    }

    pub fn to_rough_path(&self) -> Result<RoughPath<f64>> {
        let grid = TimeGrid::new(self.times.clone())?;
        let path = GridPath::from_rows(grid, &self.values)?;
        if path.dim() != self.dim {
            return Err(Error::Serialization("dimension field disagrees with values".into()));
        }
        RoughPath::new(path, self.level2.concat())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Columnar CSV: `time,x0,x1,...`.
pub fn path_to_csv<S: Scalar>(path: &GridPath<S>) -> String {
    let mut out = String::from("time");
    for c in 0..path.dim() {
        let _ = write!(out, ",x{}", c);
    }
    out.push('\n');
    for i in 0..path.len() {
        out.push_str(&fmt17(path.grid().time(i).as_f64()));
        for &x in path.value(i) {
            out.push(',');
            out.push_str(&fmt17(x.as_f64()));
        }
        out.push('\n');
    }
    out
}

pub fn path_from_csv(text: &str) -> Result<GridPath<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Serialization("empty csv".into()))?;
    let dim = header.split(',').count() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::Serialization(format!("line {}: expected {} fields", n + 2, dim + 1)));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Serialization(format!("line {}: {}", n + 2, e)))
        };
        times.push(parse(fields[0])?);
        for f in &fields[1..] {
            values.push(parse(f)?);
        }
    }
    GridPath::new(TimeGrid::new(times)?, dim, values)
}
