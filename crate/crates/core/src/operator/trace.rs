//! Pairings along a decreasing sequence of truncations.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{difference_bound_from, pair_sum, prepare, truncated_row, DifferenceBound, SimpleFunction};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::measure::DiscreteMeasure;

pub const TRACE_HEADER: &str = "epsilon,pairing,cauchy_diff,four_term_bound";

/// Strictly decreasing positive truncation levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "Vec<f64>")]
pub struct EpsGrid(Vec<f64>);

/// Accepted JSON forms: the string syntax of [`EpsGrid::from_str`] or an
/// array of values.
#[derive(Deserialize)]
#[serde(untagged)]
enum GridRepr {
    Spec(String),
    Values(Vec<f64>),
}

impl EpsGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("epsilon grid is empty".into()));
        }
        if values.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::InvalidInput("epsilon grid values must be positive".into()));
        }
        if values.windows(2).any(|p| p[1] >= p[0]) {
            return Err(Error::InvalidInput("epsilon grid must be strictly decreasing".into()));
        }
        Ok(EpsGrid(values))
    }

    /// `start * ratio^j` for `j < count`.
    pub fn geometric(start: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidInput(format!("ratio must lie in (0, 1), got {ratio}")));
        }
        Self::new((0..count).map(|j| start * ratio.powi(j as i32)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<GridRepr> for EpsGrid {
    type Error = Error;

    fn try_from(v: GridRepr) -> Result<Self> {
        match v {
            GridRepr::Spec(s) => s.parse(),
            GridRepr::Values(v) => EpsGrid::new(v),
        }
    }
}

impl From<EpsGrid> for Vec<f64> {
    fn from(g: EpsGrid) -> Self {
        g.0
    }
}

/// `geometric:start=0.5,ratio=0.5,count=20`, `list:1.5,0.5,0.1`, or a bare
/// comma-separated list.
impl FromStr for EpsGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::InvalidInput(format!("bad epsilon grid {s:?}: {what}"));
        let number = |v: &str| v.trim().parse::<f64>().map_err(|_| bad(&format!("{v:?} is not a number")));
        if let Some(rest) = s.strip_prefix("geometric:") {
            let (mut start, mut ratio, mut count) = (None, 0.5, None);
            for part in rest.split(',') {
                let (key, value) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                match key.trim() {
                    "start" => start = Some(number(value)?),
                    "ratio" => ratio = number(value)?,
                    "count" => {
                        count = Some(value.trim().parse::<usize>().map_err(|_| bad("count"))?)
                    }
                    other => return Err(bad(&format!("unknown key {other:?}"))),
                }
            }
            let start = start.ok_or_else(|| bad("missing start"))?;
            let count = count.ok_or_else(|| bad("missing count"))?;
            return EpsGrid::geometric(start, ratio, count);
        }
        let list = s.strip_prefix("list:").unwrap_or(s);
        EpsGrid::new(list.split(',').map(number).collect::<Result<_>>()?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingTrace {
    pub epsilon_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// `|values[j] - values[j + 1]|`.
    pub cauchy_diffs: Vec<f64>,
    /// Four-term bound for the step from `eps[j]` to `eps[j + 1]`.
    pub bound_values: Vec<f64>,
    pub steps: Vec<DifferenceBound>,
    pub ok: bool,
}

impl PairingTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for (j, (eps, v)) in self.epsilon_grid.iter().zip(&self.values).enumerate() {
            match (self.cauchy_diffs.get(j), self.bound_values.get(j)) {
                (Some(d), Some(b)) => writeln!(out, "{eps:?},{v:?},{d:?},{b:?}"),
                _ => writeln!(out, "{eps:?},{v:?},,"),
            }
            .expect("writing to a String");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Pairings at every grid level with the four-term bound for each step.
pub fn pairing_trace(
    k: &KernelSpec,
    m: &DiscreteMeasure,
    f: &SimpleFunction,
    g: &SimpleFunction,
    grid: &EpsGrid,
) -> Result<PairingTrace> {
    prepare(k, m, &[f, g])?;
    let cloud = m.cloud();
    let (fv, gv) = (f.values(cloud), g.values(cloud));
    let eps = grid.values();
    let sums: Vec<(f64, f64)> = eps.iter().map(|&e| pair_sum(k, m, &fv, &gv, |d| d > e)).collect();
    let mut steps = Vec::with_capacity(eps.len().saturating_sub(1));
    for j in 0..eps.len().saturating_sub(1) {
        let (a, b) = (sums[j], sums[j + 1]);
        steps.push(difference_bound_from(k, m, f, g, eps[j + 1], eps[j], a.0 - b.0, a.1 + b.1)?);
    }
    Ok(PairingTrace {
        epsilon_grid: eps.to_vec(),
        values: sums.iter().map(|s| s.0).collect(),
        cauchy_diffs: steps.iter().map(|s| s.lhs).collect(),
        bound_values: steps.iter().map(|s| s.rhs).collect(),
        ok: steps.iter().all(|s| s.ok),
        steps,
    })
}

/// `T_eps f(x)` along the grid.
pub fn pv_scan(
    k: &KernelSpec,
    m: &DiscreteMeasure,
    f: &SimpleFunction,
    x: usize,
    grid: &EpsGrid,
) -> Result<Vec<f64>> {
    prepare(k, m, &[f])?;
    m.cloud().check_id(x)?;
    let fv = f.values(m.cloud());
    Ok(grid
        .values()
        .iter()
        .map(|&e| truncated_row(k, m, &fv, x, &|d| d > e).0)
        .collect())
}
