//! The ambient metric space: a finite point cloud with a descriptor-driven
//! distance.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent of an `l^p` metric, with `p = inf` kept as its own case.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => ser.serialize_f64(*p),
            Exponent::Infinity => ser.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(p) => Ok(Exponent::Finite(p)),
            Raw::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => {
                Ok(Exponent::Infinity)
            }
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad exponent {s:?}"))),
        }
    }
}

/// Closed enumeration of supported metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Metric {
    /// `(sum |x_i - y_i|^p)^(1/p)`, or the max-norm for `p = inf`.
    EuclideanP { p: Exponent },
    /// `d_base(x, y)^alpha` for `0 < alpha <= 1`.
    Snowflake { base: Box<Metric>, alpha: f64 },
    /// Distances read from an explicit `N x N` table stored on the cloud.
    CustomTable,
}

impl Metric {
    pub fn euclidean() -> Self {
        Metric::EuclideanP {
            p: Exponent::Finite(2.0),
        }
    }

    pub fn lp(p: f64) -> Self {
        Metric::EuclideanP {
            p: Exponent::Finite(p),
        }
    }

    pub fn max_norm() -> Self {
        Metric::EuclideanP {
            p: Exponent::Infinity,
        }
    }

    pub fn snowflake(base: Metric, alpha: f64) -> Self {
        Metric::Snowflake {
            base: Box::new(base),
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Metric::EuclideanP {
                p: Exponent::Finite(p),
            } if !(p.is_finite() && *p >= 1.0) => Err(Error::InvalidInput(format!(
                "l^p exponent must satisfy p >= 1 or p = inf, got {p}"
            ))),
            Metric::EuclideanP { .. } | Metric::CustomTable => Ok(()),
            Metric::Snowflake { base, alpha } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "snowflake exponent must lie in (0, 1], got {alpha}"
                    )));
                }
                if matches!(**base, Metric::CustomTable) {
                    return Err(Error::InvalidInput(
                        "snowflake of a custom table is not supported; snowflake the table itself"
                            .into(),
                    ));
                }
                base.validate()
            }
        }
    }

    /// Degree `h` with `d(c x, c y) = c^h d(x, y)` under coordinate scaling.
    pub fn homogeneity(&self) -> f64 {
        match self {
            Metric::EuclideanP { .. } | Metric::CustomTable => 1.0,
            Metric::Snowflake { base, alpha } => alpha * base.homogeneity(),
        }
    }

    /// Distance between two coordinate vectors. Not meaningful for
    /// [`Metric::CustomTable`].
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Metric::EuclideanP { p } => {
                let diffs = x.iter().zip(y).map(|(a, b)| (a - b).abs());
                match *p {
                    Exponent::Infinity => diffs.fold(0.0, f64::max),
                    Exponent::Finite(1.0) => diffs.sum(),
                    Exponent::Finite(2.0) => diffs.map(|d| d * d).sum::<f64>().sqrt(),
                    Exponent::Finite(p) => diffs.map(|d| d.powf(p)).sum::<f64>().powf(1.0 / p),
                }
            }
            Metric::Snowflake { base, alpha } => base.eval(x, y).powf(*alpha),
            Metric::CustomTable => f64::NAN,
        }
    }
}

/// Finite metric space: points `0..len()` with coordinates and a metric.
///
/// Immutable after construction; the diameter is cached.
#[derive(Clone, Debug)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    metric: Metric,
    table: Option<Vec<f64>>,
    len: usize,
    diameter: f64,
}

impl PointCloud {
    /// Builds a coordinate cloud. All points must have the same dimension.
    pub fn new(metric: Metric, points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput(
                "all points must have the same number of coordinates".into(),
            ));
        }
        let len = points.len();
        Self::from_flat(metric, dim, len, points.into_iter().flatten().collect())
    }

    pub fn from_flat(metric: Metric, dim: usize, len: usize, coords: Vec<f64>) -> Result<Self> {
        metric.validate()?;
        if matches!(metric, Metric::CustomTable) {
            return Err(Error::InvalidInput(
                "custom-table metric needs a distance table; use PointCloud::with_table".into(),
            ));
        }
        if dim == 0 && len > 0 {
            return Err(Error::InvalidInput("coordinate metric needs dimension >= 1".into()));
        }
        if coords.len() != dim * len {
            return Err(Error::InvalidInput("coordinate buffer has wrong length".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("coordinates must be finite".into()));
        }
        Ok(Self::finish(PointCloud {
            dim,
            coords,
            metric,
            table: None,
            len,
            diameter: 0.0,
        }))
    }

    /// Builds a cloud whose distances come from a row-major `N x N` table.
    /// Coordinates are optional (`dim = 0`) and are only used by
    /// coordinate-based kernels.
    pub fn with_table(points: Vec<Vec<f64>>, distances: Vec<f64>) -> Result<Self> {
        let len = if points.is_empty() {
            (distances.len() as f64).sqrt().round() as usize
        } else {
            points.len()
        };
        if distances.len() != len * len {
            return Err(Error::InvalidInput(format!(
                "distance table must be {len} x {len}, got {} entries",
                distances.len()
            )));
        }
        if distances.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidInput(
                "table distances must be finite and nonnegative".into(),
            ));
        }
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput(
                "all points must have the same number of coordinates".into(),
            ));
        }
        Ok(Self::finish(PointCloud {
            dim,
            coords: points.into_iter().flatten().collect(),
            metric: Metric::CustomTable,
            table: Some(distances),
            len,
            diameter: 0.0,
        }))
    }

    fn finish(mut self) -> Self {
        self.diameter = self.compute_diameter();
        self
    }

    fn compute_diameter(&self) -> f64 {
        (0..self.len)
            .into_par_iter()
            .map(|i| {
                (i + 1..self.len)
                    .map(|j| self.dist(i, j))
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Recomputes the diameter from scratch (the cached value must agree).
    pub fn recompute_diameter(&self) -> f64 {
        self.compute_diameter()
    }

    pub fn coords(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn table(&self) -> Option<&[f64]> {
        self.table.as_deref()
    }

    pub fn check_id(&self, i: usize) -> Result<()> {
        if i < self.len {
            Ok(())
        } else {
            Err(Error::UnknownId {
                id: i,
                len: self.len,
            })
        }
    }

    /// `d(i, j)` with id validation.
    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        self.check_id(i)?;
        self.check_id(j)?;
        Ok(self.dist(i, j))
    }

    /// `d(i, j)` for ids known to be valid. Arguments are put in canonical
    /// order, so `dist(i, j)` and `dist(j, i)` are bit-identical.
    #[inline]
    pub(crate) fn dist(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.raw_dist(a, b)
    }

    /// Distance evaluated in the given argument order.
    #[inline]
    fn raw_dist(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.table {
            Some(t) => t[i * self.len + j],
            None => self.metric.eval(self.coords(i), self.coords(j)),
        }
    }

    /// Divides all distances by the diameter. Returns the new cloud and the
    /// applied divisor.
    ///
    /// The result has diameter at most 1 and within a few ulps of 1: if the
    /// rounded coordinates overshoot, the divisor is nudged up until the
    /// recomputed diameter no longer exceeds 1.
    pub fn rescale_to_unit_diameter(&self) -> Result<(PointCloud, f64)> {
        if self.len < 2 || self.diameter == 0.0 {
            return Err(Error::Degenerate(
                "rescaling needs at least two distinct points".into(),
            ));
        }
        if self.diameter == 1.0 {
            return Ok((self.clone(), 1.0));
        }
        let mut scale = self.diameter;
        loop {
            let cloud = self.scaled_by(scale);
            if cloud.diameter <= 1.0 {
                return Ok((cloud, scale));
            }
            scale = scale.next_up();
        }
    }

    fn scaled_by(&self, scale: f64) -> PointCloud {
        let mut out = self.clone();
        match &mut out.table {
            Some(t) => t.iter_mut().for_each(|d| *d /= scale),
            None => {
                let coord_scale = scale.powf(1.0 / self.metric.homogeneity());
                out.coords.iter_mut().for_each(|c| *c /= coord_scale);
            }
        }
        out.finish()
    }

    /// Restriction to a subset of ids (renumbered in the given order).
    pub fn restrict(&self, ids: &[usize]) -> Result<PointCloud> {
        for &i in ids {
            self.check_id(i)?;
        }
        match &self.table {
            Some(t) => {
                let mut table = Vec::with_capacity(ids.len() * ids.len());
                for &i in ids {
                    for &j in ids {
                        table.push(t[i * self.len + j]);
                    }
                }
                let points = ids.iter().map(|&i| self.coords(i).to_vec()).collect();
                PointCloud::with_table(points, table)
            }
            None => PointCloud::new(
                self.metric.clone(),
                ids.iter().map(|&i| self.coords(i).to_vec()).collect(),
            ),
        }
    }
}

/// Outcome of [`validate_metric`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub symmetry_ok: bool,
    pub identity_ok: bool,
    pub triangle_ok: bool,
    /// Triple `(x, y, z)` maximizing `d(x,z) - d(x,y) - d(y,z)` relative to
    /// `d(x,y) + d(y,z)`; ties go to the lexicographically smallest triple.
    pub worst_triple: Option<(usize, usize, usize)>,
    pub worst_violation: f64,
    pub triples_checked: u64,
    pub exhaustive: bool,
}

/// Clouds up to this size get an exhaustive triangle check.
pub const EXHAUSTIVE_TRIANGLE_LIMIT: usize = 1000;
/// Number of sampled triples for larger clouds.
pub const SAMPLED_TRIPLES: u64 = 1_000_000;
/// Relative slack for rounding in the triangle inequality.
const TRIANGLE_RTOL: f64 = 1e-12;

/// Checks the metric axioms on the cloud. Failures are reported, not raised.
pub fn validate_metric(cloud: &PointCloud, seed: u64) -> MetricReport {
    let n = cloud.len();
    let mut symmetry_ok = true;
    let mut identity_ok = true;
    for i in 0..n {
        if cloud.raw_dist(i, i) != 0.0 {
            identity_ok = false;
        }
        for j in i + 1..n {
            let (a, b) = (cloud.raw_dist(i, j), cloud.raw_dist(j, i));
            if a != b {
                symmetry_ok = false;
            }
            if a <= 0.0 || b <= 0.0 {
                identity_ok = false;
            }
        }
    }
    if let Some(t) = cloud.table() {
        identity_ok &= (0..n).all(|i| t[i * n + i] == 0.0);
    }

    // Relative violation of d(x,z) <= d(x,y) + d(y,z).
    let score = |x: usize, y: usize, z: usize| -> f64 {
        let rhs = cloud.raw_dist(x, y) + cloud.raw_dist(y, z);
        let lhs = cloud.raw_dist(x, z);
        (lhs - rhs) / rhs.max(f64::MIN_POSITIVE)
    };
    let better = |a: (f64, (usize, usize, usize)), b: (f64, (usize, usize, usize))| {
        if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
            b
        } else {
            a
        }
    };

    let exhaustive = n <= EXHAUSTIVE_TRIANGLE_LIMIT;
    let (worst, checked) = if n < 3 {
        (None, 0)
    } else if exhaustive {
        let best = (0..n)
            .into_par_iter()
            .filter_map(|x| {
                let mut best: Option<(f64, (usize, usize, usize))> = None;
                for y in (0..n).filter(|&y| y != x) {
                    for z in (0..n).filter(|&z| z != x && z != y) {
                        let cand = (score(x, y, z), (x, y, z));
                        best = Some(match best {
                            None => cand,
                            Some(b) => better(b, cand),
                        });
                    }
                }
                best
            })
            .collect::<Vec<_>>()
            .into_iter()
            .reduce(better);
        (best, (n * (n - 1) * (n - 2)) as u64)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<(f64, (usize, usize, usize))> = None;
        let mut count = 0;
        while count < SAMPLED_TRIPLES {
            let (x, y, z) = (
                rng.random_range(0..n),
                rng.random_range(0..n),
                rng.random_range(0..n),
            );
            if x == y || y == z || x == z {
                continue;
            }
            count += 1;
            let cand = (score(x, y, z), (x, y, z));
            best = Some(match best {
                None => cand,
                Some(b) => better(b, cand),
            });
        }
        (best, count)
    };

    let worst_violation = worst.map_or(f64::NEG_INFINITY, |w| w.0);
    MetricReport {
        symmetry_ok,
        identity_ok,
        triangle_ok: worst_violation <= TRIANGLE_RTOL,
        worst_triple: worst.map(|w| w.1),
        worst_violation,
        triples_checked: checked,
        exhaustive,
    }
}

/// On-disk form of a point cloud.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointCloudFile {
    pub metric: Metric,
    pub points: Vec<PointRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointRecord {
    pub id: usize,
    pub coords: Vec<f64>,
}

impl PointCloudFile {
    pub fn from_cloud(cloud: &PointCloud) -> Self {
        PointCloudFile {
            metric: cloud.metric.clone(),
            points: (0..cloud.len())
                .map(|id| PointRecord {
                    id,
                    coords: cloud.coords(id).to_vec(),
                })
                .collect(),
            distances: cloud.table.clone(),
        }
    }

    pub fn into_cloud(self) -> Result<PointCloud> {
        let mut points = self.points;
        points.sort_by_key(|p| p.id);
        if points.iter().enumerate().any(|(k, p)| p.id != k) {
            return Err(Error::InvalidInput(
                "point ids must be unique and contiguous from 0".into(),
            ));
        }
        let coords: Vec<Vec<f64>> = points.into_iter().map(|p| p.coords).collect();
        match (self.metric, self.distances) {
            (Metric::CustomTable, Some(d)) => PointCloud::with_table(coords, d),
            (Metric::CustomTable, None) => Err(Error::InvalidInput(
                "custom_table metric requires a \"distances\" array".into(),
            )),
            (_, Some(_)) => Err(Error::InvalidInput(
                "\"distances\" is only allowed with the custom_table metric".into(),
            )),
            (metric, None) => PointCloud::new(metric, coords),
        }
    }

    pub fn load(path: &Path) -> Result<PointCloud> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: PointCloudFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        file.into_cloud()
    }
}
