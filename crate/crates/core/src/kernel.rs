//! Antisymmetric `s`-dimensional kernels and their certified size bounds.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::PointCloud;

/// Base expressions available to [`KernelFamily::Generic`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "base", rename_all = "snake_case")]
pub enum BaseKernel {
    /// `b = 0`.
    Zero,
    /// `b(x, y) = d(x, y)^-s` (symmetric; antisymmetrizes to zero).
    InversePower,
    /// `b(x, y) = (x_i - y_i) d(x, y)^(-s-1)` in the cloud's own metric.
    Directional { coordinate: usize },
    /// `b(x, y) = (1 + tanh x_i) d(x, y)^-s`; antisymmetrizes to
    /// `(tanh x_i - tanh y_i) / 2 * d^-s`.
    TiltedPower { coordinate: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// `(x_i - y_i) / |x - y|^(n+1)` with the Euclidean norm of the
    /// coordinate difference. `coordinate` is 1-based.
    CoordinateRiesz { coordinate: usize, n: u32 },
    /// `(b(x,y) - b(y,x)) / 2`, or `b` itself when `antisymmetrize` is off
    /// (diagnostics only).
    Generic {
        #[serde(flatten)]
        base: BaseKernel,
        #[serde(default = "yes")]
        antisymmetrize: bool,
    },
}

fn yes() -> bool {
    true
}

/// A kernel together with its dimension `s` and claimed size constant `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub family: KernelFamily,
    pub s: f64,
    #[serde(default = "one")]
    pub c: f64,
}

fn one() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn riesz(coordinate: usize, n: u32) -> Self {
        KernelSpec {
            family: KernelFamily::CoordinateRiesz { coordinate, n },
            s: f64::from(n),
            c: 1.0,
        }
    }

    pub fn generic(base: BaseKernel, s: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Generic {
                base,
                antisymmetrize: true,
            },
            s,
            c: 1.0,
        }
    }

    /// The base expression used as-is, without antisymmetrization.
    pub fn raw(base: BaseKernel, s: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Generic {
                base,
                antisymmetrize: false,
            },
            s,
            c: 1.0,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    /// Checks that the kernel can be evaluated on `cloud`.
    pub fn validate_for(&self, cloud: &PointCloud) -> Result<()> {
        if !(self.s > 0.0) {
            return Err(Error::InvalidInput(format!("kernel dimension s must be > 0, got {}", self.s)));
        }
        let coordinate = match &self.family {
            KernelFamily::CoordinateRiesz { coordinate, n } => {
                if *n == 0 {
                    return Err(Error::InvalidInput("Riesz parameter n must be >= 1".into()));
                }
                Some(*coordinate)
            }
            KernelFamily::Generic { base, .. } => match base {
                BaseKernel::Directional { coordinate } | BaseKernel::TiltedPower { coordinate } => {
                    Some(*coordinate)
                }
                BaseKernel::Zero | BaseKernel::InversePower => None,
            },
        };
        match coordinate {
            Some(i) if i == 0 || i > cloud.dim() => Err(Error::InvalidInput(format!(
                "kernel coordinate {i} is out of range for {}-dimensional points (1-based)",
                cloud.dim()
            ))),
            _ => Ok(()),
        }
    }

    /// `k(x, y)` with id and diagonal checks.
    pub fn eval_kernel(&self, cloud: &PointCloud, x: usize, y: usize) -> Result<f64> {
        cloud.check_id(x)?;
        cloud.check_id(y)?;
        if x == y {
            return Err(Error::Diagonal(x));
        }
        self.validate_for(cloud)?;
        Ok(self.eval(cloud, x, y))
    }

    /// `k(x, y)` for valid distinct ids. Antisymmetric families are evaluated
    /// on the canonical pair `(min, max)` and sign-flipped, so
    /// `eval(x, y) == -eval(y, x)` bit for bit.
    #[inline]
    pub(crate) fn eval(&self, cloud: &PointCloud, x: usize, y: usize) -> f64 {
        match &self.family {
            KernelFamily::Generic {
                base,
                antisymmetrize: false,
            } => self.base(base, cloud, x, y),
            _ if x < y => self.canonical(cloud, x, y),
            _ => -self.canonical(cloud, y, x),
        }
    }

    fn canonical(&self, cloud: &PointCloud, x: usize, y: usize) -> f64 {
        match &self.family {
            KernelFamily::CoordinateRiesz { coordinate, n } => {
                let (a, b) = (cloud.coords(x), cloud.coords(y));
                let norm = a
                    .iter()
                    .zip(b)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt();
                (a[coordinate - 1] - b[coordinate - 1]) / norm.powi(*n as i32 + 1)
            }
            KernelFamily::Generic { base, .. } => {
                (self.base(base, cloud, x, y) - self.base(base, cloud, y, x)) / 2.0
            }
        }
    }

    fn base(&self, base: &BaseKernel, cloud: &PointCloud, x: usize, y: usize) -> f64 {
        let d = cloud.dist(x, y);
        match base {
            BaseKernel::Zero => 0.0,
            BaseKernel::InversePower => d.powf(-self.s),
            BaseKernel::Directional { coordinate } => {
                let i = coordinate - 1;
                (cloud.coords(x)[i] - cloud.coords(y)[i]) * d.powf(-self.s - 1.0)
            }
            BaseKernel::TiltedPower { coordinate } => {
                (1.0 + cloud.coords(x)[coordinate - 1].tanh()) * d.powf(-self.s)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntisymmetryReport {
    pub ok: bool,
    pub worst_pair: Option<(usize, usize)>,
    pub worst_residual: f64,
    pub max_abs: f64,
}

/// Relative tolerance for [`check_antisymmetry`].
pub const ANTISYMMETRY_RTOL: f64 = 1e-13;

/// `max |k(x,y) + k(y,x)|` over distinct pairs.
pub fn check_antisymmetry(k: &KernelSpec, cloud: &PointCloud) -> Result<AntisymmetryReport> {
    if cloud.len() < 2 {
        return Err(Error::Degenerate("antisymmetry check needs at least two points".into()));
    }
    k.validate_for(cloud)?;
    let n = cloud.len();
    let rows: Vec<(f64, f64, usize)> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut worst = (f64::NEG_INFINITY, 0.0, x + 1);
            for y in x + 1..n {
                let (a, b) = (k.eval(cloud, x, y), k.eval(cloud, y, x));
                let res = (a + b).abs();
                let mag = a.abs().max(b.abs());
                if res > worst.0 {
                    worst.0 = res;
                    worst.2 = y;
                }
                worst.1 = f64::max(worst.1, mag);
            }
            worst
        })
        .collect();
    let mut report = AntisymmetryReport {
        ok: true,
        worst_pair: None,
        worst_residual: 0.0,
        max_abs: 0.0,
    };
    let mut best = f64::NEG_INFINITY;
    for (x, &(res, mag, y)) in rows.iter().enumerate() {
        report.max_abs = report.max_abs.max(mag);
        if y < n && res > best {
            best = res;
            report.worst_residual = res;
            report.worst_pair = Some((x, y));
        }
    }
    report.ok = report.worst_residual <= ANTISYMMETRY_RTOL * report.max_abs;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeBound {
    pub s: f64,
    pub c_certified: f64,
    pub witness_pair: Option<(usize, usize)>,
}

/// `max |k(x,y)| d(x,y)^s` over distinct pairs, measured in the cloud's own
/// metric.
pub fn check_size_bound(k: &KernelSpec, cloud: &PointCloud, s: f64) -> Result<SizeBound> {
    if cloud.len() < 2 {
        return Err(Error::Degenerate("size bound needs at least two points".into()));
    }
    k.validate_for(cloud)?;
    let n = cloud.len();
    let rows: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = (f64::NEG_INFINITY, x + 1);
            for y in x + 1..n {
                let v = k.eval(cloud, x, y).abs().max(k.eval(cloud, y, x).abs())
                    * cloud.dist(x, y).powf(s);
                if v > best.0 {
                    best = (v, y);
                }
            }
            best
        })
        .collect();
    let mut out = SizeBound {
        s,
        c_certified: 0.0,
        witness_pair: None,
    };
    let mut best = f64::NEG_INFINITY;
    for (x, &(v, y)) in rows.iter().enumerate() {
        if y < n && v > best {
            best = v;
            out.c_certified = v;
            out.witness_pair = Some((x, y));
        }
    }
    Ok(out)
}
