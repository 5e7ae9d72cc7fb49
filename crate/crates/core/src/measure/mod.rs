//! Discrete Radon measures on a point cloud, growth constants and the radial
//! pushforward onto `[0, 1]`.

mod step;

use std::path::Path;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use step::{Interval, StepMeasure};

use crate::error::{Error, Result};
use crate::metric::{PointCloud, PointCloudFile};
use crate::rational::lift;
use crate::reduce::pairwise_sum;

/// Nonnegative weights on the points of a cloud.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    cloud: Arc<PointCloud>,
    weights: Vec<f64>,
    total_mass: f64,
}

impl DiscreteMeasure {
    pub fn new(cloud: Arc<PointCloud>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != cloud.len() {
            return Err(Error::InvalidInput(format!(
                "{} weights for a cloud of {} points",
                weights.len(),
                cloud.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total_mass = pairwise_sum(&weights);
        Ok(DiscreteMeasure {
            cloud,
            weights,
            total_mass,
        })
    }

    /// Equal weights `1/N` on every point.
    pub fn uniform(cloud: Arc<PointCloud>) -> Result<Self> {
        let n = cloud.len();
        if n == 0 {
            return Err(Error::Degenerate("uniform measure on an empty cloud".into()));
        }
        Self::new(cloud, vec![1.0 / n as f64; n])
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn cloud_arc(&self) -> &Arc<PointCloud> {
        &self.cloud
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Ids carrying positive mass (the support).
    pub fn atoms(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0)
    }

    /// Same weights on another (e.g. rescaled) cloud with the same ids.
    pub fn with_cloud(&self, cloud: Arc<PointCloud>) -> Result<Self> {
        Self::new(cloud, self.weights.clone())
    }

    /// Exact sum of the weights.
    pub fn exact_total(&self) -> Result<BigRational> {
        let mut total = BigRational::zero();
        for w in &self.weights {
            total += lift(*w)?;
        }
        Ok(total)
    }

    /// Divides by the total mass. Returns the probability measure and the
    /// divisor. If rounding leaves the exact total of the new weights above 1
    /// the divisor is nudged up, so the result always has total mass at most 1.
    pub fn normalize(&self) -> Result<(DiscreteMeasure, f64)> {
        if self.total_mass <= 0.0 {
            return Err(Error::Degenerate("cannot normalize the zero measure".into()));
        }
        let one = BigRational::one();
        if self.total_mass == 1.0 && self.exact_total()? <= one {
            return Ok((self.clone(), 1.0));
        }
        let mut scale = self.total_mass;
        let mut step = scale.next_up() - scale;
        loop {
            let weights: Vec<f64> = self.weights.iter().map(|w| w / scale).collect();
            let m = DiscreteMeasure::new(self.cloud.clone(), weights)?;
            if m.total_mass <= 1.0 && m.exact_total()? <= one {
                return Ok((m, scale));
            }
            scale += step;
            step *= 2.0;
        }
    }

    /// Mass of the closed ball `B(z, r) = {y : d(z, y) <= r}`.
    pub fn ball_mass(&self, z: usize, r: f64) -> Result<f64> {
        self.cloud.check_id(z)?;
        if !(r >= 0.0) {
            return Err(Error::InvalidInput(format!("ball radius must be >= 0, got {r}")));
        }
        Ok(self.ball_mass_unchecked(z, r))
    }

    pub(crate) fn ball_mass_unchecked(&self, z: usize, r: f64) -> f64 {
        let inside: Vec<f64> = (0..self.weights.len())
            .filter(|&y| self.cloud.dist(z, y) <= r)
            .map(|y| self.weights[y])
            .collect();
        pairwise_sum(&inside)
    }

    /// Smallest `c` with `mu(B(x, r)) <= c r^s` for every point `x` and every
    /// `r >= r_min`.
    ///
    /// Ball mass is a right-continuous step function of `r`, so it suffices to
    /// test `r_min` and the pairwise distances above it. Ties are broken by
    /// smallest point id, then smallest radius.
    pub fn growth_constant(&self, s: f64, r_min: f64) -> Result<GrowthCertificate> {
        if !(s > 0.0) {
            return Err(Error::InvalidInput(format!("growth exponent must be > 0, got {s}")));
        }
        if !(r_min > 0.0) {
            return Err(Error::InvalidInput(format!("r_min must be > 0, got {r_min}")));
        }
        if self.cloud.is_empty() || self.total_mass == 0.0 {
            return Err(Error::Degenerate("growth constant of an empty measure".into()));
        }
        let n = self.cloud.len();
        let per_center: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|x| {
                let mut by_dist: Vec<(f64, f64)> = (0..n)
                    .map(|y| (self.cloud.dist(x, y), self.weights[y]))
                    .collect();
                by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut best = (f64::NEG_INFINITY, r_min);
                let mut cum = 0.0;
                let mut k = 0;
                // Mass of the ball of radius r_min.
                while k < n && by_dist[k].0 <= r_min {
                    cum += by_dist[k].1;
                    k += 1;
                }
                best = consider(best, cum / r_min.powf(s), r_min);
                while k < n {
                    let r = by_dist[k].0;
                    while k < n && by_dist[k].0 == r {
                        cum += by_dist[k].1;
                        k += 1;
                    }
                    best = consider(best, cum / r.powf(s), r);
                }
                best
            })
            .collect();
        let (mut c_mu, mut radius, mut center) = (f64::NEG_INFINITY, r_min, 0);
        for (x, &(ratio, r)) in per_center.iter().enumerate() {
            if ratio > c_mu {
                c_mu = ratio;
                radius = r;
                center = x;
            }
        }
        Ok(GrowthCertificate {
            s,
            r_min,
            c_mu,
            witness_center: center,
            witness_radius: radius,
        })
    }

    /// `mu_z(F) = mu{x : d(x, z) in F}` as an exact step measure on `[0, 1]`.
    ///
    /// Equal distances (exact float equality) share one atom. Points of zero
    /// weight are skipped.
    pub fn radial_pushforward(&self, z: usize) -> Result<StepMeasure> {
        self.cloud.check_id(z)?;
        if self.cloud.diameter() > 1.0 {
            return Err(Error::Precondition(format!(
                "cloud diameter {} exceeds 1; rescale to unit diameter first",
                self.cloud.diameter()
            )));
        }
        let mut by_dist: Vec<(f64, f64)> = (0..self.cloud.len())
            .filter(|&y| self.weights[y] > 0.0)
            .map(|y| (self.cloud.dist(z, y), self.weights[y]))
            .collect();
        by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<(BigRational, BigRational)> = Vec::new();
        let mut k = 0;
        while k < by_dist.len() {
            let d = by_dist[k].0;
            let mut mass = BigRational::zero();
            while k < by_dist.len() && by_dist[k].0 == d {
                mass += lift(by_dist[k].1)?;
                k += 1;
            }
            atoms.push((lift(d)?, mass));
        }
        StepMeasure::new(atoms)
    }
}

fn consider(best: (f64, f64), ratio: f64, r: f64) -> (f64, f64) {
    if ratio > best.0 {
        (ratio, r)
    } else {
        best
    }
}

/// Result of [`DiscreteMeasure::growth_constant`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthCertificate {
    pub s: f64,
    pub r_min: f64,
    pub c_mu: f64,
    pub witness_center: usize,
    pub witness_radius: f64,
}

/// On-disk form of a measure: `{"cloud": <inline cloud or path>, "weights": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureFile {
    pub cloud: CloudRef,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CloudRef {
    Path(String),
    Inline(PointCloudFile),
}

impl MeasureFile {
    pub fn from_measure(m: &DiscreteMeasure) -> Self {
        MeasureFile {
            cloud: CloudRef::Inline(PointCloudFile::from_cloud(m.cloud())),
            weights: m.weights.clone(),
        }
    }

    /// Loads a measure; a cloud given by path is resolved relative to the
    /// measure file's directory.
    pub fn load(path: &Path) -> Result<DiscreteMeasure> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: MeasureFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        let cloud = match file.cloud {
            CloudRef::Inline(c) => c.into_cloud()?,
            CloudRef::Path(p) => {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                PointCloudFile::load(&base.join(p))?
            }
        };
        DiscreteMeasure::new(Arc::new(cloud), file.weights)
    }
}
