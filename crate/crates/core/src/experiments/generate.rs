//! Test measures: self-similar Cantor sets and seeded random clouds.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::metric::{Metric, PointCloud};

/// Largest number of atoms a generator may produce.
pub const MAX_ATOMS: usize = 1 << 16;

const FOUR_CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [0.75, 0.0], [0.0, 0.75], [0.75, 0.75]];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum GeneratorFamily {
    /// Lower-left corners of the `4^m` generation-`m` squares of the
    /// four-corner Cantor set.
    #[serde(rename = "four_corner_cantor")]
    FourCorner { level: u32 },
    /// Left endpoints of the `2^m` generation-`m` intervals of the Cantor set
    /// with maps `x -> ratio x` and `x -> ratio x + 1 - ratio`.
    #[serde(rename = "cantor_1d")]
    Cantor1d { ratio: f64, level: u32 },
    /// `count` uniform points in `[0, 1]^dim`.
    #[serde(rename = "uniform_random")]
    UniformRandom {
        count: usize,
        #[serde(default = "default_dim")]
        dim: usize,
        seed: u64,
    },
}

fn default_dim() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub family: GeneratorFamily,
    #[serde(default = "Metric::euclidean")]
    pub metric: Metric,
}

impl GeneratorSpec {
    pub fn four_corner(level: u32) -> Self {
        GeneratorSpec {
            family: GeneratorFamily::FourCorner { level },
            metric: Metric::euclidean(),
        }
    }

    pub fn cantor_1d(ratio: f64, level: u32) -> Self {
        GeneratorSpec {
            family: GeneratorFamily::Cantor1d { ratio, level },
            metric: Metric::euclidean(),
        }
    }

    pub fn uniform_random(count: usize, dim: usize, seed: u64) -> Self {
        GeneratorSpec {
            family: GeneratorFamily::UniformRandom { count, dim, seed },
            metric: Metric::euclidean(),
        }
    }

    /// Refinement level, for the self-similar families.
    pub fn level(&self) -> Option<u32> {
        match self.family {
            GeneratorFamily::FourCorner { level } | GeneratorFamily::Cantor1d { level, .. } => {
                Some(level)
            }
            GeneratorFamily::UniformRandom { .. } => None,
        }
    }

    /// Same family at another level.
    pub fn at_level(&self, level: u32) -> Option<Self> {
        let family = match &self.family {
            GeneratorFamily::FourCorner { .. } => GeneratorFamily::FourCorner { level },
            GeneratorFamily::Cantor1d { ratio, .. } => GeneratorFamily::Cantor1d { ratio: *ratio, level },
            GeneratorFamily::UniformRandom { .. } => return None,
        };
        Some(GeneratorSpec {
            family,
            metric: self.metric.clone(),
        })
    }

    pub fn atom_count(&self) -> Option<usize> {
        match self.family {
            GeneratorFamily::FourCorner { level } => 4usize.checked_pow(level),
            GeneratorFamily::Cantor1d { level, .. } => 2usize.checked_pow(level),
            GeneratorFamily::UniformRandom { count, .. } => Some(count),
        }
    }
}

/// Cloud rescaled to unit diameter, the equal-weight probability measure on
/// it, and the resolution floor below which growth is not meaningful.
#[derive(Clone, Debug)]
pub struct Generated {
    pub cloud: Arc<PointCloud>,
    pub measure: DiscreteMeasure,
    pub r_min: f64,
}

fn budget(spec: &GeneratorSpec) -> Result<usize> {
    match spec.atom_count() {
        Some(n) if (2..=MAX_ATOMS).contains(&n) => Ok(n),
        Some(n) if n < 2 => Err(Error::InvalidInput(format!("generator yields {n} atoms; need at least 2"))),
        _ => Err(Error::Resource(format!(
            "generator would exceed the budget of {MAX_ATOMS} atoms"
        ))),
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    spec.metric.validate()?;
    if matches!(spec.metric, Metric::CustomTable) {
        return Err(Error::InvalidInput("generators need a coordinate metric".into()));
    }
    let n = budget(spec)?;
    // side length of the finest cell, in coordinates
    let (points, cell): (Vec<Vec<f64>>, f64) = match spec.family {
        GeneratorFamily::FourCorner { level } => {
            let points = (0..n)
                .map(|id| {
                    let (mut x, mut y, mut scale) = (0.0, 0.0, 1.0);
                    for k in (0..level).rev() {
                        let digit = (id >> (2 * k)) & 3;
                        x += FOUR_CORNERS[digit][0] * scale;
                        y += FOUR_CORNERS[digit][1] * scale;
                        scale *= 0.25;
                    }
                    vec![x, y]
                })
                .collect();
            (points, 0.25f64.powi(level as i32))
        }
        GeneratorFamily::Cantor1d { ratio, level } => {
            if !(ratio > 0.0 && ratio < 0.5) {
                return Err(Error::InvalidInput(format!("ratio must lie in (0, 1/2), got {ratio}")));
            }
            let points = (0..n)
                .map(|id| {
                    let (mut x, mut scale) = (0.0, 1.0);
                    for k in (0..level).rev() {
                        if (id >> k) & 1 == 1 {
                            x += (1.0 - ratio) * scale;
                        }
                        scale *= ratio;
                    }
                    vec![x]
                })
                .collect();
            (points, ratio.powi(level as i32))
        }
        GeneratorFamily::UniformRandom { count, dim, seed } => {
            if dim == 0 {
                return Err(Error::InvalidInput("dimension must be >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points = (0..count)
                .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
                .collect();
            (points, (1.0 / count as f64).powf(1.0 / dim as f64))
        }
    };
    let raw = PointCloud::new(spec.metric.clone(), points)?;
    let (cloud, scale) = raw.rescale_to_unit_diameter()?;
    let cloud = Arc::new(cloud);
    let measure = DiscreteMeasure::uniform(cloud.clone())?;
    let (measure, _) = measure.normalize()?;
    let r_min = cell.powf(spec.metric.homogeneity()) / scale;
    Ok(Generated {
        cloud,
        measure,
        r_min,
    })
}
