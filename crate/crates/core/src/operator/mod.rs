//! Truncated operators `T_eps f(x) = sum_{d(x,y) > eps} k(x,y) f(y) w(y)`,
//! their pairings with simple functions, and the estimates controlling how
//! pairings change with the truncation.
//!
//! Truncations are strict: a pair at distance exactly `eps` is excluded from
//! `T_eps`. Every double sum is evaluated row by row in ascending id order and
//! reduced by [`crate::reduce`], so results do not depend on the worker count.

mod estimates;
mod trace;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use estimates::{
    annuli_log_bound_check, log_boundary_sum, shell_mass_check, AnnuliReport, AnnulusCheck,
    LogBoundaryReport, LogShell, ShellCheck, ShellReport,
};
pub use trace::{pairing_trace, pv_scan, EpsGrid, PairingTrace, TRACE_HEADER};

use crate::error::{Error, Result};
use crate::good_radii::GoodRadiusCertificate;
use crate::kernel::KernelSpec;
use crate::measure::DiscreteMeasure;
use crate::metric::PointCloud;
use crate::reduce::{pairwise_sum, row_sum, row_sum_n};

/// Relative slack for the four-term bound.
pub const BOUND_RTOL: f64 = 1e-12;
/// Relative tolerance for the antisymmetric cancellation.
pub const CANCELLATION_RTOL: f64 = 1e-13;

/// Closed ball `{y : d(center, y) <= radius}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: usize, radius: f64) -> Self {
        Ball { center, radius }
    }

    /// Center must carry mass and `0 < radius <= 1`.
    pub fn validate_for(&self, m: &DiscreteMeasure) -> Result<()> {
        m.cloud().check_id(self.center)?;
        if m.weight(self.center) <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "ball center {} is not in the support of the measure",
                self.center
            )));
        }
        if !(self.radius > 0.0 && self.radius <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "ball radius must lie in (0, 1], got {}",
                self.radius
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, cloud: &PointCloud, y: usize) -> bool {
        cloud.dist(self.center, y) <= self.radius
    }

    /// Inner gap `radius - d(center, x)`, a lower bound for the distance from
    /// `x` to the complement.
    #[inline]
    pub fn inner_gap(&self, cloud: &PointCloud, x: usize) -> f64 {
        self.radius - cloud.dist(self.center, x)
    }

    fn indicator(&self, cloud: &PointCloud) -> Vec<bool> {
        (0..cloud.len()).map(|y| self.contains(cloud, y)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    #[serde(flatten)]
    pub ball: Ball,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<GoodRadiusCertificate>,
}

/// `sum_i a_i 1_{B_i}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimpleFunction {
    pub terms: Vec<Term>,
}

impl SimpleFunction {
    pub fn new(terms: impl IntoIterator<Item = (f64, Ball)>) -> Self {
        SimpleFunction {
            terms: terms
                .into_iter()
                .map(|(coeff, ball)| Term {
                    coeff,
                    ball,
                    certificate: None,
                })
                .collect(),
        }
    }

    pub fn indicator(ball: Ball) -> Self {
        Self::new([(1.0, ball)])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn validate_for(&self, m: &DiscreteMeasure) -> Result<()> {
        for t in &self.terms {
            if !t.coeff.is_finite() {
                return Err(Error::InvalidInput(format!("coefficient {} is not finite", t.coeff)));
            }
            t.ball.validate_for(m)?;
        }
        Ok(())
    }

    /// `f(y)` at every point, terms added in order.
    pub fn values(&self, cloud: &PointCloud) -> Vec<f64> {
        (0..cloud.len()).map(|y| self.eval(cloud, y)).collect()
    }

    pub fn eval(&self, cloud: &PointCloud, y: usize) -> f64 {
        let mut v = 0.0;
        for t in &self.terms {
            if t.ball.contains(cloud, y) {
                v += t.coeff;
            }
        }
        v
    }
}

fn check_band(delta: f64, eps: f64) -> Result<()> {
    if !(delta > 0.0 && delta < eps) {
        return Err(Error::InvalidInput(format!(
            "need 0 < delta < eps, got delta = {delta}, eps = {eps}"
        )));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be > 0, got {eps}")));
    }
    Ok(())
}

fn prepare(k: &KernelSpec, m: &DiscreteMeasure, fs: &[&SimpleFunction]) -> Result<()> {
    k.validate_for(m.cloud())?;
    for f in fs {
        f.validate_for(m)?;
    }
    Ok(())
}

/// `sum_{y != x, keep(d)} k(x, y) f(y) w(y)` and the same sum of magnitudes.
fn truncated_row<P>(
    k: &KernelSpec,
    m: &DiscreteMeasure,
    fvals: &[f64],
    x: usize,
    keep: &P,
) -> (f64, f64)
where
    P: Fn(f64) -> bool,
{
    let cloud = m.cloud();
    let w = m.weights();
    let mut terms = Vec::new();
    let mut mags = Vec::new();
    for y in 0..cloud.len() {
        if y == x || fvals[y] == 0.0 || w[y] == 0.0 || !keep(cloud.dist(x, y)) {
            continue;
        }
        let t = k.eval(cloud, x, y) * fvals[y] * w[y];
        terms.push(t);
        mags.push(t.abs());
    }
    (pairwise_sum(&terms), pairwise_sum(&mags))
}

/// `sum_x g(x) w(x) sum_{y != x, keep(d)} k(x,y) f(y) w(y)` with its
/// magnitude sum.
fn pair_sum<P>(k: &KernelSpec, m: &DiscreteMeasure, fvals: &[f64], gvals: &[f64], keep: P) -> (f64, f64)
where
    P: Fn(f64) -> bool + Sync,
{
    let w = m.weights();
    let [value, mag] = row_sum_n(fvals.len(), |x| {
        let gx = gvals[x] * w[x];
        if gx == 0.0 {
            return [0.0, 0.0];
        }
        let (t, a) = truncated_row(k, m, fvals, x, &keep);
        [t * gx, a * gx.abs()]
    });
    (value, mag)
}

/// `T_eps f(x)`.
pub fn apply_truncated(
    k: &KernelSpec,
    m: &DiscreteMeasure,
    f: &SimpleFunction,
    x: usize,
    eps: f64,
) -> Result<f64> {
    prepare(k, m, &[f])?;
    m.cloud().check_id(x)?;
    check_eps(eps)?;
    let fvals = f.values(m.cloud());
    Ok(truncated_row(k, m, &fvals, x, &|d| d > eps).0)
}

/// `sum_x T_eps f(x) g(x) w(x)`.
pub fn pairing(
    k: &KernelSpec,
    m: &DiscreteMeasure,
    f: &SimpleFunction,
    g: &SimpleFunction,
    eps: f64,
) -> Result<f64> {
    prepare(k, m, &[f, g])?;
    check_eps(eps)?;
    let cloud = m.cloud();
    Ok(pair_sum(k, m, &f.values(cloud), &g.values(cloud), |d| d > eps).0)
}

/// Pairing with every off-diagonal pair included, the value `pairing`
/// reaches once `eps` drops below the smallest positive distance.
pub fn full_pairing(
    k: &KernelSpec,
    m: &DiscreteMeasure,
    f: &SimpleFunction,
    g: &SimpleFunction,
) -> Result<f64> {
    prepare(k, m, &[f, g])?;
    let cloud = m.cloud();
    Ok(pair_sum(k, m, &f.values(cloud), &g.values(cloud), |_| true).0)
}

/// Boundary terms of the balls of `f` (`B_i`) and `g` (`S_j`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallTerms {
    pub f_balls: Vec<f64>,
    pub g_balls: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceBound {
    pub delta: f64,
    pub eps: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Sum of term magnitudes of both pairings; sets the rounding slack.
    pub scale: f64,
    pub per_ball_terms: BallTerms,
    pub ok: bool,
}

/// `|P(eps) - P(delta)|` against `sum_{i,j} |a_i b_j| (bt(B_i) + 2 bt(S_j))`.
///
/// The difference of the pairings consists of the pairs with
/// `delta < d <= eps`, so the boundary terms here include `d = eps`.
pub fn pairing_difference_bound(
    k: &KernelSpec,
    m: &DiscreteMeasure,
    f: &SimpleFunction,
    g: &SimpleFunction,
    delta: f64,
    eps: f64,
) -> Result<DifferenceBound> {
    prepare(k, m, &[f, g])?;
    check_band(delta, eps)?;
    let cloud = m.cloud();
    let (fv, gv) = (f.values(cloud), g.values(cloud));
    let (p_eps, mag_eps) = pair_sum(k, m, &fv, &gv, |d| d > eps);
    let (p_delta, mag_delta) = pair_sum(k, m, &fv, &gv, |d| d > delta);
    difference_bound_from(k, m, f, g, delta, eps, p_eps - p_delta, mag_eps + mag_delta)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn difference_bound_from(
    k: &KernelSpec,
    m: &DiscreteMeasure,
    f: &SimpleFunction,
    g: &SimpleFunction,
    delta: f64,
    eps: f64,
    diff: f64,
    scale: f64,
) -> Result<DifferenceBound> {
    let band = |d: f64| d > delta && d <= eps;
    let f_balls: Vec<f64> = f.terms.iter().map(|t| boundary_sum(k, m, &t.ball, band)).collect();
    let g_balls: Vec<f64> = g.terms.iter().map(|t| boundary_sum(k, m, &t.ball, band)).collect();
    let mut rhs_terms = Vec::with_capacity(f_balls.len() * g_balls.len());
    for (a, bf) in f.terms.iter().zip(&f_balls) {
        for (b, bg) in g.terms.iter().zip(&g_balls) {
            rhs_terms.push((a.coeff * b.coeff).abs() * (bf + 2.0 * bg));
        }
    }
    let lhs = diff.abs();
    let rhs = pairwise_sum(&rhs_terms);
    Ok(DifferenceBound {
        delta,
        eps,
        lhs,
        rhs,
        scale,
        ok: lhs <= rhs + BOUND_RTOL * scale,
        per_ball_terms: BallTerms { f_balls, g_balls },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub value: f64,
    pub magnitude: f64,
    pub ok: bool,
}

/// `sum_{x,y in B cap S, delta < d < eps} k(x,y) w(x) w(y)`, which vanishes by
/// antisymmetry; the sum is taken over ordered pairs as written.
pub fn cancellation_residual(
    k: &KernelSpec,
    m: &DiscreteMeasure,
    b: &Ball,
    s: &Ball,
    delta: f64,
    eps: f64,
) -> Result<Residual> {
    k.validate_for(m.cloud())?;
    b.validate_for(m)?;
    s.validate_for(m)?;
    check_band(delta, eps)?;
    let cloud = m.cloud();
    let w = m.weights();
    let (ib, is) = (b.indicator(cloud), s.indicator(cloud));
    let inside: Vec<bool> = ib.iter().zip(&is).map(|(p, q)| *p && *q).collect();
    let [value, magnitude] = row_sum_n(cloud.len(), |x| {
        if !inside[x] || w[x] == 0.0 {
            return [0.0, 0.0];
        }
        let mut terms = Vec::new();
        for y in 0..cloud.len() {
            if y == x || !inside[y] {
                continue;
            }
            let d = cloud.dist(x, y);
            if d > delta && d < eps {
                // w[x] * w[y] is symmetric, so term(x, y) == -term(y, x)
                terms.push(k.eval(cloud, x, y) * (w[x] * w[y]));
            }
        }
        let mags: Vec<f64> = terms.iter().map(|t| t.abs()).collect();
        [pairwise_sum(&terms), pairwise_sum(&mags)]
    });
    Ok(Residual {
        value,
        magnitude,
        ok: value.abs() <= CANCELLATION_RTOL * magnitude,
    })
}

fn boundary_sum<P>(k: &KernelSpec, m: &DiscreteMeasure, b: &Ball, keep: P) -> f64
where
    P: Fn(f64) -> bool + Sync,
{
    let cloud = m.cloud();
    let w = m.weights();
    let inside = b.indicator(cloud);
    row_sum(cloud.len(), |x| {
        if !inside[x] || w[x] == 0.0 {
            return 0.0;
        }
        let mut terms = Vec::new();
        for y in 0..cloud.len() {
            if inside[y] {
                continue;
            }
            if keep(cloud.dist(x, y)) {
                terms.push(k.eval(cloud, x, y).abs() * (w[x] * w[y]));
            }
        }
        pairwise_sum(&terms)
    })
}

/// `sum_{x in B, y not in B, delta < d < eps} |k(x,y)| w(x) w(y)`.
pub fn boundary_term(k: &KernelSpec, m: &DiscreteMeasure, b: &Ball, delta: f64, eps: f64) -> Result<f64> {
    k.validate_for(m.cloud())?;
    b.validate_for(m)?;
    check_band(delta, eps)?;
    Ok(boundary_sum(k, m, b, |d| d > delta && d < eps))
}

/// `sum_{x in B, y not in B} |k(x,y)| w(x) w(y)`.
pub fn total_boundary_integral(k: &KernelSpec, m: &DiscreteMeasure, b: &Ball) -> Result<f64> {
    k.validate_for(m.cloud())?;
    b.validate_for(m)?;
    Ok(boundary_sum(k, m, b, |_| true))
}
