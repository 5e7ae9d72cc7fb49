//! Quantitative estimates near the boundary of a good ball.

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::Ball;
use crate::error::{Error, Result};
use crate::good_radii::{is_good_radius, GoodRadiusCertificate, Verdict};
use crate::kernel::KernelSpec;
use crate::measure::{DiscreteMeasure, GrowthCertificate, Interval};
use crate::rational::{self, inv_pow, lift};
use crate::reduce::pairwise_sum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusCheck {
    pub x: usize,
    pub inner_gap: f64,
    pub lhs: f64,
    pub n_x: u32,
    pub rhs: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnuliReport {
    pub checks: Vec<AnnulusCheck>,
    /// Atoms at distance exactly `radius` from the center.
    pub on_sphere: Vec<usize>,
    pub all_ok: bool,
}

/// Smallest `N` with `2^N delta > 3`, i.e. `floor(log2(3 / delta)) + 1`.
fn annuli_count(delta: f64) -> u32 {
    let mut n = 0;
    let mut v = delta;
    while v <= 3.0 {
        v *= 2.0;
        n += 1;
    }
    n
}

/// For each atom `x` of the open ball, compares
/// `sum_{y in B(x,2) \ B} |k(x,y)| w(y)` with `c c_mu 2^s N_x`.
///
/// Points outside `B` are at distance more than the inner gap `delta` from
/// `x`, so they fall into the `N_x` dyadic annuli
/// `2^(i-1) delta < d <= 2^i delta`, each contributing at most `c c_mu 2^s`.
pub fn annuli_log_bound_check(
    k: &KernelSpec,
    m: &DiscreteMeasure,
    b: &Ball,
    s: f64,
    c: f64,
    c_mu: f64,
) -> Result<AnnuliReport> {
    k.validate_for(m.cloud())?;
    b.validate_for(m)?;
    let cloud = m.cloud();
    let w = m.weights();
    let inside: Vec<bool> = (0..cloud.len()).map(|y| b.contains(cloud, y)).collect();
    let mut checks = Vec::new();
    let mut on_sphere = Vec::new();
    for x in m.atoms() {
        let d = cloud.dist(b.center, x);
        if d == b.radius {
            on_sphere.push(x);
            continue;
        }
        if d > b.radius {
            continue;
        }
        let delta = b.radius - d;
        let terms: Vec<f64> = (0..cloud.len())
            .filter(|&y| !inside[y] && cloud.dist(x, y) < 2.0)
            .map(|y| k.eval(cloud, x, y).abs() * w[y])
            .collect();
        let lhs = pairwise_sum(&terms);
        let n_x = annuli_count(delta);
        let rhs = c * c_mu * 2f64.powf(s) * f64::from(n_x);
        checks.push(AnnulusCheck {
            x,
            inner_gap: delta,
            lhs,
            n_x,
            rhs,
            ok: lhs <= rhs,
        });
    }
    if checks.is_empty() {
        return Err(Error::Precondition("the open ball holds no atoms".into()));
    }
    Ok(AnnuliReport {
        all_ok: checks.iter().all(|c| c.ok),
        checks,
        on_sphere,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellCheck {
    pub n: u32,
    #[serde(with = "rational::as_string")]
    pub lo: BigRational,
    #[serde(with = "rational::as_string")]
    pub hi: BigRational,
    #[serde(with = "rational::as_string")]
    pub mass: BigRational,
    #[serde(with = "rational::as_string")]
    pub threshold: BigRational,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellReport {
    pub center: usize,
    #[serde(with = "rational::as_string")]
    pub radius: BigRational,
    pub lambda: u32,
    pub depth: u32,
    pub checks: Vec<ShellCheck>,
    /// `sum_{n <= N} lambda^-n 3 (n + 1) ln(lambda)`.
    pub tail_sum: f64,
    pub all_ok: bool,
}

fn verify_certificate(
    m: &DiscreteMeasure,
    z: usize,
    r: &BigRational,
    cert: &GoodRadiusCertificate,
) -> Result<()> {
    let mismatch = |why: &str| Err(Error::InvalidInput(format!("certificate mismatch: {why}")));
    if cert.t != *r {
        return mismatch(&format!("certificate is for {}, not {}", cert.t, r));
    }
    if !(cert.interval_lo.is_zero() && cert.interval_hi == BigRational::from_integer(1.into())) {
        return mismatch("certificate interval is not [0, 1]");
    }
    let mu_z = m.radial_pushforward(z)?;
    match is_good_radius(&mu_z, r, &cert.params()?)? {
        Verdict::Good(fresh) if fresh == *cert => Ok(()),
        Verdict::Good(_) => mismatch("witnesses differ from the radial measure"),
        Verdict::Rejected(rej) => mismatch(&format!(
            "radius is rejected at generation {} ({:?})",
            rej.generation, rej.reason
        )),
    }
}

/// `mu_z([r - lambda^-3n, r + lambda^-3n)) <= lambda^-n` for `n = 1..=N`,
/// exactly.
pub fn shell_mass_check(
    m: &DiscreteMeasure,
    z: usize,
    r: &BigRational,
    cert: &GoodRadiusCertificate,
) -> Result<ShellReport> {
    verify_certificate(m, z, r, cert)?;
    let mu_z = m.radial_pushforward(z)?;
    let mut checks = Vec::with_capacity(cert.depth as usize);
    for n in 1..=cert.depth {
        let w = inv_pow(cert.lambda, 3 * n);
        let (lo, hi) = (r - &w, r + &w);
        let mass = mu_z.interval_mass(&Interval::closed_open(lo.clone(), hi.clone()))?;
        let threshold = inv_pow(cert.lambda, n);
        checks.push(ShellCheck {
            n,
            ok: mass <= threshold,
            lo,
            hi,
            mass,
            threshold,
        });
    }
    let ln = f64::from(cert.lambda).ln();
    let tail: Vec<f64> = (1..=cert.depth)
        .map(|n| f64::from(cert.lambda).powi(-(n as i32)) * 3.0 * f64::from(n + 1) * ln)
        .collect();
    Ok(ShellReport {
        center: z,
        radius: r.clone(),
        lambda: cert.lambda,
        depth: cert.depth,
        all_ok: checks.iter().all(|c| c.ok),
        checks,
        tail_sum: pairwise_sum(&tail),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogShell {
    pub n: u32,
    /// Mass of the atoms with `lambda^-3(n+1) < delta <= lambda^-3n`.
    pub mass: f64,
    /// `lambda^-n` for certified generations, the measured mass beyond.
    pub mass_bound: f64,
    pub term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogBoundaryReport {
    pub value: f64,
    /// Mass of the atoms with `delta > lambda^-3`.
    pub core_mass: f64,
    /// Whether the core term uses the growth bound `c_mu (r - lambda^-3)^s`.
    pub core_from_growth: bool,
    pub core_term: f64,
    pub shells: Vec<LogShell>,
    pub bound: f64,
    pub ok: bool,
}

/// `sum_{x in B°} w(x) |ln delta(x)|` with `delta(x) = r - d(z, x)`, and the
/// bound obtained by splitting the open ball into the core `delta > lambda^-3`
/// and the shells `lambda^-3(n+1) < delta <= lambda^-3n`.
///
/// Shells up to the certified depth are bounded by `lambda^-n`; without a
/// certificate, and beyond its depth, the measured shell mass is used.
pub fn log_boundary_sum(
    m: &DiscreteMeasure,
    b: &Ball,
    lambda: u32,
    cert: Option<&GoodRadiusCertificate>,
    growth: &GrowthCertificate,
) -> Result<LogBoundaryReport> {
    b.validate_for(m)?;
    if lambda < 2 {
        return Err(Error::InvalidInput(format!("lambda must be >= 2, got {lambda}")));
    }
    let r = lift(b.radius)?;
    let certified_depth = match cert {
        None => 0,
        Some(c) if c.t != r => {
            return Err(Error::InvalidInput(format!(
                "certificate is for {}, not for the ball radius {}",
                c.t, b.radius
            )))
        }
        Some(c) if c.lambda != lambda => {
            return Err(Error::InvalidInput(format!(
                "certificate uses lambda = {}, not {lambda}",
                c.lambda
            )))
        }
        Some(c) => c.depth,
    };
    let cloud = m.cloud();
    let ln = f64::from(lambda).ln();
    let mut value_terms = Vec::new();
    let mut core_terms = Vec::new();
    let mut shell_terms: Vec<Vec<f64>> = Vec::new();
    for x in m.atoms() {
        let d = cloud.dist(b.center, x);
        if d >= b.radius {
            continue;
        }
        let wx = m.weight(x);
        value_terms.push(wx * (b.radius - d).ln().abs());
        let delta = &r - lift(d)?;
        let mut n = 0u32;
        while delta <= inv_pow(lambda, 3 * (n + 1)) {
            n += 1;
        }
        if n == 0 {
            core_terms.push(wx);
        } else {
            if shell_terms.len() < n as usize {
                shell_terms.resize(n as usize, Vec::new());
            }
            shell_terms[n as usize - 1].push(wx);
        }
    }
    if value_terms.is_empty() {
        return Err(Error::Precondition("the open ball holds no atoms".into()));
    }
    let value = pairwise_sum(&value_terms);
    let core_mass = pairwise_sum(&core_terms);
    let core_radius = b.radius - f64::from(lambda).powi(-3);
    let core_from_growth = core_radius >= growth.r_min;
    let core_term = if core_from_growth {
        3.0 * ln * growth.c_mu * core_radius.powf(growth.s)
    } else {
        3.0 * ln * core_mass
    };
    let last = shell_terms.len().max(certified_depth as usize) as u32;
    let mut shells = Vec::with_capacity(last as usize);
    for n in 1..=last {
        let mass = shell_terms.get(n as usize - 1).map_or(0.0, |t| pairwise_sum(t));
        let mass_bound = if n <= certified_depth {
            f64::from(lambda).powi(-(n as i32))
        } else {
            mass
        };
        shells.push(LogShell {
            n,
            mass,
            mass_bound,
            term: mass_bound * 3.0 * f64::from(n + 1) * ln,
        });
    }
    let mut bound_terms = vec![core_term];
    bound_terms.extend(shells.iter().map(|s| s.term));
    let bound = pairwise_sum(&bound_terms);
    Ok(LogBoundaryReport {
        value,
        core_mass,
        core_from_growth,
        core_term,
        ok: value.is_finite() && value <= bound * (1.0 + 1e-12),
        shells,
        bound,
    })
}

/// Exact `delta`-to-shell index, exposed for tests.
#[cfg(test)]
pub(crate) fn shell_index(lambda: u32, delta: &BigRational) -> u32 {
    let mut n = 0u32;
    while *delta <= inv_pow(lambda, 3 * (n + 1)) {
        n += 1;
    }
    n
}
