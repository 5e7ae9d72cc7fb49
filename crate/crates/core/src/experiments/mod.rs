//! End-to-end convergence suites on generated measures.
//!
//! A suite generates a measure, certifies its growth and the kernel bounds,
//! certifies good radii about random centers, pairs random simple functions
//! built on those balls along an epsilon grid, and records every inequality
//! it instantiates with both sides.

mod generate;
mod report;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

pub use generate::{generate, Generated, GeneratorFamily, GeneratorSpec, MAX_ATOMS};
pub use report::{emit_report, ReportFormat, Summary};

use crate::error::{Error, Result};
use crate::good_radii::{select_with, GoodRadiusCertificate, GoodRadiusOracle, GoodSetParams, Verdict};
use crate::kernel::{check_antisymmetry, check_size_bound, AntisymmetryReport, KernelSpec, SizeBound};
use crate::measure::{DiscreteMeasure, GrowthCertificate};
use crate::operator::{
    annuli_log_bound_check, cancellation_residual, log_boundary_sum, pairing_trace, shell_mass_check,
    total_boundary_integral, AnnuliReport, Ball, EpsGrid, LogBoundaryReport, PairingTrace, Residual,
    ShellReport, SimpleFunction, Term, BOUND_RTOL, CANCELLATION_RTOL,
};
use crate::rational::{self, inv_pow, lift, to_f64};

/// Largest allowed ratio between boundary integrals of consecutive levels.
pub const TREND_FACTOR: f64 = 2.0;

/// Ball with a radius fixed in advance, certified as given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcedBall {
    pub center: usize,
    pub radius: f64,
}

/// Suite parameters. Missing fields take the defaults of
/// [`SuiteConfig::default`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub generator: GeneratorSpec,
    pub kernel: KernelSpec,
    /// Growth exponent; the kernel's `s` when absent.
    pub growth_exponent: Option<f64>,
    pub lambda: u32,
    pub depth: u32,
    /// Number of random good balls.
    pub balls: usize,
    /// Most terms in each random simple function.
    pub max_terms: usize,
    /// Target radii are drawn uniformly from this range.
    pub radius_range: (f64, f64),
    pub eps_grid: EpsGrid,
    pub seed: u64,
    /// Levels for the boundary-integral trend; defaults to the suite level
    /// and the two below it.
    pub trend_levels: Option<Vec<u32>>,
    pub trend_radius: f64,
    pub forced_ball: Option<ForcedBall>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            generator: GeneratorSpec::four_corner(4),
            kernel: KernelSpec::riesz(1, 1),
            growth_exponent: None,
            lambda: 5,
            depth: 3,
            balls: 5,
            max_terms: 4,
            radius_range: (0.2, 0.7),
            eps_grid: EpsGrid::geometric(0.5, 0.5, 20).expect("valid default grid"),
            seed: 0,
            trend_levels: None,
            trend_radius: 0.5,
            forced_ball: None,
        }
    }
}

impl SuiteConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.radius_range;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::InvalidInput(format!(
                "radius range ({lo}, {hi}) must satisfy 0 < lo <= hi < 1"
            )));
        }
        if self.max_terms == 0 {
            return Err(Error::InvalidInput("max_terms must be >= 1".into()));
        }
        if self.balls == 0 && self.forced_ball.is_none() {
            return Err(Error::InvalidInput("the suite needs at least one ball".into()));
        }
        Ok(())
    }

    fn levels(&self) -> Option<Vec<u32>> {
        match &self.trend_levels {
            Some(v) if v.is_empty() => None,
            Some(v) => Some(v.clone()),
            None => {
                let m = self.generator.level()?;
                Some((m.saturating_sub(2).max(1)..=m).collect())
            }
        }
    }
}

/// One recorded inequality `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub kind: String,
    pub subject: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

impl Check {
    fn new(kind: &str, subject: String, lhs: f64, rhs: f64, ok: bool) -> Self {
        Check {
            kind: kind.into(),
            subject,
            lhs,
            rhs,
            ok,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedBall {
    pub ball: Ball,
    pub target: f64,
    pub certificate: GoodRadiusCertificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub f_term: usize,
    pub g_term: usize,
    pub delta: f64,
    pub eps: f64,
    pub residual: Residual,
}

/// Heaviest positive distance from the trend center, for contrast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadRadius {
    pub radius: f64,
    #[serde(with = "rational::as_string")]
    pub mass: BigRational,
    /// Whether the mass reaches `lambda^-1`.
    pub heavy: bool,
    pub verdict: String,
    pub total_boundary_integral: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendLevel {
    pub level: u32,
    pub atoms: usize,
    pub certified_depth: u32,
    pub total_boundary_integral: f64,
    pub bad_radius: Option<BadRadius>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrend {
    pub center: usize,
    pub radius: f64,
    pub levels: Vec<TrendLevel>,
    /// Largest ratio (bigger over smaller) between consecutive levels.
    pub max_consecutive_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationRecord {
    pub generator: GeneratorSpec,
    pub kernel: KernelSpec,
    pub atoms: usize,
    pub r_min: f64,
    pub growth: GrowthCertificate,
    pub antisymmetry: AntisymmetryReport,
    pub size_bound: SizeBound,
    pub lambda: u32,
    pub depth: u32,
    pub balls: Vec<CertifiedBall>,
    pub f: SimpleFunction,
    pub g: SimpleFunction,
    pub trace: PairingTrace,
    pub residuals: Vec<ResidualRecord>,
    pub shell_checks: Vec<ShellReport>,
    pub annuli: Vec<AnnuliReport>,
    pub log_sums: Vec<LogBoundaryReport>,
    pub trend: Option<BoundaryTrend>,
    pub checks: Vec<Check>,
    pub all_ok: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub records: Vec<ConfigurationRecord>,
}

impl ConvergenceReport {
    pub fn all_ok(&self) -> bool {
        self.records.iter().all(|r| r.all_ok)
    }
}

fn rejection_error(z: usize, t: &BigRational, verdict: &Verdict) -> Error {
    match verdict {
        Verdict::Rejected(rej) => Error::Certification(format!(
            "radius {} about center {z} rejected at generation {}: {}",
            rational::display(t),
            rej.generation,
            rej.reason
        )),
        Verdict::Good(_) => Error::Certification(format!(
            "radius {} about center {z} could not be certified",
            rational::display(t)
        )),
    }
}

/// Good radius near `target` whose `f64` rounding is itself good.
fn certify_near(oracle: &GoodRadiusOracle, target: f64) -> Result<(f64, GoodRadiusCertificate)> {
    let good_as_float = |t: &BigRational| {
        let r = to_f64(t);
        r > 0.0 && r <= 1.0 && lift(r).is_ok_and(|q| oracle.check(&q).is_ok_and(|v| v.is_ok()))
    };
    let t = select_with(oracle, target, good_as_float)?;
    let r = to_f64(&t);
    let exact = lift(r)?;
    match oracle.certify(&exact)? {
        Verdict::Good(cert) => Ok((r, cert)),
        other => Err(rejection_error(0, &exact, &other)),
    }
}

fn certify_exact(m: &DiscreteMeasure, forced: ForcedBall, params: &GoodSetParams) -> Result<CertifiedBall> {
    let ball = Ball::new(forced.center, forced.radius);
    ball.validate_for(m)?;
    let oracle = GoodRadiusOracle::new(&m.radial_pushforward(forced.center)?, params)?;
    let t = lift(forced.radius)?;
    match oracle.certify(&t)? {
        Verdict::Good(certificate) => Ok(CertifiedBall {
            ball,
            target: forced.radius,
            certificate,
        }),
        other => Err(rejection_error(forced.center, &t, &other)),
    }
}

fn random_function(rng: &mut ChaCha8Rng, balls: &[CertifiedBall], max_terms: usize) -> SimpleFunction {
    let count = rng.random_range(1..=max_terms.min(balls.len()));
    let picks = sample(rng, balls.len(), count).into_vec();
    SimpleFunction {
        terms: picks
            .into_iter()
            .map(|i| Term {
                coeff: rng.random_range(-1.0..1.0),
                ball: balls[i].ball,
                certificate: Some(balls[i].certificate.clone()),
            })
            .collect(),
    }
}

/// Runs the full pipeline for one configuration.
pub fn run_convergence_suite(cfg: &SuiteConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let gen = generate(&cfg.generator)?;
    let (m, _) = gen.measure.normalize()?;
    let cloud = m.cloud();
    let k = &cfg.kernel;
    let s = cfg.growth_exponent.unwrap_or(k.s);
    let growth = m.growth_constant(s, gen.r_min)?;
    let antisymmetry = check_antisymmetry(k, cloud)?;
    if !antisymmetry.ok {
        return Err(Error::Certification(format!(
            "kernel is not antisymmetric: residual {} at pair {:?}",
            antisymmetry.worst_residual, antisymmetry.worst_pair
        )));
    }
    let size_bound = check_size_bound(k, cloud, s)?;
    let params = GoodSetParams::unit(cfg.lambda, cfg.depth)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let atoms: Vec<usize> = m.atoms().collect();
    let mut balls = Vec::with_capacity(cfg.balls + 1);
    for _ in 0..cfg.balls {
        let center = atoms[rng.random_range(0..atoms.len())];
        let target = rng.random_range(cfg.radius_range.0..=cfg.radius_range.1);
        let oracle = GoodRadiusOracle::new(&m.radial_pushforward(center)?, &params)?;
        let (radius, certificate) = certify_near(&oracle, target)?;
        balls.push(CertifiedBall {
            ball: Ball::new(center, radius),
            target,
            certificate,
        });
    }
    if let Some(forced) = cfg.forced_ball {
        balls.push(certify_exact(&m, forced, &params)?);
    }

    let f = random_function(&mut rng, &balls, cfg.max_terms);
    let g = random_function(&mut rng, &balls, cfg.max_terms);
    let trace = pairing_trace(k, &m, &f, &g, &cfg.eps_grid)?;

    let mut residuals = Vec::new();
    for (i, tf) in f.terms.iter().enumerate() {
        for (j, tg) in g.terms.iter().enumerate() {
            for step in &trace.steps {
                residuals.push(ResidualRecord {
                    f_term: i,
                    g_term: j,
                    delta: step.delta,
                    eps: step.eps,
                    residual: cancellation_residual(k, &m, &tf.ball, &tg.ball, step.delta, step.eps)?,
                });
            }
        }
    }

    let mut shell_checks = Vec::with_capacity(balls.len());
    let mut annuli = Vec::with_capacity(balls.len());
    let mut log_sums = Vec::with_capacity(balls.len());
    for b in &balls {
        shell_checks.push(shell_mass_check(&m, b.ball.center, &b.certificate.t, &b.certificate)?);
        annuli.push(annuli_log_bound_check(k, &m, &b.ball, s, size_bound.c_certified, growth.c_mu)?);
        log_sums.push(log_boundary_sum(&m, &b.ball, cfg.lambda, Some(&b.certificate), &growth)?);
    }

    let trend = match cfg.levels() {
        Some(levels) => Some(boundary_trend(cfg, &levels)?),
        None => None,
    };

    let mut record = ConfigurationRecord {
        generator: cfg.generator.clone(),
        kernel: k.clone(),
        atoms: cloud.len(),
        r_min: gen.r_min,
        growth,
        antisymmetry,
        size_bound,
        lambda: cfg.lambda,
        depth: cfg.depth,
        balls,
        f,
        g,
        trace,
        residuals,
        shell_checks,
        annuli,
        log_sums,
        trend,
        checks: Vec::new(),
        all_ok: false,
    };
    record.checks = collect_checks(&record);
    record.all_ok = record.checks.iter().all(|c| c.ok);
    Ok(ConvergenceReport {
        records: vec![record],
    })
}

/// Boundary integral of one ball about point 0 across levels, with a radius
/// certified good at every level.
pub fn boundary_trend(cfg: &SuiteConfig, levels: &[u32]) -> Result<BoundaryTrend> {
    if levels.is_empty() {
        return Err(Error::InvalidInput("boundary trends need at least one level".into()));
    }
    let params = &GoodSetParams::unit(cfg.lambda, cfg.depth)?;
    let center = 0;
    let mut measures = Vec::with_capacity(levels.len());
    let mut oracles = Vec::with_capacity(levels.len());
    for &level in levels {
        let spec = cfg.generator.at_level(level).ok_or_else(|| {
            Error::InvalidInput("boundary trends need a generator with levels".into())
        })?;
        let (m, _) = generate(&spec)?.measure.normalize()?;
        oracles.push(GoodRadiusOracle::new(&m.radial_pushforward(center)?, params)?);
        measures.push(m);
    }
    let good_everywhere = |t: &BigRational| {
        let r = to_f64(t);
        r > 0.0
            && r <= 1.0
            && lift(r).is_ok_and(|q| oracles.iter().all(|o| o.check(&q).is_ok_and(|v| v.is_ok())))
    };
    let t = select_with(&oracles[0], cfg.trend_radius, good_everywhere)?;
    let radius = to_f64(&t);
    let exact = lift(radius)?;
    let ball = Ball::new(center, radius);
    let threshold = inv_pow(cfg.lambda, 1);
    let mut out = Vec::with_capacity(levels.len());
    for ((&level, m), oracle) in levels.iter().zip(&measures).zip(&oracles) {
        let certified_depth = match oracle.certify(&exact)? {
            Verdict::Good(c) => c.depth,
            other => return Err(rejection_error(center, &exact, &other)),
        };
        let mu_z = m.radial_pushforward(center)?;
        let heaviest = mu_z
            .atoms()
            .filter(|(p, _)| **p > BigRational::from_integer(0.into()))
            .fold(None::<(&BigRational, &BigRational)>, |best, (p, w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((p, w)),
            });
        let bad_radius = match heaviest {
            Some((p, w)) => {
                let r = to_f64(p);
                let verdict = match oracle.certify(p)? {
                    Verdict::Good(_) => "good".to_string(),
                    Verdict::Rejected(rej) => {
                        format!("rejected at generation {}: {}", rej.generation, rej.reason)
                    }
                };
                Some(BadRadius {
                    radius: r,
                    mass: w.clone(),
                    heavy: *w >= threshold,
                    verdict,
                    total_boundary_integral: total_boundary_integral(&cfg.kernel, m, &Ball::new(center, r))?,
                })
            }
            None => None,
        };
        out.push(TrendLevel {
            level,
            atoms: m.cloud().len(),
            certified_depth,
            total_boundary_integral: total_boundary_integral(&cfg.kernel, m, &ball)?,
            bad_radius,
        });
    }
    let max_consecutive_ratio = out
        .windows(2)
        .map(|p| {
            let (a, b) = (p[0].total_boundary_integral, p[1].total_boundary_integral);
            a.max(b) / a.min(b)
        })
        .fold(1.0, f64::max);
    Ok(BoundaryTrend {
        center,
        radius,
        levels: out,
        max_consecutive_ratio,
    })
}

fn collect_checks(r: &ConfigurationRecord) -> Vec<Check> {
    let mut checks = vec![Check::new(
        "antisymmetry",
        "max |k(x,y) + k(y,x)|".into(),
        r.antisymmetry.worst_residual,
        crate::kernel::ANTISYMMETRY_RTOL * r.antisymmetry.max_abs,
        r.antisymmetry.ok,
    )];
    for step in &r.trace.steps {
        checks.push(Check::new(
            "four_term",
            format!("eps {:?} -> {:?}", step.eps, step.delta),
            step.lhs,
            step.rhs + BOUND_RTOL * step.scale,
            step.ok,
        ));
    }
    for res in &r.residuals {
        checks.push(Check::new(
            "cancellation",
            format!("f[{}] g[{}] band ({:?}, {:?})", res.f_term, res.g_term, res.delta, res.eps),
            res.residual.value.abs(),
            CANCELLATION_RTOL * res.residual.magnitude,
            res.residual.ok,
        ));
    }
    for rep in &r.shell_checks {
        for c in &rep.checks {
            checks.push(Check::new(
                "shell_mass",
                format!("center {} radius {} n {}", rep.center, rational::display(&rep.radius), c.n),
                to_f64(&c.mass),
                to_f64(&c.threshold),
                c.ok,
            ));
        }
    }
    for (b, rep) in r.balls.iter().zip(&r.annuli) {
        for c in &rep.checks {
            checks.push(Check::new(
                "annuli",
                format!("center {} radius {:?} x {}", b.ball.center, b.ball.radius, c.x),
                c.lhs,
                c.rhs,
                c.ok,
            ));
        }
    }
    for (b, rep) in r.balls.iter().zip(&r.log_sums) {
        checks.push(Check::new(
            "log_boundary",
            format!("center {} radius {:?}", b.ball.center, b.ball.radius),
            rep.value,
            rep.bound * (1.0 + 1e-12),
            rep.ok,
        ));
    }
    if let Some(t) = &r.trend {
        checks.push(Check::new(
            "boundary_trend",
            format!("center {} radius {:?} levels {:?}", t.center, t.radius, t.levels.iter().map(|l| l.level).collect::<Vec<_>>()),
            t.max_consecutive_ratio,
            TREND_FACTOR,
            t.max_consecutive_ratio <= TREND_FACTOR,
        ));
    }
    checks
}
