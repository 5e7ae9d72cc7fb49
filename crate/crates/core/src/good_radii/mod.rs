//! Good radii via the exponential-growth construction.
//!
//! `I` is cut into `lambda^(2n)` cells at generation `n`. A cell is heavy if
//! its mass is at least `lambda^-n` and its parent survived; every heavy cell
//! and everything within `|I| lambda^-3n` of a generation-`n` gridline is
//! removed. A point `t` survives depth `N` when, for every `n <= N`, its cell
//! `J_n(t)` is light and `[t - |I|lambda^-3n, t + |I|lambda^-3n]` stays inside
//! `J_n(t)`. Consequently no window of that size around `t` carries mass
//! `lambda^-n` or more.
//!
//! Cells are half-open `[lo, hi)` (the last one also contains `b`), so a
//! surviving `t` has left clearance `t - lo >= |I|lambda^-3n` and right
//! clearance `hi - t > |I|lambda^-3n`.
//!
//! All comparisons are exact: positions and masses are rationals and
//! endpoints live on the integer lattice of [`lattice`].

pub mod lattice;
mod sweep;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub use lattice::{Lattice, LatticePoint, LatticeWindows};
pub use sweep::{materialize_good_set, IntervalSet, IntervalSetFile, DEFAULT_BUDGET};

use crate::error::{Error, Result};
use crate::measure::StepMeasure;
use crate::rational::{self, inv_pow, lift};

/// Generations examined past `depth` when extending the mass bound.
const STABILIZATION_CAP: u32 = 200;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoodSetParams {
    pub lambda: u32,
    pub depth: u32,
    pub interval: (BigRational, BigRational),
}

impl GoodSetParams {
    pub fn new(lambda: u32, depth: u32, a: BigRational, b: BigRational) -> Result<Self> {
        if lambda < 3 {
            return Err(Error::InvalidInput(format!("lambda must be an integer >= 3, got {lambda}")));
        }
        if depth == 0 {
            return Err(Error::InvalidInput("depth must be >= 1".into()));
        }
        if !(BigRational::zero() <= a && a < b && b <= BigRational::one()) {
            return Err(Error::InvalidInput(format!(
                "interval [{a}, {b}] must satisfy 0 <= a < b <= 1"
            )));
        }
        let params = GoodSetParams {
            lambda,
            depth,
            interval: (a, b),
        };
        Lattice::new(&params)?;
        Ok(params)
    }

    /// `I = [0, 1]`, the setting of the radial pushforward.
    pub fn unit(lambda: u32, depth: u32) -> Result<Self> {
        Self::new(lambda, depth, BigRational::zero(), BigRational::one())
    }

    pub fn length(&self) -> BigRational {
        &self.interval.1 - &self.interval.0
    }

    /// Heavy-cell threshold `lambda^-n`.
    pub fn threshold(&self, n: u32) -> BigRational {
        inv_pow(self.lambda, n)
    }

    /// `|I| lambda^-3n`.
    pub fn shell_half_width(&self, n: u32) -> BigRational {
        self.length() * inv_pow(self.lambda, 3 * n)
    }

    /// `|I| (1 - 3 sum_{n <= N} lambda^-n)`, the guaranteed good length.
    pub fn lower_bound(&self) -> BigRational {
        let mut sum = BigRational::zero();
        for n in 1..=self.depth {
            sum += inv_pow(self.lambda, n);
        }
        self.length() * (BigRational::one() - BigRational::from_integer(BigInt::from(3)) * sum)
    }

    /// The infinite-depth bound `1 - 3/(lambda - 1)` is nonpositive for
    /// `lambda < 5`.
    pub fn asymptotic_bound_vacuous(&self) -> bool {
        self.lambda < 5
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    HeavyCell,
    GridlineShell,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RejectReason::HeavyCell => "heavy_cell",
            RejectReason::GridlineShell => "gridline_shell",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub generation: u32,
    pub reason: RejectReason,
}

/// Witness that `J_n(t)` is light and `t` clears its endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationWitness {
    pub generation: u32,
    pub cell: u128,
    #[serde(with = "rational::as_string")]
    pub cell_lo: BigRational,
    #[serde(with = "rational::as_string")]
    pub cell_hi: BigRational,
    #[serde(with = "rational::as_string")]
    pub mass: BigRational,
    #[serde(with = "rational::as_string")]
    pub threshold: BigRational,
    #[serde(with = "rational::as_string")]
    pub left_clearance: BigRational,
    #[serde(with = "rational::as_string")]
    pub right_clearance: BigRational,
    #[serde(with = "rational::as_string")]
    pub shell_half_width: BigRational,
}

/// How far the mass bound `nu(J_n(t)) < lambda^-n` extends past the depth.
///
/// From `generation` on, every cell holds at most one atom and every atom
/// outweighs the threshold, so atom-bearing cells are all heavy. If `t`'s cell
/// is light there, it holds no atom, and neither does any deeper cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stabilization {
    pub generation: Option<u32>,
    pub mass_bound_all_generations: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodRadiusCertificate {
    #[serde(with = "rational::as_string")]
    pub t: BigRational,
    pub lambda: u32,
    pub depth: u32,
    #[serde(with = "rational::as_string")]
    pub interval_lo: BigRational,
    #[serde(with = "rational::as_string")]
    pub interval_hi: BigRational,
    pub generations: Vec<GenerationWitness>,
    pub stabilization: Stabilization,
}

impl GoodRadiusCertificate {
    pub fn params(&self) -> Result<GoodSetParams> {
        GoodSetParams::new(
            self.lambda,
            self.depth,
            self.interval_lo.clone(),
            self.interval_hi.clone(),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Verdict {
    Good(GoodRadiusCertificate),
    Rejected(Rejection),
}

impl Verdict {
    pub fn is_good(&self) -> bool {
        matches!(self, Verdict::Good(_))
    }

    pub fn certificate(&self) -> Option<&GoodRadiusCertificate> {
        match self {
            Verdict::Good(c) => Some(c),
            Verdict::Rejected(_) => None,
        }
    }
}

/// Atom-bearing cells of one generation.
#[derive(Clone, Debug, Default)]
struct GenCells {
    cells: Vec<u128>,
    masses: Vec<BigRational>,
    heavy: Vec<bool>,
}

impl GenCells {
    fn find(&self, cell: u128) -> Option<usize> {
        self.cells.binary_search(&cell).ok()
    }
}

/// Heavy cells of each generation that descend from surviving cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemovedFamily {
    pub lambda: u32,
    pub depth: u32,
    /// `generations[n - 1]` lists generation `n`, sorted by index.
    pub generations: Vec<Vec<HeavyCell>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeavyCell {
    pub index: u128,
    #[serde(with = "rational::as_string")]
    pub mass: BigRational,
}

/// Prepared good-radius test for one `(nu, params)` pair. Building costs
/// `O(N * atoms)` exact operations; each test afterwards is `O(N log atoms)`
/// integer work.
#[derive(Clone, Debug)]
pub struct GoodRadiusOracle {
    params: GoodSetParams,
    lattice: Lattice,
    gens: Vec<GenCells>,
    /// Positive-mass atoms inside `I`.
    atoms: Vec<(BigRational, BigRational)>,
}

impl GoodRadiusOracle {
    pub fn new(v: &StepMeasure, params: &GoodSetParams) -> Result<Self> {
        let lattice = Lattice::new(params)?;
        let mut located: Vec<(LatticePoint, &BigRational)> = Vec::new();
        let mut atoms = Vec::new();
        for (p, m) in v.atoms() {
            if m.is_zero() {
                continue;
            }
            if let Some(lp) = lattice.locate(p) {
                located.push((lp, m));
                atoms.push((p.clone(), m.clone()));
            }
        }
        let mut gens = Vec::with_capacity(params.depth as usize);
        for n in 1..=params.depth {
            let threshold = params.threshold(n);
            let mut g = GenCells::default();
            for (lp, m) in &located {
                let cell = lattice.cell_of(*lp, n);
                if g.cells.last() == Some(&cell) {
                    *g.masses.last_mut().unwrap() += *m;
                } else {
                    g.cells.push(cell);
                    g.masses.push((*m).clone());
                }
            }
            g.heavy = g.masses.iter().map(|m| *m >= threshold).collect();
            gens.push(g);
        }
        Ok(GoodRadiusOracle {
            params: params.clone(),
            lattice,
            gens,
            atoms,
        })
    }

    pub fn params(&self) -> &GoodSetParams {
        &self.params
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn cell_mass(&self, n: u32, cell: u128) -> (BigRational, bool) {
        let g = &self.gens[n as usize - 1];
        match g.find(cell) {
            Some(k) => (g.masses[k].clone(), g.heavy[k]),
            None => (BigRational::zero(), false),
        }
    }

    fn is_heavy(&self, n: u32, cell: u128) -> bool {
        let g = &self.gens[n as usize - 1];
        g.find(cell).is_some_and(|k| g.heavy[k])
    }

    /// Fast exact test of a lattice point.
    pub fn check_point(&self, p: LatticePoint) -> std::result::Result<(), Rejection> {
        for n in 1..=self.params.depth {
            let cell = self.lattice.cell_of(p, n);
            if self.is_heavy(n, cell) {
                return Err(Rejection {
                    generation: n,
                    reason: RejectReason::HeavyCell,
                });
            }
            let len = self.lattice.cell_len(n);
            let w = self.lattice.shell(n);
            let offset = p.whole - cell * len;
            // left: offset + f >= w  <=>  offset >= w
            // right: len - offset - f > w  <=>  len - offset > w
            if offset < w || len.saturating_sub(offset) <= w {
                return Err(Rejection {
                    generation: n,
                    reason: RejectReason::GridlineShell,
                });
            }
        }
        Ok(())
    }

    /// Exact test of `t`; errors when `t` lies outside `I`.
    pub fn check(&self, t: &BigRational) -> Result<std::result::Result<(), Rejection>> {
        let p = self.locate(t)?;
        Ok(self.check_point(p))
    }

    fn locate(&self, t: &BigRational) -> Result<LatticePoint> {
        self.lattice.locate(t).ok_or_else(|| {
            Error::InvalidInput(format!(
                "t = {t} lies outside I = [{}, {}]",
                self.params.interval.0, self.params.interval.1
            ))
        })
    }

    /// Full certificate for `t`, or the first failing generation.
    pub fn certify(&self, t: &BigRational) -> Result<Verdict> {
        let p = self.locate(t)?;
        if let Err(rej) = self.check_point(p) {
            return Ok(Verdict::Rejected(rej));
        }
        let mut generations = Vec::with_capacity(self.params.depth as usize);
        for n in 1..=self.params.depth {
            let cell = self.lattice.cell_of(p, n);
            let len = self.lattice.cell_len(n);
            let cell_lo = self.lattice.units_to_rational(cell * len);
            let cell_hi = self.lattice.units_to_rational((cell + 1) * len);
            let (mass, _) = self.cell_mass(n, cell);
            generations.push(GenerationWitness {
                generation: n,
                cell,
                left_clearance: t - &cell_lo,
                right_clearance: &cell_hi - t,
                cell_lo,
                cell_hi,
                mass,
                threshold: self.params.threshold(n),
                shell_half_width: self.params.shell_half_width(n),
            });
        }
        Ok(Verdict::Good(GoodRadiusCertificate {
            t: t.clone(),
            lambda: self.params.lambda,
            depth: self.params.depth,
            interval_lo: self.params.interval.0.clone(),
            interval_hi: self.params.interval.1.clone(),
            generations,
            stabilization: self.stabilization(t),
        }))
    }

    /// First generation from which the atomic structure is resolved: cells
    /// shorter than the smallest atom gap and a threshold no larger than the
    /// smallest atom mass.
    pub fn stabilization_generation(&self) -> Option<u32> {
        let lambda = BigRational::from_integer(BigInt::from(self.params.lambda));
        let len = self.params.length();
        let min_gap = self
            .atoms
            .windows(2)
            .map(|w| &w[1].0 - &w[0].0)
            .min();
        let min_mass = self.atoms.iter().map(|a| a.1.clone()).min();
        let mut cell = len;
        let mut threshold = BigRational::one();
        for n in 1..=self.params.depth + STABILIZATION_CAP {
            cell /= &lambda * &lambda;
            threshold /= &lambda;
            let gap_ok = min_gap.as_ref().is_none_or(|g| cell < *g);
            let mass_ok = min_mass.as_ref().is_none_or(|m| threshold <= *m);
            if gap_ok && mass_ok {
                return Some(n);
            }
        }
        None
    }

    fn stabilization(&self, t: &BigRational) -> Stabilization {
        let Some(stable) = self.stabilization_generation() else {
            return Stabilization {
                generation: None,
                mass_bound_all_generations: false,
            };
        };
        let (a, _) = &self.params.interval;
        let len = self.params.length();
        let scaled = (t - a) / &len;
        let lambda = BigInt::from(self.params.lambda);
        let mut ok = true;
        for n in self.params.depth + 1..=stable {
            let cells = lambda.pow(2 * n);
            let x = &scaled * BigRational::from_integer(cells.clone());
            let mut j = x.numer().div_floor(x.denom());
            if j >= cells {
                j = cells - BigInt::one();
            }
            let lo = a + &len * BigRational::new(j.clone(), lambda.pow(2 * n));
            let hi = a + &len * BigRational::new(j + BigInt::one(), lambda.pow(2 * n));
            let is_last = hi == self.params.interval.1;
            let mass: BigRational = self
                .atoms
                .iter()
                .filter(|(p, _)| *p >= lo && (*p < hi || (is_last && *p == hi)))
                .map(|(_, m)| m.clone())
                .sum();
            if mass >= self.params.threshold(n) {
                ok = false;
                break;
            }
        }
        Stabilization {
            generation: Some(stable),
            mass_bound_all_generations: ok,
        }
    }

    /// Heavy cells per generation, restricted to descendants of survivors.
    pub fn removed_family(&self) -> RemovedFamily {
        let lambda = u128::from(self.params.lambda);
        let mut generations: Vec<Vec<HeavyCell>> = Vec::new();
        for n in 1..=self.params.depth {
            let g = &self.gens[n as usize - 1];
            let mut out = Vec::new();
            for k in 0..g.cells.len() {
                if !g.heavy[k] {
                    continue;
                }
                let cell = g.cells[k];
                let ancestor_heavy = (1..n).any(|m| {
                    let ancestor = cell / lambda.pow(2 * (n - m));
                    self.is_heavy(m, ancestor)
                });
                if !ancestor_heavy {
                    out.push(HeavyCell {
                        index: cell,
                        mass: g.masses[k].clone(),
                    });
                }
            }
            generations.push(out);
        }
        RemovedFamily {
            lambda: self.params.lambda,
            depth: self.params.depth,
            generations,
        }
    }
}

fn require_subprobability(v: &StepMeasure) -> Result<()> {
    if *v.total() > BigRational::one() {
        return Err(Error::Precondition(format!(
            "total mass {} exceeds 1; normalize first",
            v.total()
        )));
    }
    Ok(())
}

/// Heavy cells (mass `>= lambda^-n`, parent surviving) for `n = 1..=N`.
pub fn build_removed_families(v: &StepMeasure, params: &GoodSetParams) -> Result<RemovedFamily> {
    require_subprobability(v)?;
    Ok(GoodRadiusOracle::new(v, params)?.removed_family())
}

/// Certificate for `t`, or the first generation at which it fails.
pub fn is_good_radius(v: &StepMeasure, t: &BigRational, params: &GoodSetParams) -> Result<Verdict> {
    GoodRadiusOracle::new(v, params)?.certify(t)
}

/// Good radius closest to `target` among midpoints of generation-`N` cells,
/// scanning outward; ties go to the smaller candidate.
pub fn select_good_radius_near(
    v: &StepMeasure,
    target: f64,
    params: &GoodSetParams,
) -> Result<BigRational> {
    let oracle = GoodRadiusOracle::new(v, params)?;
    select_with(&oracle, target, |_| true)
}

/// [`select_good_radius_near`] with an extra acceptance predicate on the
/// candidate (used to find radii good for several measures at once).
pub fn select_with<F>(oracle: &GoodRadiusOracle, target: f64, mut accept: F) -> Result<BigRational>
where
    F: FnMut(&BigRational) -> bool,
{
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidInput(format!("target must lie in (0, 1), got {target}")));
    }
    let params = oracle.params();
    let lattice = oracle.lattice();
    let n = params.depth;
    let cells = lattice.cells(n);
    let len = lattice.cell_len(n);
    // X: target in half generation-N cells, so candidate j sits at 2j + 1.
    // Only floor(2X) and whether 2X is an integer are needed.
    let x4 = (lift(target)? - &params.interval.0) / params.length()
        * BigRational::from_integer(BigInt::from(cells) * BigInt::from(4));
    let floor2 = x4.numer().div_floor(x4.denom());
    let exact2 = x4.is_integer();
    let floor1 = floor2.div_floor(&BigInt::from(2));
    // Candidates with 2j + 1 <= X go left, the rest right.
    let mut left: Option<u128> = if floor1 < BigInt::one() {
        None
    } else {
        let j = (&floor1 - BigInt::one()) / BigInt::from(2);
        Some(j.to_u128().unwrap_or(u128::MAX).min(cells - 1))
    };
    let mut right: Option<u128> = match left {
        Some(j) if j + 1 < cells => Some(j + 1),
        Some(_) => None,
        None => Some(0),
    };
    // 2X <= K  <=>  floor(2X) < K, or floor(2X) == K and 2X is an integer.
    let x_le = |k: u128| {
        let k = BigInt::from(k);
        floor2 < k || (floor2 == k && exact2)
    };
    loop {
        let pick_left = match (left, right) {
            (None, None) => {
                return Err(Error::SearchExhausted(format!(
                    "no good radius among the {cells} generation-{n} midpoints"
                )))
            }
            (Some(_), None) => true,
            (None, Some(_)) => false,
            // X - (2l + 1) <= (2r + 1) - X
            (Some(l), Some(r)) => x_le(2 * l + 2 * r + 2),
        };
        let j = if pick_left { left.unwrap() } else { right.unwrap() };
        let half = (2 * j + 1) * len;
        let p = LatticePoint::from_half_units(half);
        if oracle.check_point(p).is_ok() {
            let t = lattice.half_units_to_rational(half);
            if accept(&t) {
                return Ok(t);
            }
        }
        if pick_left {
            left = j.checked_sub(1);
        } else {
            right = if j + 1 < cells { Some(j + 1) } else { None };
        }
    }
}
