//! Integer lattice underlying the multiscale construction.
//!
//! For parameters `(lambda, N, I = [a, b])` every gridline `a + j|I|lambda^-2n`
//! and every shell endpoint `a + j|I|lambda^-2n +- |I|lambda^-3n` (`n <= N`) is
//! an integer multiple of the unit `|I| lambda^-3N` above `a`. Working in
//! these units turns all the endpoint comparisons into exact integer
//! comparisons.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use super::GoodSetParams;
use crate::error::{Error, Result};
use crate::measure::StepMeasure;

/// A point of `I` in lattice coordinates: `a + (whole + f) * unit` with
/// `0 <= f < 1`; only whether `f` vanishes is retained, which is all the
/// clearance tests need.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticePoint {
    pub whole: u128,
    pub frac_nonzero: bool,
}

impl LatticePoint {
    /// The point `h / 2` units above `a`.
    pub fn from_half_units(h: u128) -> Self {
        LatticePoint {
            whole: h / 2,
            frac_nonzero: h % 2 == 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Lattice {
    origin: BigRational,
    length: BigRational,
    depth: u32,
    resolution: u128,
    unit: BigRational,
    /// `(cell_len, shell, cells)` of generations `1..=N`.
    sizes: Vec<(u128, u128, u128)>,
}

impl Lattice {
    pub fn new(params: &GoodSetParams) -> Result<Self> {
        let lambda = u128::from(params.lambda);
        let resolution = lambda.checked_pow(3 * params.depth).ok_or_else(|| {
            Error::Resource(format!(
                "lambda^(3N) = {}^{} does not fit the 128-bit lattice; reduce the depth",
                params.lambda,
                3 * params.depth
            ))
        })?;
        let (a, b) = &params.interval;
        let length = b - a;
        let unit = &length / BigRational::from_integer(BigInt::from(resolution));
        let d = params.depth;
        let sizes = (1..=d)
            .map(|n| (lambda.pow(3 * d - 2 * n), lambda.pow(3 * (d - n)), lambda.pow(2 * n)))
            .collect();
        Ok(Lattice {
            origin: a.clone(),
            length,
            depth: params.depth,
            resolution,
            unit,
            sizes,
        })
    }

    /// Number of units in `I`, i.e. `lambda^(3N)`.
    pub fn resolution(&self) -> u128 {
        self.resolution
    }

    pub fn unit(&self) -> &BigRational {
        &self.unit
    }

    pub fn origin(&self) -> &BigRational {
        &self.origin
    }

    pub fn length(&self) -> &BigRational {
        &self.length
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Generation-`n` cell length in units: `lambda^(3N - 2n)`.
    pub fn cell_len(&self, n: u32) -> u128 {
        self.sizes[n as usize - 1].0
    }

    /// Generation-`n` shell half-width in units: `lambda^(3N - 3n)`.
    pub fn shell(&self, n: u32) -> u128 {
        self.sizes[n as usize - 1].1
    }

    /// Number of generation-`n` cells: `lambda^(2n)`.
    pub fn cells(&self, n: u32) -> u128 {
        self.sizes[n as usize - 1].2
    }

    /// Index of the generation-`n` cell holding `p`. Cells are half-open
    /// `[lo, hi)`; the last one also holds `b`.
    pub fn cell_of(&self, p: LatticePoint, n: u32) -> u128 {
        let (len, _, cells) = self.sizes[n as usize - 1];
        let cell = match (u64::try_from(p.whole), u64::try_from(len)) {
            (Ok(w), Ok(l)) => u128::from(w / l),
            _ => p.whole / len,
        };
        cell.min(cells - 1)
    }

    /// Lattice coordinates of `t`, or `None` when `t` is outside `[a, b]`.
    pub fn locate(&self, t: &BigRational) -> Option<LatticePoint> {
        let offset = t - &self.origin;
        if offset.is_negative() || offset > self.length {
            return None;
        }
        let scaled = offset / &self.unit;
        let (whole, rem) = scaled.numer().div_rem(scaled.denom());
        Some(LatticePoint {
            whole: whole.to_u128()?,
            frac_nonzero: !rem.is_zero(),
        })
    }

    pub fn half_units_to_rational(&self, h: u128) -> BigRational {
        &self.origin + &self.unit * BigRational::new(BigInt::from(h), BigInt::from(2))
    }

    pub fn units_to_rational(&self, k: u128) -> BigRational {
        &self.origin + &self.unit * BigRational::from_integer(BigInt::from(k))
    }
}

/// Sorted atom positions in half-lattice units, for exact mass queries on
/// closed windows whose endpoints are half-lattice points inside `I`.
#[derive(Clone, Debug)]
pub struct LatticeWindows<'a> {
    measure: &'a StepMeasure,
    /// `(floor(position in half units), position is exactly on it)`; atoms
    /// outside `I` are clamped to `-1` / `2 * resolution + 1`.
    keys: Vec<(i128, bool)>,
    top: i128,
}

impl<'a> LatticeWindows<'a> {
    pub fn new(measure: &'a StepMeasure, lattice: &Lattice) -> Result<Self> {
        let top = i128::try_from(lattice.resolution)
            .ok()
            .and_then(|r| r.checked_mul(2))
            .ok_or_else(|| Error::Resource("lattice too fine for window queries".into()))?;
        let two = BigRational::from_integer(BigInt::from(2));
        let keys = measure
            .positions()
            .iter()
            .map(|p| {
                let scaled = (p - &lattice.origin) / &lattice.unit * &two;
                if scaled.is_negative() {
                    return (-1, false);
                }
                let (whole, rem) = scaled.numer().div_rem(scaled.denom());
                match whole.to_i128() {
                    Some(w) if w <= top => (w, rem.is_zero()),
                    _ => (top + 1, false),
                }
            })
            .collect();
        Ok(LatticeWindows {
            measure,
            keys,
            top,
        })
    }

    /// Mass of the closed window `[lo, hi]` (half units, `0 <= lo <= hi <= 2
    /// * resolution`).
    pub fn closed_mass(&self, lo: i128, hi: i128) -> Result<BigRational> {
        if lo < 0 || hi > self.top || lo > hi {
            return Err(Error::InvalidInput(format!(
                "window [{lo}, {hi}] (half units) is not inside the interval"
            )));
        }
        // position >= lo  <=>  floor >= lo (lo is an integer)
        let start = self.keys.partition_point(|&(w, _)| w < lo);
        // position <= hi  <=>  floor < hi, or floor == hi and exact
        let end = self
            .keys
            .partition_point(|&(w, exact)| w < hi || (w == hi && exact));
        Ok(self.measure.range_mass(start, end))
    }
}
