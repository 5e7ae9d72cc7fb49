//! Purely atomic measures on `[0, 1]` with exact rational positions and
//! masses.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// An interval of the real line with explicit endpoint inclusion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: BigRational,
    pub hi: BigRational,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: BigRational, hi: BigRational) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub fn closed_open(lo: BigRational, hi: BigRational) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: true,
            hi_closed: false,
        }
    }

    pub fn open(lo: BigRational, hi: BigRational) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
        }
    }
}

/// `sum_k mass_k * delta_{position_k}` with strictly increasing positions in
/// `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepMeasure {
    positions: Vec<BigRational>,
    masses: Vec<BigRational>,
    /// `prefix[k] = masses[0] + ... + masses[k-1]`.
    prefix: Vec<BigRational>,
}

impl StepMeasure {
    /// Sorts the atoms and merges repeated positions.
    pub fn new(mut atoms: Vec<(BigRational, BigRational)>) -> Result<Self> {
        let zero = BigRational::zero();
        let one = BigRational::one();
        for (p, m) in &atoms {
            if *p < zero || *p > one {
                return Err(Error::InvalidInput(format!(
                    "atom position {p} lies outside [0, 1]"
                )));
            }
            if m.is_negative() {
                return Err(Error::InvalidInput(format!("negative atom mass {m}")));
            }
        }
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut positions: Vec<BigRational> = Vec::with_capacity(atoms.len());
        let mut masses: Vec<BigRational> = Vec::with_capacity(atoms.len());
        for (p, m) in atoms {
            if positions.last() == Some(&p) {
                *masses.last_mut().unwrap() += m;
            } else {
                positions.push(p);
                masses.push(m);
            }
        }
        let mut prefix = Vec::with_capacity(masses.len() + 1);
        prefix.push(BigRational::zero());
        for m in &masses {
            let next = prefix.last().unwrap() + m;
            prefix.push(next);
        }
        Ok(StepMeasure {
            positions,
            masses,
            prefix,
        })
    }

    pub fn empty() -> Self {
        StepMeasure {
            positions: Vec::new(),
            masses: Vec::new(),
            prefix: vec![BigRational::zero()],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[BigRational] {
        &self.positions
    }

    pub fn masses(&self) -> &[BigRational] {
        &self.masses
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&BigRational, &BigRational)> {
        self.positions.iter().zip(&self.masses)
    }

    pub fn total(&self) -> &BigRational {
        self.prefix.last().unwrap()
    }

    /// Mass of atoms with index in `start..end`.
    pub fn range_mass(&self, start: usize, end: usize) -> BigRational {
        if end <= start {
            BigRational::zero()
        } else {
            &self.prefix[end] - &self.prefix[start]
        }
    }

    /// Exact mass of the interval, honoring endpoint inclusion.
    pub fn interval_mass(&self, iv: &Interval) -> Result<BigRational> {
        if iv.lo > iv.hi {
            return Err(Error::InvalidInput(format!(
                "interval lower end {} exceeds upper end {}",
                iv.lo, iv.hi
            )));
        }
        let start = if iv.lo_closed {
            self.positions.partition_point(|p| *p < iv.lo)
        } else {
            self.positions.partition_point(|p| *p <= iv.lo)
        };
        let end = if iv.hi_closed {
            self.positions.partition_point(|p| *p <= iv.hi)
        } else {
            self.positions.partition_point(|p| *p < iv.hi)
        };
        Ok(self.range_mass(start, end))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn delta(p: BigRational, m: BigRational) -> StepMeasure {
        StepMeasure::new(vec![(p, m)]).unwrap()
    }

    #[test]
    fn interval_mass_examples() {
        let v = StepMeasure::new(vec![(ratio(0, 1), ratio(1, 2)), (ratio(1, 1), ratio(1, 2))]).unwrap();
        let m = v.interval_mass(&Interval::closed(ratio(0, 1), ratio(1, 2))).unwrap();
        assert_eq!(m, ratio(1, 2));

        let d = delta(ratio(1, 2), ratio(1, 1));
        let m = d
            .interval_mass(&Interval::closed_open(ratio(48, 100), ratio(52, 100)))
            .unwrap();
        assert_eq!(m, ratio(1, 1));
        let m = d
            .interval_mass(&Interval::closed(ratio(482, 1000), ratio(498, 1000)))
            .unwrap();
        assert_eq!(m, ratio(0, 1));
    }

    #[test]
    fn endpoint_inclusion_is_honored() {
        let d = delta(ratio(1, 2), ratio(1, 3));
        let half = ratio(1, 2);
        assert_eq!(d.interval_mass(&Interval::closed(half.clone(), half.clone())).unwrap(), ratio(1, 3));
        assert_eq!(d.interval_mass(&Interval::open(ratio(0, 1), half.clone())).unwrap(), ratio(0, 1));
        assert_eq!(d.interval_mass(&Interval::closed_open(half.clone(), ratio(1, 1))).unwrap(), ratio(1, 3));
        assert!(d.interval_mass(&Interval::closed(ratio(1, 1), ratio(0, 1))).is_err());
    }

    #[test]
    fn constructor_merges_and_validates() {
        let v = StepMeasure::new(vec![
            (ratio(1, 3), ratio(1, 4)),
            (ratio(0, 1), ratio(1, 4)),
            (ratio(1, 3), ratio(1, 2)),
        ])
        .unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.masses()[1], ratio(3, 4));
        assert_eq!(*v.total(), ratio(1, 1));
        assert!(StepMeasure::new(vec![(ratio(3, 2), ratio(1, 1))]).is_err());
        assert!(StepMeasure::new(vec![(ratio(1, 2), ratio(-1, 1))]).is_err());
    }
}
