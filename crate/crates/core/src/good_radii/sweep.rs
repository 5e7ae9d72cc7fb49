//! Explicit good set as a union of half-open intervals.

use std::path::Path;

use itertools::Itertools;
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::{GoodRadiusOracle, GoodSetParams, Lattice};
use crate::error::{Error, Result};
use crate::measure::StepMeasure;
use crate::rational::{ExactPair, IntRepr};

/// Default cap on the number of gridline shells swept.
pub const DEFAULT_BUDGET: u128 = 1_000_000;

/// Disjoint, sorted, non-adjacent intervals `[lo, hi)` stored in lattice
/// units above the left endpoint of `I`.
#[derive(Clone, Debug)]
pub struct IntervalSet {
    lattice: Lattice,
    spans: Vec<(u64, u64)>,
    total_units: u128,
}

impl IntervalSet {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Spans in lattice units.
    pub fn spans(&self) -> &[(u64, u64)] {
        &self.spans
    }

    pub fn interval(&self, i: usize) -> (BigRational, BigRational) {
        let (lo, hi) = self.spans[i];
        (
            self.lattice.units_to_rational(u128::from(lo)),
            self.lattice.units_to_rational(u128::from(hi)),
        )
    }

    pub fn intervals(&self) -> impl Iterator<Item = (BigRational, BigRational)> + '_ {
        (0..self.spans.len()).map(|i| self.interval(i))
    }

    pub fn total_length(&self) -> BigRational {
        self.lattice.unit() * BigRational::from_integer(BigInt::from(self.total_units))
    }

    /// Exact membership; `false` outside `I`.
    pub fn contains(&self, t: &BigRational) -> bool {
        let Some(p) = self.lattice.locate(t) else {
            return false;
        };
        let Ok(whole) = u64::try_from(p.whole) else {
            return false;
        };
        // lo <= t < hi  <=>  lo <= floor(t) < hi for integer endpoints
        let k = self.spans.partition_point(|&(lo, _)| lo <= whole);
        k > 0 && whole < self.spans[k - 1].1
    }

    pub fn to_file(&self) -> IntervalSetFile {
        IntervalSetFile {
            intervals: self
                .intervals()
                .map(|(lo, hi)| {
                    [
                        IntRepr::from_bigint(lo.numer()),
                        IntRepr::from_bigint(lo.denom()),
                        IntRepr::from_bigint(hi.numer()),
                        IntRepr::from_bigint(hi.denom()),
                    ]
                })
                .collect(),
            total_length: ExactPair::from_rational(&self.total_length()),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer(&mut w, &self.to_file()).map_err(|e| Error::json(path, e))?;
        std::io::Write::flush(&mut w).map_err(|e| Error::io(path, e))
    }
}

/// On-disk good set. Each entry `[lo_num, lo_den, hi_num, hi_den]` is the
/// half-open interval `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSetFile {
    pub intervals: Vec<[IntRepr; 4]>,
    pub total_length: ExactPair,
}

impl IntervalSetFile {
    pub fn to_intervals(&self) -> Result<Vec<(BigRational, BigRational)>> {
        self.intervals
            .iter()
            .map(|[a, b, c, d]| {
                Ok((
                    ExactPair(a.clone(), b.clone()).to_rational()?,
                    ExactPair(c.clone(), d.clone()).to_rational()?,
                ))
            })
            .collect()
    }
}

fn shell_count(lambda: u128, depth: u32) -> Option<u128> {
    (1..=depth).try_fold(0u128, |acc, n| {
        acc.checked_add(lambda.checked_pow(2 * n)?.checked_add(1)?)
    })
}

/// Sweep the removed shells and heavy cells of `n = 1..=N` and return their
/// complement in `I`. Errors with `Resource` when more than `budget` shells
/// would be swept, and with `Certification` if the result is shorter than
/// `|I| (1 - 3 sum lambda^-n)`.
pub fn materialize_good_set(
    v: &StepMeasure,
    params: &GoodSetParams,
    budget: u128,
) -> Result<IntervalSet> {
    super::require_subprobability(v)?;
    let oracle = GoodRadiusOracle::new(v, params)?;
    let lattice = oracle.lattice().clone();
    let lambda = u128::from(params.lambda);
    let within = |d: u32| shell_count(lambda, d).is_some_and(|c| c <= budget);
    if !within(params.depth) {
        let feasible = (1..params.depth).rev().find(|&d| within(d)).unwrap_or(0);
        return Err(Error::Resource(format!(
            "depth {} sweeps more than {budget} gridline shells for lambda = {}; \
             the largest feasible depth is {feasible}",
            params.depth, params.lambda
        )));
    }
    let top = u64::try_from(lattice.resolution())
        .map_err(|_| Error::Resource("lattice resolution exceeds 64 bits".into()))?;

    let mut streams: Vec<Box<dyn Iterator<Item = (u64, u64)>>> = Vec::new();
    let mut heavy: Vec<(u64, u64)> = Vec::new();
    for n in 1..=params.depth {
        // all below fit in u64 because they are at most `top`
        let len = lattice.cell_len(n) as u64;
        let w = lattice.shell(n) as u64;
        let cells = lattice.cells(n) as u64;
        streams.push(Box::new((0..=cells).map(move |j| {
            let g = j * len;
            (g.saturating_sub(w), (g + w).min(top))
        })));
        let g = &oracle.gens[n as usize - 1];
        for (k, &cell) in g.cells.iter().enumerate() {
            if g.heavy[k] {
                let lo = cell as u64 * len;
                heavy.push((lo.saturating_sub(w), (lo + len + w).min(top)));
            }
        }
    }
    heavy.sort_unstable();
    let finest = lattice.cells(params.depth) as usize;
    streams.push(Box::new(heavy.into_iter()));

    let mut spans = Vec::with_capacity(finest);
    let mut total_units: u128 = 0;
    let mut cursor = 0u64;
    for (s, e) in streams.into_iter().kmerge_by(|a, b| a.0 < b.0) {
        if s > cursor {
            spans.push((cursor, s));
            total_units += u128::from(s - cursor);
        }
        cursor = cursor.max(e);
    }
    if cursor < top {
        spans.push((cursor, top));
        total_units += u128::from(top - cursor);
    }
    let set = IntervalSet {
        lattice,
        spans,
        total_units,
    };
    let bound = params.lower_bound();
    let total = set.total_length();
    if total < bound {
        return Err(Error::Certification(format!(
            "good set has length {total}, below the guaranteed {bound}"
        )));
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn single_atom_total() {
        let v = StepMeasure::new(vec![(ratio(1, 2), ratio(1, 1))]).unwrap();
        let set = materialize_good_set(&v, &GoodSetParams::unit(5, 1).unwrap(), DEFAULT_BUDGET)
            .unwrap();
        assert_eq!(set.total_length(), ratio(72, 125));
        assert_eq!(set.len(), 24);
        assert!(!set.contains(&ratio(1, 2)));
        assert!(set.contains(&ratio(3, 10)));
        assert!(set.contains(&ratio(1, 125)));
        assert!(!set.contains(&ratio(4, 125)));
        assert!(!set.contains(&ratio(1, 1)));
    }

    #[test]
    fn empty_measure_total() {
        let set = materialize_good_set(
            &StepMeasure::empty(),
            &GoodSetParams::unit(5, 1).unwrap(),
            DEFAULT_BUDGET,
        )
        .unwrap();
        assert_eq!(set.total_length(), ratio(3, 5));
        assert_eq!(set.len(), 25);
    }

    #[test]
    fn sub_interval() {
        let params = GoodSetParams::new(5, 1, ratio(1, 4), ratio(3, 4)).unwrap();
        let set = materialize_good_set(&StepMeasure::empty(), &params, DEFAULT_BUDGET).unwrap();
        assert_eq!(set.total_length(), ratio(3, 10));
        let (lo, hi) = set.interval(0);
        assert_eq!((lo, hi), (ratio(1, 4) + ratio(1, 250), ratio(1, 4) + ratio(4, 250)));
    }

    #[test]
    fn budget_is_enforced() {
        let params = GoodSetParams::unit(16, 3).unwrap();
        match materialize_good_set(&StepMeasure::empty(), &params, DEFAULT_BUDGET) {
            Err(Error::Resource(msg)) => assert!(msg.contains("largest feasible depth is 2")),
            other => panic!("expected a resource error, got {other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let v = StepMeasure::new(vec![(ratio(1, 2), ratio(1, 1))]).unwrap();
        let set = materialize_good_set(&v, &GoodSetParams::unit(5, 1).unwrap(), DEFAULT_BUDGET)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("good.json");
        set.write_json(&path).unwrap();
        let file: IntervalSetFile =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(file.total_length.to_rational().unwrap(), ratio(72, 125));
        let ivs = file.to_intervals().unwrap();
        assert_eq!(ivs[0], (ratio(1, 125), ratio(4, 125)));
        assert_eq!(ivs.len(), set.len());
    }
}
