use std::collections::BTreeMap;

use serde::Serialize;

use super::EvalError;
use crate::corpus::{DatasetSlice, WindowSpec};
use crate::hyperopt::HyperParams;
use crate::predict::{event_records, EventRecord, PmfForm};
use crate::training::{LambdaMatrix, ZetaMatrix};
use crate::Real;

/// Highest historical publication count with its own stratum.
pub const AUC_STRATA: u64 = 50;

/// Threshold-at-one-half accuracy over collaboration events.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AucCounts {
    /// Events predicted with `p > 0.5`.
    pub m1: u64,
    /// Non-events predicted with `p < 0.5`.
    pub m2: u64,
    /// Cases with `p` exactly 0.5.
    pub m3: u64,
    pub m: u64,
}

impl AucCounts {
    pub fn add(&mut self, p: f64, event: bool) {
        self.m += 1;
        if p == 0.5 {
            self.m3 += 1;
        } else if event && p > 0.5 {
            self.m1 += 1;
        } else if !event && p < 0.5 {
            self.m2 += 1;
        }
    }

    /// `(m1 + m2 + m3 / 2) / m`, or `None` when there are no cases.
    pub fn auc(&self) -> Option<f64> {
        (self.m > 0).then(|| (self.m1 as f64 + self.m2 as f64 + 0.5 * self.m3 as f64) / self.m as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AucReport {
    pub overall: AucCounts,
    pub by_year: BTreeMap<i32, AucCounts>,
    /// Keyed by historical publication count `1..=50`.
    pub by_history: BTreeMap<u64, AucCounts>,
    /// Researcher-years with more than 50 prior publications.
    pub overflow: AucCounts,
}

/// Tallies precomputed event probabilities.
pub fn auc_from_records(records: &[EventRecord]) -> AucReport {
    let mut r = AucReport { overall: AucCounts::default(), by_year: BTreeMap::new(), by_history: BTreeMap::new(), overflow: AucCounts::default() };
    for e in records {
        r.overall.add(e.p, e.observed);
        r.by_year.entry(e.year).or_default().add(e.p, e.observed);
        if e.h_prev > AUC_STRATA {
            r.overflow.add(e.p, e.observed);
        } else {
            r.by_history.entry(e.h_prev).or_default().add(e.p, e.observed);
        }
    }
    r
}

/// Event probabilities for each test researcher-year in `intervals`, scored
/// against whether a new coauthor actually appeared.
pub fn auc_report<T: Real>(
    test: &DatasetSlice,
    lambda: &LambdaMatrix<T>,
    zeta: &ZetaMatrix<T>,
    hp: HyperParams,
    spec: &WindowSpec,
    intervals: std::ops::RangeInclusive<usize>,
    form: PmfForm,
) -> Result<(AucReport, Vec<EventRecord>), EvalError> {
    let records = event_records(test, lambda, zeta, hp, spec, intervals, form)?;
    if records.is_empty() {
        return Err(EvalError::Empty("no researcher-year has a publication history"));
    }
    Ok((auc_from_records(&records), records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(p: f64, observed: bool, h_prev: u64, year: i32) -> EventRecord {
        EventRecord { author: "a".into(), year, h_prev, p, tail_mass: 0.0, observed }
    }

    #[test]
    fn certain_and_coin_flip_predictions() {
        let sure: Vec<_> = (0..10).map(|i| rec(1.0, true, 1 + i, 2000)).collect();
        assert_eq!(auc_from_records(&sure).overall.auc(), Some(1.0));
        let flip: Vec<_> = (0..10).map(|i| rec(0.5, i % 3 == 0, 2, 2000)).collect();
        let r = auc_from_records(&flip);
        assert_eq!(r.overall.m3, 10);
        assert_eq!(r.overall.auc(), Some(0.5));
    }

    #[test]
    fn strata_and_overflow() {
        let recs = vec![rec(0.9, true, 3, 2001), rec(0.1, true, 3, 2002), rec(0.2, false, 51, 2001), rec(0.7, false, 50, 2002)];
        let r = auc_from_records(&recs);
        assert_eq!(r.by_history[&3], AucCounts { m1: 1, m2: 0, m3: 0, m: 2 });
        assert_eq!(r.by_history[&50].auc(), Some(0.0));
        assert_eq!(r.overflow, AucCounts { m1: 0, m2: 1, m3: 0, m: 1 });
        assert_eq!(r.by_year[&2001].auc(), Some(1.0));
        assert_eq!(r.overall.auc(), Some(0.5));
    }

    proptest! {
        #[test]
        fn complement_classifier(cases in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..200)) {
            let recs: Vec<_> = cases.iter().map(|&(p, e)| rec(p, e, 1, 2000)).collect();
            let flipped: Vec<_> = cases.iter().map(|&(p, e)| rec(1.0 - p, e, 1, 2000)).collect();
            let a = auc_from_records(&recs).overall;
            let b = auc_from_records(&flipped).overall;
            if a.m3 == 0 && b.m3 == 0 {
                prop_assert!((a.auc().unwrap() + b.auc().unwrap() - 1.0).abs() < 1e-12);
            }
            prop_assert!(a.m1 + a.m2 + a.m3 <= a.m);
        }
    }
}
