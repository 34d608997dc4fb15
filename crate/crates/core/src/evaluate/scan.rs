use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetSlice, WindowSpec};
use crate::glm::{ks_test_poisson, DEFAULT_BOOTSTRAP};
use crate::rng::derive;

/// How researcher-years are grouped before testing new-coauthor counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupBy {
    /// Publications in the year.
    #[default]
    AnnualPubs,
    /// Publications in the year and coauthors before it.
    AnnualPubsAndCoauthors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanOptions {
    pub group_by: GroupBy,
    /// Groups smaller than this are reported but not tested.
    pub min_size: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { group_by: GroupBy::AnnualPubs, min_size: 20, bootstrap: DEFAULT_BOOTSTRAP, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanCell {
    pub year: i32,
    pub m: u64,
    /// Prior coauthor count, when grouping by it.
    pub l: Option<u64>,
    pub size: usize,
    pub mean: f64,
    /// `None` for groups below the minimum size.
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub cells: Vec<ScanCell>,
    /// Largest group per year as `(year, size)`, over all groups.
    pub largest_group: Vec<(i32, usize)>,
    pub tested: usize,
    pub insufficient: usize,
    /// Tested groups with `p < 0.05`.
    pub rejected: usize,
}

/// Tests whether new-coauthor counts look Poisson within each group of
/// researcher-years over `intervals` (publications in `1..=M` only).
pub fn poisson_character_scan(slice: &DatasetSlice, spec: &WindowSpec, intervals: std::ops::RangeInclusive<usize>, opts: ScanOptions) -> ScanReport {
    let mut groups: BTreeMap<(usize, u64, Option<u64>), Vec<u64>> = BTreeMap::new();
    for tl in &slice.members {
        for j in intervals.clone() {
            let m = u64::from(spec.pubs_in(tl, j));
            if m == 0 || m as usize > spec.max_annual {
                continue;
            }
            let l = match opts.group_by {
                GroupBy::AnnualPubs => None,
                GroupBy::AnnualPubsAndCoauthors => Some(u64::from(tl.coauthors_through(spec.t(j - 1)))),
            };
            groups.entry((j, m, l)).or_default().push(u64::from(spec.new_coauthors_in(tl, j)));
        }
    }
    let groups: Vec<_> = groups.into_iter().collect();
    let cells: Vec<ScanCell> = groups
        .par_iter()
        .map(|((j, m, l), sample)| {
            let mean = sample.iter().sum::<u64>() as f64 / sample.len() as f64;
            let ks = (sample.len() >= opts.min_size)
                .then(|| ks_test_poisson(sample, None, opts.bootstrap, derive(opts.seed, &[*j as u64, *m, l.map_or(u64::MAX, |v| v)])).ok())
                .flatten();
            ScanCell {
                year: spec.t(*j),
                m: *m,
                l: *l,
                size: sample.len(),
                mean,
                statistic: ks.map(|k| k.statistic),
                p_value: ks.map(|k| k.p_value),
            }
        })
        .collect();
    let mut largest: BTreeMap<i32, usize> = BTreeMap::new();
    for c in &cells {
        let e = largest.entry(c.year).or_insert(0);
        *e = (*e).max(c.size);
    }
    let tested = cells.iter().filter(|c| c.p_value.is_some()).count();
    let rejected = cells.iter().filter(|c| c.p_value.is_some_and(|p| p < 0.05)).count();
    ScanReport { insufficient: cells.len() - tested, tested, rejected, largest_group: largest.into_iter().collect(), cells }
}
