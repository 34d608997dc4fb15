use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::{DatasetSlice, WindowSpec};
use crate::glm::spearman;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupMean {
    pub key: u64,
    pub size: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppendixYear {
    pub year: i32,
    /// Researchers with at least one publication to date.
    pub active: usize,
    /// Share of active researchers with exactly one publication to date.
    pub single_publication: Option<f64>,
    /// Mean new coauthors in the year by prior coauthor count.
    pub coauthor_advantage: Vec<GroupMean>,
    /// Mean publications in the year by prior publication count.
    pub publication_advantage: Vec<GroupMean>,
    /// Spearman correlation and p-value between cumulative publications and
    /// cumulative coauthors.
    pub spearman: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppendixReport {
    pub years: Vec<AppendixYear>,
}

fn means(acc: BTreeMap<u64, (usize, f64)>) -> Vec<GroupMean> {
    acc.into_iter().map(|(key, (size, sum))| GroupMean { key, size, mean: sum / size as f64 }).collect()
}

/// Descriptive statistics behind the modelling assumptions, per interval.
/// Year-on-year groupings only use researchers with a prior publication.
pub fn appendix_diagnostics(slice: &DatasetSlice, spec: &WindowSpec, intervals: std::ops::RangeInclusive<usize>) -> AppendixReport {
    let years = intervals
        .map(|j| {
            let (t_prev, t) = (spec.t(j - 1), spec.t(j));
            let mut active = 0;
            let mut single = 0;
            let mut coauthor: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
            let mut publication: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
            let (mut hs, mut ks) = (Vec::new(), Vec::new());
            for tl in &slice.members {
                let h = tl.pubs_between(spec.history_start - 1, t);
                if h >= 1 {
                    active += 1;
                    single += usize::from(h == 1);
                    hs.push(f64::from(h));
                    ks.push(f64::from(tl.coauthors_through(t)));
                }
                let h_prev = tl.pubs_between(spec.history_start - 1, t_prev);
                if h_prev >= 1 {
                    let c = coauthor.entry(u64::from(tl.coauthors_through(t_prev))).or_default();
                    c.0 += 1;
                    c.1 += f64::from(spec.new_coauthors_in(tl, j));
                    let p = publication.entry(u64::from(h_prev)).or_default();
                    p.0 += 1;
                    p.1 += f64::from(spec.pubs_in(tl, j));
                }
            }
            AppendixYear {
                year: t,
                active,
                single_publication: (active > 0).then(|| single as f64 / active as f64),
                coauthor_advantage: means(coauthor),
                publication_advantage: means(publication),
                spearman: spearman(&hs, &ks).ok(),
            }
        })
        .collect();
    AppendixReport { years }
}
