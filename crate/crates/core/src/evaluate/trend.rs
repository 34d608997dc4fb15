use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{AuthorTimeline, DatasetSlice, WindowSpec};
use crate::glm::{ks_test_two_sample, pearson, KsOutcome};
use crate::predict::Forecast;

/// Test researchers sharing a coauthor count at the forecast origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendGroup {
    pub k0: u64,
    pub size: usize,
    /// Mean observed cumulative coauthor count per year.
    pub observed: Vec<f64>,
    /// Mean predicted cumulative coauthor count per year.
    pub predicted: Vec<f64>,
    /// Mean observed new coauthors within each year.
    pub observed_new: Vec<f64>,
    /// Mean predicted new coauthors within each year.
    pub predicted_new: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendReport {
    pub years: Vec<i32>,
    pub groups: Vec<TrendGroup>,
    /// Pearson correlation of the paired individual lists, per year.
    pub s1: Vec<Option<f64>>,
    /// Pearson correlation of the two lists after sorting each, per year.
    pub s2: Vec<Option<f64>>,
    pub researchers: usize,
}

/// Pairs each forecast with its timeline and lists the shared evaluation years
/// as `(interval, year, index into forecast years)`.
fn align<'a>(
    test: &'a DatasetSlice,
    forecasts: &'a [Forecast],
    spec: &WindowSpec,
) -> Result<(Vec<(&'a AuthorTimeline, &'a Forecast)>, Vec<(usize, i32, usize)>), EvalError> {
    let by_author: HashMap<&str, &AuthorTimeline> = test.members.iter().map(|t| (t.author.as_str(), t)).collect();
    let pairs: Vec<_> = forecasts
        .iter()
        .filter_map(|f| by_author.get(f.author.as_str()).map(|t| (*t, f)))
        .collect();
    if pairs.is_empty() {
        return Err(EvalError::Empty("no forecast matches a test researcher"));
    }
    let years: Vec<(usize, i32, usize)> = (spec.test_origin + 1..=spec.test_end.min(spec.intervals()))
        .filter_map(|l| pairs[0].1.year_index(spec.t(l)).map(|i| (l, spec.t(l), i)))
        .collect();
    if years.is_empty() {
        return Err(EvalError::NoOverlap);
    }
    Ok((pairs, years))
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Observed against predicted coauthor counts, grouped by the coauthor
/// count at the forecast origin.
pub fn trend_report(test: &DatasetSlice, forecasts: &[Forecast], spec: &WindowSpec) -> Result<TrendReport, EvalError> {
    let (pairs, years) = align(test, forecasts, spec)?;
    let n_years = years.len();
    struct Acc {
        size: usize,
        obs: Vec<f64>,
        pred: Vec<f64>,
        obs_new: Vec<f64>,
        pred_new: Vec<f64>,
    }
    let mut groups: BTreeMap<u64, Acc> = BTreeMap::new();
    let mut obs_lists = vec![Vec::with_capacity(pairs.len()); n_years];
    let mut pred_lists = vec![Vec::with_capacity(pairs.len()); n_years];
    for (tl, f) in &pairs {
        let k0 = f.start.1;
        let g = groups.entry(k0).or_insert_with(|| Acc {
            size: 0,
            obs: vec![0.0; n_years],
            pred: vec![0.0; n_years],
            obs_new: vec![0.0; n_years],
            pred_new: vec![0.0; n_years],
        });
        g.size += 1;
        for (y, &(l, year, fi)) in years.iter().enumerate() {
            let observed = f64::from(tl.coauthors_through(year));
            let predicted = f.mean_k[fi];
            let prev_pred = if fi == 0 { k0 as f64 } else { f.mean_k[fi - 1] };
            g.obs[y] += observed;
            g.pred[y] += predicted;
            g.obs_new[y] += f64::from(spec.new_coauthors_in(tl, l));
            g.pred_new[y] += predicted - prev_pred;
            obs_lists[y].push(observed);
            pred_lists[y].push(predicted);
        }
    }
    let groups = groups
        .into_iter()
        .map(|(k0, a)| {
            let n = a.size as f64;
            let div = |v: Vec<f64>| v.into_iter().map(|x| x / n).collect();
            TrendGroup { k0, size: a.size, observed: div(a.obs), predicted: div(a.pred), observed_new: div(a.obs_new), predicted_new: div(a.pred_new) }
        })
        .collect();
    let s1 = (0..n_years).map(|y| pearson(&obs_lists[y], &pred_lists[y]).ok()).collect();
    let s2 = (0..n_years).map(|y| pearson(&sorted(&obs_lists[y]), &sorted(&pred_lists[y])).ok()).collect();
    Ok(TrendReport { years: years.iter().map(|y| y.1).collect(), groups, s1, s2, researchers: pairs.len() })
}

/// Which simulated values stand in for the predicted distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionMode {
    /// Replicate 0 only, one value per researcher.
    #[default]
    SingleReplicate,
    /// Every replicate of every researcher.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionYear {
    pub year: i32,
    pub observed: BTreeMap<u64, u64>,
    pub predicted: BTreeMap<u64, u64>,
    pub ks: KsOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionReport {
    pub mode: DistributionMode,
    pub years: Vec<DistributionYear>,
    /// Years with a KS p-value below 0.05.
    pub rejected: usize,
}

fn histogram(v: &[u64]) -> BTreeMap<u64, u64> {
    let mut h = BTreeMap::new();
    for &x in v {
        *h.entry(x).or_insert(0) += 1;
    }
    h
}

/// Per-year two-sample comparison of observed and simulated coauthor counts.
pub fn distribution_report(
    test: &DatasetSlice,
    forecasts: &[Forecast],
    spec: &WindowSpec,
    mode: DistributionMode,
) -> Result<DistributionReport, EvalError> {
    let (pairs, years) = align(test, forecasts, spec)?;
    if mode == DistributionMode::Pooled && pairs.iter().any(|(_, f)| f.trajectories.is_none()) {
        return Err(EvalError::MissingTrajectories);
    }
    let mut out = Vec::with_capacity(years.len());
    for &(_, year, fi) in &years {
        let observed: Vec<u64> = pairs.iter().map(|(tl, _)| u64::from(tl.coauthors_through(year))).collect();
        let predicted: Vec<u64> = match mode {
            DistributionMode::SingleReplicate => pairs.iter().map(|(_, f)| f.first_replicate_k[fi]).collect(),
            DistributionMode::Pooled => pairs
                .iter()
                .flat_map(|(_, f)| f.trajectories.iter().flatten().map(move |path| path[fi].k))
                .collect(),
        };
        let ks = ks_test_two_sample(&observed, &predicted)?;
        out.push(DistributionYear { year, observed: histogram(&observed), predicted: histogram(&predicted), ks });
    }
    let rejected = out.iter().filter(|y| y.ks.p_value < 0.05).count();
    Ok(DistributionReport { mode, years: out, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Role, YearCounts};
    use crate::predict::Step;

    fn spec() -> WindowSpec {
        WindowSpec {
            history_start: 1990,
            cutpoints: WindowSpec::annual(1999, 2006),
            max_history: 30,
            fit_history: 3,
            fit_intervals: 3,
            max_annual: 5,
            test_history_cap: 30,
            validation_start: 1,
            validation_end: 2,
            test_origin: 1,
            test_eval_start: 2,
            test_end: 4,
        }
    }

    /// Researcher `i` has `1 + i % spread` coauthors by 2000 and gains `i % 3` a year after.
    fn fixture(n: usize, spread: usize) -> (DatasetSlice, Vec<Forecast>) {
        let s = spec();
        let mut members = Vec::new();
        let mut forecasts = Vec::new();
        for i in 1..=n {
            let gain = (i % 3) as u32;
            let mut recs = vec![YearCounts { year: 1995, pubs: 1, new_coauthors: (1 + i % spread) as u32 }];
            for y in 2001..=2004 {
                recs.push(YearCounts { year: y, pubs: 1, new_coauthors: gain });
            }
            let tl = AuthorTimeline::from_records(format!("a{i}"), recs);
            let years = vec![2001, 2002, 2003];
            let ks: Vec<u64> = years.iter().map(|&y| u64::from(tl.coauthors_through(y))).collect();
            let path: Vec<Step> = years.iter().zip(&ks).map(|(&year, &k)| Step { year, h: 1, k }).collect();
            forecasts.push(Forecast {
                author: tl.author.clone(),
                start: (1, (1 + i % spread) as u64),
                years,
                mean_h: vec![1.0; 3],
                mean_k: ks.iter().map(|&k| k as f64).collect(),
                q05_k: vec![0.0; 3],
                q95_k: vec![0.0; 3],
                first_replicate_k: ks.clone(),
                trajectories: Some(vec![path.clone(), path]),
                replicates: 2,
                seed: 0,
            });
            members.push(tl);
        }
        (DatasetSlice { role: Role::Test, anchor_total: n, members, window: s }, forecasts)
    }

    #[test]
    fn perfect_prediction() {
        let (test, fc) = fixture(12, 100);
        let r = trend_report(&test, &fc, &spec()).unwrap();
        assert_eq!(r.years, vec![2001, 2002, 2003]);
        for y in 0..3 {
            assert!((r.s1[y].unwrap() - 1.0).abs() < 1e-12);
            assert!((r.s2[y].unwrap() - 1.0).abs() < 1e-12);
        }
        for g in &r.groups {
            assert_eq!(g.observed, g.predicted);
            assert_eq!(g.observed_new, g.predicted_new);
        }
        let d = distribution_report(&test, &fc, &spec(), DistributionMode::SingleReplicate).unwrap();
        assert!(d.years.iter().all(|y| y.ks.p_value == 1.0));
        let pooled = distribution_report(&test, &fc, &spec(), DistributionMode::Pooled).unwrap();
        assert!(pooled.years.iter().all(|y| y.ks.statistic == 0.0));
    }

    #[test]
    fn permuted_prediction_keeps_s2() {
        let (test, mut fc) = fixture(12, 100);
        let rotated: Vec<_> = (0..fc.len()).map(|i| fc[(i + 5) % fc.len()].mean_k.clone()).collect();
        for (f, m) in fc.iter_mut().zip(rotated) {
            f.mean_k = m;
        }
        let r = trend_report(&test, &fc, &spec()).unwrap();
        for y in 0..3 {
            assert!((r.s2[y].unwrap() - 1.0).abs() < 1e-12);
            assert!(r.s1[y].unwrap() < 1.0);
        }
        // s1 is the plain correlation of the flattened pairs.
        let obs: Vec<f64> = test.members.iter().map(|t| f64::from(t.coauthors_through(2002))).collect();
        let pred: Vec<f64> = fc.iter().map(|f| f.mean_k[1]).collect();
        assert_eq!(r.s1[1].unwrap(), pearson(&obs, &pred).unwrap());
    }

    #[test]
    fn shifted_prediction_is_rejected() {
        let (test, mut fc) = fixture(200, 4);
        for f in &mut fc {
            f.first_replicate_k.iter_mut().for_each(|k| *k += 5);
        }
        let d = distribution_report(&test, &fc, &spec(), DistributionMode::SingleReplicate).unwrap();
        assert!(d.years.iter().all(|y| y.ks.p_value < 0.01));
        assert_eq!(d.rejected, 3);
    }

    #[test]
    fn disjoint_years_are_fatal() {
        let (test, mut fc) = fixture(4, 100);
        for f in &mut fc {
            f.years = vec![1980, 1981, 1982];
        }
        assert_eq!(trend_report(&test, &fc, &spec()), Err(EvalError::NoOverlap));
    }

    #[test]
    fn pooled_needs_paths() {
        let (test, mut fc) = fixture(4, 100);
        fc[0].trajectories = None;
        assert_eq!(distribution_report(&test, &fc, &spec(), DistributionMode::Pooled), Err(EvalError::MissingTrajectories));
    }
}
