use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::{DatasetSlice, WindowSpec};
use crate::glm::FitError;

/// Sample autocorrelation at lags `1..=max_lag`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>, FitError> {
    let n = series.len();
    if n < 2 {
        return Err(FitError::InsufficientPoints { usable: n });
    }
    if max_lag >= n {
        return Err(FitError::LengthMismatch(max_lag, n));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|y| y - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if !(denom > 0.0) {
        return Err(FitError::ConstantInput);
    }
    Ok((1..=max_lag)
        .map(|l| dev[..n - l].iter().zip(&dev[l..]).map(|(a, b)| a * b).sum::<f64>() / denom)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutocorrGroup {
    pub k0: u64,
    pub size: usize,
    /// Members whose series was constant and so had no coefficient.
    pub constant: usize,
    /// Share of all researchers in this group.
    pub q: f64,
    /// Mean coefficient per lag over members with a defined series.
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupedAutocorrelation {
    pub max_lag: usize,
    pub groups: Vec<AutocorrGroup>,
    /// `q`-weighted mean of the group means, per lag.
    pub weighted: Vec<f64>,
}

/// Autocorrelation of each researcher's cumulative coauthor series over
/// intervals `origin..=last`, averaged within groups sharing the coauthor
/// count at `origin`.
pub fn grouped_autocorrelation(slice: &DatasetSlice, spec: &WindowSpec, origin: usize, last: usize, max_lag: usize) -> GroupedAutocorrelation {
    let mut acc: BTreeMap<u64, (usize, usize, Vec<f64>)> = BTreeMap::new();
    for tl in &slice.members {
        let series: Vec<f64> = (origin..=last).map(|j| f64::from(tl.coauthors_through(spec.t(j)))).collect();
        let k0 = u64::from(tl.coauthors_through(spec.t(origin)));
        let e = acc.entry(k0).or_insert_with(|| (0, 0, vec![0.0; max_lag]));
        e.0 += 1;
        match autocorrelation(&series, max_lag) {
            Ok(r) => e.2.iter_mut().zip(r).for_each(|(s, v)| *s += v),
            Err(_) => e.1 += 1,
        }
    }
    let total = slice.members.len().max(1) as f64;
    let groups: Vec<AutocorrGroup> = acc
        .into_iter()
        .map(|(k0, (size, constant, sums))| {
            let defined = (size - constant) as f64;
            let mean = sums.into_iter().map(|s| if defined > 0.0 { s / defined } else { f64::NAN }).collect();
            AutocorrGroup { k0, size, constant, q: size as f64 / total, mean }
        })
        .collect();
    let mut weighted = vec![0.0; max_lag];
    let mut weight = 0.0;
    for g in groups.iter().filter(|g| g.size > g.constant) {
        weight += g.q;
        weighted.iter_mut().zip(&g.mean).for_each(|(w, m)| *w += g.q * m);
    }
    if weight > 0.0 {
        weighted.iter_mut().for_each(|w| *w /= weight);
    }
    GroupedAutocorrelation { max_lag, groups, weighted }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_lag_one() {
        assert_eq!(autocorrelation(&[1.0, 2.0, 3.0, 4.0, 5.0], 1).unwrap(), vec![0.4]);
    }

    #[test]
    fn alternating_series_is_negative() {
        let y: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(autocorrelation(&y, 1).unwrap()[0] < 0.0);
    }

    #[test]
    fn terms_at_the_mean_vanish() {
        // Every lag-1 product pairs a value with the mean.
        let r = autocorrelation(&[3.0, 2.0, 1.0, 2.0], 1).unwrap();
        assert_eq!(r[0], 0.0);
    }

    #[test]
    fn undefined_cases() {
        assert_eq!(autocorrelation(&[2.0; 4], 1), Err(FitError::ConstantInput));
        assert!(autocorrelation(&[1.0], 0).is_err());
        assert!(autocorrelation(&[1.0, 2.0], 2).is_err());
    }

    proptest! {
        #[test]
        fn affine_invariance(y in prop::collection::vec(-50.0f64..50.0, 3..30), a in -20.0f64..20.0, b in 0.1f64..20.0) {
            if let Ok(r) = autocorrelation(&y, y.len() - 1) {
                let z: Vec<f64> = y.iter().map(|v| a + b * v).collect();
                let rz = autocorrelation(&z, y.len() - 1).unwrap();
                for (u, v) in r.iter().zip(&rz) {
                    prop_assert!((u - v).abs() < 1e-12);
                }
            }
        }
    }
}
