use rayon::prelude::*;
use serde::Serialize;

use super::FitError;
use crate::rng::{self, poisson_cdf};

pub const DEFAULT_BOOTSTRAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    /// Poisson rate under test; NaN for two-sample tests.
    pub lambda: f64,
}

/// Largest gap between the empirical CDF and the Poisson(`lambda`) CDF.
///
/// Both are step functions with jumps on the integers, so the supremum is
/// attained on `0..=max(sample)`.
pub fn ks_statistic_poisson(sample: &[u64], lambda: f64) -> f64 {
    let max = sample.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0usize; max + 1];
    for &x in sample {
        counts[x as usize] += 1;
    }
    let n = sample.len() as f64;
    let mut cum = 0usize;
    let mut d: f64 = 0.0;
    for (k, &c) in counts.iter().enumerate() {
        cum += c;
        let gap = (cum as f64 / n - poisson_cdf(k as u64, lambda)).abs();
        d = d.max(gap);
    }
    d
}

fn mean(sample: &[u64]) -> f64 {
    sample.iter().sum::<u64>() as f64 / sample.len() as f64
}

/// One-sample KS test of a count sample against a Poisson law.
///
/// With `lambda = None` the rate is the sample mean and every bootstrap
/// resample re-estimates its own. The p-value is `(1 + #{D* >= D}) / (B + 1)`
/// over `n_boot` parametric resamples; resample `b` draws from a stream keyed
/// by `(seed, b)`.
pub fn ks_test_poisson(sample: &[u64], lambda: Option<f64>, n_boot: usize, seed: u64) -> Result<KsOutcome, FitError> {
    if sample.is_empty() {
        return Err(FitError::EmptySample);
    }
    let estimated = lambda.is_none();
    let lam = lambda.unwrap_or_else(|| mean(sample));
    if !(lam >= 0.0) || !lam.is_finite() || (!estimated && lam == 0.0) {
        return Err(FitError::InvalidRate(lam));
    }
    let d = ks_statistic_poisson(sample, lam);
    let n = sample.len();
    let exceed = (0..n_boot as u64)
        .into_par_iter()
        .map(|b| {
            let mut s = rng::stream(rng::derive(seed, &[b]));
            let draw: Vec<u64> = (0..n).map(|_| rng::poisson(&mut s, lam)).collect();
            let lam_b = if estimated { mean(&draw) } else { lam };
            ks_statistic_poisson(&draw, lam_b)
        })
        .filter(|&db| db >= d - 1e-12)
        .count();
    Ok(KsOutcome { statistic: d, p_value: (1 + exceed) as f64 / (n_boot + 1) as f64, n, lambda: lam })
}

/// Kolmogorov survival function `Q(z) = P(K > z)`.
pub fn kolmogorov_q(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if z < 0.042 {
        return 1.0;
    }
    let p = if z < 1.18 {
        let y = (-1.233_700_550_136_169_8 / (z * z)).exp();
        2.256_758_334_191_025 * (-y.ln()).sqrt() * (y + y.powi(9) + y.powi(25) + y.powi(49))
    } else {
        let x = (-2.0 * z * z).exp();
        1.0 - 2.0 * (x - x.powi(4) + x.powi(9))
    };
    (1.0 - p).clamp(0.0, 1.0)
}

/// Two-sample KS test on integer samples with the asymptotic p-value.
pub fn ks_test_two_sample(a: &[u64], b: &[u64]) -> Result<KsOutcome, FitError> {
    if a.is_empty() || b.is_empty() {
        return Err(FitError::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let v = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let z = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsOutcome { statistic: d, p_value: kolmogorov_q(z), n: a.len() + b.len(), lambda: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn draws(lambda: f64, n: usize, seed: u64) -> Vec<u64> {
        let mut s = rng::stream(seed);
        (0..n).map(|_| rng::poisson(&mut s, lambda)).collect()
    }

    #[test]
    fn poisson_sample_rarely_rejected() {
        let rejections = (0..100)
            .filter(|&seed| {
                let sample = draws(3.0, 200, 1000 + seed);
                ks_test_poisson(&sample, Some(3.0), 400, seed).unwrap().p_value <= 0.05
            })
            .count();
        assert!(rejections <= 10, "{rejections} rejections");
    }

    #[test]
    fn zeros_against_rate_five_rejected() {
        let out = ks_test_poisson(&[0; 50], Some(5.0), 200, 1).unwrap();
        assert!(out.statistic > 0.99);
        assert!(out.p_value < 0.01);
    }

    #[test]
    fn statistic_vanishes_for_large_matching_samples() {
        let d_small = ks_statistic_poisson(&draws(4.0, 100, 2), 4.0);
        let d_large = ks_statistic_poisson(&draws(4.0, 100_000, 2), 4.0);
        assert!(d_large < 0.01);
        assert!(d_large < d_small);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let s = draws(2.0, 80, 5);
        let a = ks_test_poisson(&s, None, 300, 42).unwrap();
        let b = ks_test_poisson(&s, None, 300, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_samples_have_p_one() {
        let a = draws(2.0, 50, 3);
        let out = ks_test_two_sample(&a, &a).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.p_value, 1.0);
    }

    #[test]
    fn distant_rates_are_separated() {
        let out = ks_test_two_sample(&draws(1.0, 500, 1), &draws(10.0, 500, 2)).unwrap();
        assert!(out.p_value < 0.001);
    }

    #[test]
    fn same_distribution_reject_rate() {
        let rejections = (0..200)
            .filter(|&t| {
                ks_test_two_sample(&draws(3.0, 300, 2 * t), &draws(3.0, 300, 2 * t + 1)).unwrap().p_value <= 0.05
            })
            .count();
        assert!(rejections <= 14, "{rejections} of 200");
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Q(1.36) ~= 0.05, Q(1.63) ~= 0.01
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_q(1.628) - 0.01).abs() < 5e-4);
        assert!((kolmogorov_q(0.5) - 0.9639).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn two_sample_is_symmetric(a in prop::collection::vec(0u64..20, 1..60), b in prop::collection::vec(0u64..20, 1..60)) {
            let ab = ks_test_two_sample(&a, &b).unwrap();
            let ba = ks_test_two_sample(&b, &a).unwrap();
            prop_assert_eq!(ab.statistic, ba.statistic);
            prop_assert_eq!(ab.p_value, ba.p_value);
        }
    }
}
