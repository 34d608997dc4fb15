//! Seeded random streams and Poisson sampling.
//!
//! Every stochastic routine draws from a [`Stream`] built by [`stream`] from a
//! 64-bit seed. Sub-seeds are derived by hashing indices into the master seed,
//! so a parallel loop over `(item, replicate)` pairs produces the same numbers
//! regardless of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a sequence of indices.
pub fn derive(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix(master), |acc, &p| mix(acc ^ mix(p.wrapping_add(GOLDEN))))
}

/// FNV-1a over the bytes of a label, for keying streams by name.
pub fn hash_label(label: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for a named pipeline stage.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    derive(master, &[hash_label(stage)])
}

/// Draws from Poisson(`lambda`).
///
/// Sequential-search inversion below 10, Hörmann's transformed rejection
/// (PTRS) above. Non-positive or non-finite rates return 0.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return 0;
    }
    if lambda < 10.0 {
        poisson_inversion(rng, lambda)
    } else {
        poisson_ptrs(rng, lambda)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    let u: f64 = rng.random();
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut k = 0u64;
    while u > cdf {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
        if p <= 0.0 && k as f64 > lambda {
            // cdf stalled below u through rounding
            break;
        }
    }
    k
}

fn poisson_ptrs<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -lambda + k * loglam - ln_gamma(k + 1.0) {
            return k as u64;
        }
    }
}

/// Poisson probability mass at `x`, computed in log space.
pub fn poisson_pmf(x: u64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    let xf = x as f64;
    (xf * lambda.ln() - lambda - ln_gamma(xf + 1.0)).exp()
}

/// Poisson cumulative distribution P(X <= x).
pub fn poisson_cdf(x: u64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    // Upper regularized incomplete gamma: P(X <= x) = Q(x + 1, lambda).
    statrs::function::gamma::gamma_ur(x as f64 + 1.0, lambda).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(lambda: f64, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = stream(seed);
        let draws: Vec<f64> = (0..n).map(|_| poisson(&mut rng, lambda) as f64).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        (mean, var)
    }

    #[test]
    fn inversion_and_rejection_have_poisson_moments() {
        for &lambda in &[0.3, 2.5, 9.9, 10.0, 37.0, 400.0] {
            let n = 200_000;
            let (mean, var) = moments(lambda, n, 11);
            let se = (lambda / n as f64).sqrt();
            assert!((mean - lambda).abs() < 4.0 * se, "lambda {lambda}: mean {mean}");
            assert!((var / lambda - 1.0).abs() < 0.03, "lambda {lambda}: var {var}");
        }
    }

    #[test]
    fn rejection_sampler_matches_pmf() {
        let lambda = 15.0;
        let n = 300_000;
        let mut rng = stream(5);
        let mut hist = vec![0usize; 80];
        for _ in 0..n {
            let k = poisson(&mut rng, lambda) as usize;
            hist[k.min(79)] += 1;
        }
        for (k, &count) in hist.iter().enumerate().take(30).skip(5) {
            let p = poisson_pmf(k as u64, lambda);
            let expected = p * n as f64;
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((count as f64 - expected).abs() < 5.0 * sd, "k={k}");
        }
    }

    #[test]
    fn degenerate_rates_give_zero() {
        let mut rng = stream(1);
        assert_eq!(poisson(&mut rng, 0.0), 0);
        assert_eq!(poisson(&mut rng, -1.0), 0);
        assert_eq!(poisson(&mut rng, f64::NAN), 0);
        assert_eq!(poisson(&mut rng, 1e-300), 0);
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        assert_eq!(derive(7, &[1, 2]), derive(7, &[1, 2]));
        assert_ne!(derive(7, &[1, 2]), derive(7, &[2, 1]));
        assert_ne!(derive(7, &[1]), derive(8, &[1]));
        assert_ne!(stage_seed(7, "tune"), stage_seed(7, "predict"));
    }

    #[test]
    fn cdf_agrees_with_pmf_sum() {
        for &lambda in &[0.5, 3.0, 12.0] {
            let mut acc = 0.0;
            for x in 0..40 {
                acc += poisson_pmf(x, lambda);
                assert!((poisson_cdf(x, lambda) - acc).abs() < 1e-12);
            }
        }
    }
}
