use statrs::distribution::{ContinuousCDF, StudentsT};

use super::FitError;
use crate::Real;

/// Product-moment correlation.
pub fn pearson<T: Real>(x: &[T], y: &[T]) -> Result<T, FitError> {
    if x.len() != y.len() {
        return Err(FitError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(FitError::InsufficientPoints { usable: x.len() });
    }
    let n = T::of_usize(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
        sxy = sxy + dx * dy;
    }
    if !(sxx > T::zero()) || !(syy > T::zero()) {
        return Err(FitError::ConstantInput);
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

/// 1-based ranks with ties sharing the mean of their positions.
pub fn mid_ranks<T: Real>(v: &[T]) -> Vec<T> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![T::zero(); v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = T::of((start + 1 + end) as f64 / 2.0);
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with a two-sided p-value from the t approximation.
pub fn spearman<T: Real>(x: &[T], y: &[T]) -> Result<(T, T), FitError> {
    let r = pearson(&mid_ranks(x), &mid_ranks(y))?;
    let df = x.len() as f64 - 2.0;
    let rf = r.f64();
    let p = if df < 1.0 {
        1.0
    } else if rf.abs() >= 1.0 {
        0.0
    } else {
        let t = rf * (df / (1.0 - rf * rf)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok((r, T::of(p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn exact_linear_relations() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let up: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let down: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson(&x, &up).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson(&x, &down).unwrap(), -1.0, epsilon = 1e-15);
        assert_eq!(pearson(&x, &[3.0; 4]), Err(FitError::ConstantInput));
    }

    #[test]
    fn ten_pair_fixture() {
        let x = [1.0, 2.5, 3.1, 4.8, 5.0, 6.2, 7.7, 8.1, 9.4, 10.0];
        let y = [2.1, 2.9, 3.8, 5.2, 4.9, 7.1, 7.0, 9.3, 9.1, 11.4];
        // numpy.corrcoef
        assert_abs_diff_eq!(pearson(&x, &y).unwrap(), 0.9738360559723541, epsilon = 1e-12);
    }

    #[test]
    fn monotone_transforms_are_rank_perfect() {
        let x: Vec<f64> = (1..=9).map(f64::from).collect();
        let cube: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v.exp()).collect();
        assert_abs_diff_eq!(spearman(&x, &cube).unwrap().0, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(spearman(&x, &neg).unwrap().0, -1.0, epsilon = 1e-15);
        assert_eq!(spearman(&x, &cube).unwrap().1, 0.0);
    }

    fn brute_rank(v: &[f64], i: usize) -> f64 {
        let less = v.iter().filter(|&&w| w < v[i]).count() as f64;
        let equal = v.iter().filter(|&&w| w == v[i]).count() as f64;
        less + (equal + 1.0) / 2.0
    }

    #[test]
    fn tie_heavy_fixture() {
        let a = [1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 4.0, 5.0, 5.0, 6.0];
        let b = [2.0, 1.0, 2.0, 2.0, 3.0, 5.0, 5.0, 4.0, 6.0, 6.0];
        let ra: Vec<f64> = (0..a.len()).map(|i| brute_rank(&a, i)).collect();
        let rb: Vec<f64> = (0..b.len()).map(|i| brute_rank(&b, i)).collect();
        assert_eq!(mid_ranks(&a), ra);
        let (r, p) = spearman(&a, &b).unwrap();
        assert_abs_diff_eq!(r, pearson(&ra, &rb).unwrap(), epsilon = 1e-15);
        // scipy.stats.spearmanr
        assert_abs_diff_eq!(r, 0.8459119496855346, epsilon = 1e-12);
        assert_abs_diff_eq!(p, 0.002038939037463687, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn pearson_affine_invariant(
            pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            a in -10.0f64..10.0, b in 0.1f64..10.0, c in -10.0f64..10.0, d in 0.1f64..10.0,
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            if let Ok(r) = pearson(&x, &y) {
                let x2: Vec<f64> = x.iter().map(|v| a + b * v).collect();
                let y2: Vec<f64> = y.iter().map(|v| c + d * v).collect();
                prop_assert!((pearson(&x2, &y2).unwrap() - r).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
