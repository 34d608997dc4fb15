use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use super::FitError;
use crate::Real;

pub const IRLS_MAX_ITER: usize = 100;
const IRLS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Weighted least squares of `log y` on the regressor.
    #[default]
    OlsOnLogs,
    /// Poisson likelihood with log link, by iteratively reweighted least squares.
    PoissonIrls,
}

/// `log y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLinearFit<T> {
    pub intercept: T,
    pub slope: T,
    /// NaN when the residual degrees of freedom are zero.
    pub slope_se: T,
    pub slope_p_value: T,
    pub n_points: usize,
    /// Points left out because `log y` is undefined.
    pub dropped: usize,
    pub method: FitMethod,
    /// Poisson deviance for IRLS fits, weighted residual sum of squares otherwise.
    pub deviance: T,
    pub iterations: usize,
}

impl<T: Real> LogLinearFit<T> {
    pub fn log_value(&self, x: T) -> T {
        self.intercept + self.slope * x
    }

    pub fn value(&self, x: T) -> T {
        self.log_value(x).exp()
    }
}

struct Points<T> {
    x: Vec<T>,
    y: Vec<T>,
    w: Vec<T>,
    dropped: usize,
}

fn collect_points<T: Real>(x: &[T], y: &[T], w: Option<&[T]>, positive_only: bool) -> Result<Points<T>, FitError> {
    if x.len() != y.len() {
        return Err(FitError::LengthMismatch(x.len(), y.len()));
    }
    if let Some(w) = w {
        if w.len() != y.len() {
            return Err(FitError::LengthMismatch(w.len(), y.len()));
        }
    }
    let mut p = Points { x: Vec::new(), y: Vec::new(), w: Vec::new(), dropped: 0 };
    for i in 0..y.len() {
        let wi = w.map_or(T::one(), |w| w[i]);
        let ok = y[i].is_finite()
            && x[i].is_finite()
            && wi.is_finite()
            && wi > T::zero()
            && if positive_only { y[i] > T::zero() } else { y[i] >= T::zero() };
        if ok {
            p.x.push(x[i]);
            p.y.push(y[i]);
            p.w.push(wi);
        } else {
            p.dropped += 1;
        }
    }
    if p.x.len() < 2 {
        return Err(FitError::InsufficientPoints { usable: p.x.len() });
    }
    Ok(p)
}

/// Weighted simple regression of `z` on `x`. Returns `(intercept, slope, sxx, xbar, wsum)`.
fn wls<T: Real>(x: &[T], z: &[T], w: &[T]) -> Result<(T, T, T, T, T), FitError> {
    let wsum: T = w.iter().copied().sum();
    let xbar = x.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() / wsum;
    let zbar = z.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() / wsum;
    let mut sxx = T::zero();
    let mut sxz = T::zero();
    for i in 0..x.len() {
        let dx = x[i] - xbar;
        sxx = sxx + w[i] * dx * dx;
        sxz = sxz + w[i] * dx * (z[i] - zbar);
    }
    if !(sxx > T::zero()) {
        return Err(FitError::DegenerateDesign);
    }
    let slope = sxz / sxx;
    Ok((zbar - slope * xbar, slope, sxx, xbar, wsum))
}

fn chi2_upper(stat: f64) -> f64 {
    if stat.is_nan() {
        return f64::NAN;
    }
    let chi = ChiSquared::new(1.0).expect("one degree of freedom");
    (1.0 - chi.cdf(stat)).clamp(0.0, 1.0)
}

fn p_from_se<T: Real>(slope: T, se: T, df: Option<usize>) -> T {
    if se.is_nan() {
        return T::one();
    }
    if se == T::zero() {
        return if slope == T::zero() { T::one() } else { T::zero() };
    }
    let stat = (slope / se).f64();
    let p = match df {
        Some(df) => {
            let t = StudentsT::new(0.0, 1.0, df as f64).expect("positive degrees of freedom");
            2.0 * (1.0 - t.cdf(stat.abs()))
        }
        None => chi2_upper(stat * stat),
    };
    T::of(p.clamp(0.0, 1.0))
}

fn fit_ols_logs<T: Real>(x: &[T], y: &[T], w: Option<&[T]>) -> Result<LogLinearFit<T>, FitError> {
    let p = collect_points(x, y, w, true)?;
    let z: Vec<T> = p.y.iter().map(|v| v.ln()).collect();
    let (intercept, slope, sxx, _, _) = wls(&p.x, &z, &p.w)?;
    let rss: T = (0..p.x.len())
        .map(|i| {
            let r = z[i] - intercept - slope * p.x[i];
            p.w[i] * r * r
        })
        .sum();
    let df = p.x.len() - 2;
    let slope_se = if df == 0 { T::nan() } else { (rss / T::of_usize(df) / sxx).sqrt() };
    Ok(LogLinearFit {
        intercept,
        slope,
        slope_se,
        slope_p_value: p_from_se(slope, slope_se, (df > 0).then_some(df)),
        n_points: p.x.len(),
        dropped: p.dropped,
        method: FitMethod::OlsOnLogs,
        deviance: rss,
        iterations: 1,
    })
}

fn poisson_deviance<T: Real>(y: &[T], mu: &[T], w: &[T]) -> T {
    let two = T::of(2.0);
    (0..y.len())
        .map(|i| {
            let term = if y[i] > T::zero() { y[i] * (y[i] / mu[i]).ln() } else { T::zero() };
            two * w[i] * (term - (y[i] - mu[i]))
        })
        .sum()
}

/// IRLS for the log-link Poisson model, returning the fit and the deviance after each iteration.
pub(crate) fn fit_irls_traced<T: Real>(
    x: &[T],
    y: &[T],
    w: Option<&[T]>,
) -> Result<(LogLinearFit<T>, Vec<T>), FitError> {
    let p = collect_points(x, y, w, false)?;
    if p.y.iter().all(|&v| v == T::zero()) {
        return Err(FitError::AllZero);
    }
    let n = p.x.len();
    let tol = IRLS_TOL.max(100.0 * T::epsilon().f64());
    let eval = |a: T, b: T| -> (Vec<T>, T) {
        let mu: Vec<T> = p.x.iter().map(|&xi| (a + b * xi).exp()).collect();
        let dev = poisson_deviance(&p.y, &mu, &p.w);
        (mu, dev)
    };

    // Start from mu = y + 0.1 as the usual Poisson starting values.
    let mut mu: Vec<T> = p.y.iter().map(|&v| v + T::of(0.1)).collect();
    let mut eta: Vec<T> = mu.iter().map(|m| m.ln()).collect();
    let mut coef: Option<(T, T)> = None;
    let mut dev_old = poisson_deviance(&p.y, &mu, &p.w);
    let mut trace = Vec::new();

    for iter in 1..=IRLS_MAX_ITER {
        let ww: Vec<T> = (0..n).map(|i| p.w[i] * mu[i]).collect();
        let z: Vec<T> = (0..n).map(|i| eta[i] + (p.y[i] - mu[i]) / mu[i]).collect();
        let (mut a, mut b, _, _, _) = wls(&p.x, &z, &ww)?;
        let (mut new_mu, mut dev) = eval(a, b);
        if let Some((a0, b0)) = coef {
            let mut halvings = 0;
            while !(dev <= dev_old) && halvings < 40 {
                a = (a + a0) / T::of(2.0);
                b = (b + b0) / T::of(2.0);
                let e = eval(a, b);
                new_mu = e.0;
                dev = e.1;
                halvings += 1;
            }
            if !(dev <= dev_old) {
                // no descent direction left
                a = a0;
                b = b0;
                let e = eval(a, b);
                new_mu = e.0;
                dev = e.1;
            }
        }
        trace.push(dev);
        let converged = coef.is_some() && ((dev - dev_old).abs() / (dev.abs() + T::of(0.1))).f64() < tol;
        coef = Some((a, b));
        mu = new_mu;
        eta = p.x.iter().map(|&xi| a + b * xi).collect();
        dev_old = dev;
        if converged {
            return Ok((finish_irls(&p, a, b, &mu, dev, iter), trace));
        }
        if !a.is_finite() || !b.is_finite() {
            break;
        }
    }
    let (a, b) = coef.unwrap_or((T::nan(), T::nan()));
    Err(FitError::NoConvergence { iterations: IRLS_MAX_ITER, intercept: a.f64(), slope: b.f64() })
}

fn finish_irls<T: Real>(p: &Points<T>, a: T, b: T, mu: &[T], dev: T, iterations: usize) -> LogLinearFit<T> {
    let mut s0 = T::zero();
    let mut s1 = T::zero();
    let mut s2 = T::zero();
    for i in 0..p.x.len() {
        let wi = p.w[i] * mu[i];
        s0 = s0 + wi;
        s1 = s1 + wi * p.x[i];
        s2 = s2 + wi * p.x[i] * p.x[i];
    }
    let det = s0 * s2 - s1 * s1;
    let slope_se = if det > T::zero() { (s0 / det).sqrt() } else { T::nan() };
    LogLinearFit {
        intercept: a,
        slope: b,
        slope_se,
        slope_p_value: p_from_se(b, slope_se, None),
        n_points: p.x.len(),
        dropped: p.dropped,
        method: FitMethod::PoissonIrls,
        deviance: dev,
        iterations,
    }
}

/// Fits `log y = a + b x` by the chosen method.
///
/// Under [`FitMethod::OlsOnLogs`] points with `y = 0` are dropped (counted in
/// `dropped`). Weights default to 1; non-positive weights drop the point.
pub fn fit_log_linear<T: Real>(
    x: &[T],
    y: &[T],
    weights: Option<&[T]>,
    method: FitMethod,
) -> Result<LogLinearFit<T>, FitError> {
    match method {
        FitMethod::OlsOnLogs => fit_ols_logs(x, y, weights),
        FitMethod::PoissonIrls => fit_irls_traced(x, y, weights).map(|(f, _)| f),
    }
}

/// `log y = alpha + beta (t - t_first)`, centered on the first supplied time.
pub fn fit_log_time<T: Real>(
    y: &[T],
    times: &[T],
    weights: Option<&[T]>,
    method: FitMethod,
) -> Result<LogLinearFit<T>, FitError> {
    let origin = times.first().copied().unwrap_or_else(T::zero);
    let x: Vec<T> = times.iter().map(|&t| t - origin).collect();
    fit_log_linear(&x, y, weights, method)
}

/// `log y = mu + nu log i`.
pub fn fit_loglog<T: Real>(
    i_values: &[usize],
    y: &[T],
    weights: Option<&[T]>,
    method: FitMethod,
) -> Result<LogLinearFit<T>, FitError> {
    let x: Vec<T> = i_values.iter().map(|&i| T::of_usize(i).ln()).collect();
    fit_log_linear(&x, y, weights, method)
}

/// Wald chi-square (1 df) p-value for `slope = 0`.
pub fn coefficient_chi2_test<T: Real>(fit: &LogLinearFit<T>) -> Result<T, FitError> {
    if !(fit.slope_se > T::zero()) || !fit.slope_se.is_finite() {
        return Err(FitError::ZeroStandardError);
    }
    let stat = (fit.slope / fit.slope_se).f64().powi(2);
    Ok(T::of(chi2_upper(stat)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn exact_exponential_in_time() {
        let e = std::f64::consts::E;
        let fit = fit_log_time(&[e, e * e, e * e * e], &[1.0, 2.0, 3.0], None, FitMethod::OlsOnLogs).unwrap();
        assert_abs_diff_eq!(fit.intercept, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.slope, 1.0, epsilon = 1e-14);
        assert!(fit.slope_p_value < 1e-6);
    }

    #[test]
    fn constant_series_has_flat_slope() {
        let fit = fit_log_time(&[2.0, 2.0, 2.0, 2.0], &[0.0, 1.0, 2.0, 3.0], None, FitMethod::OlsOnLogs).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert!(fit.slope_p_value > 0.5);
        let irls = fit_log_time(&[2.0, 2.0, 2.0, 2.0], &[0.0, 1.0, 2.0, 3.0], None, FitMethod::PoissonIrls).unwrap();
        assert_abs_diff_eq!(irls.slope, 0.0, epsilon = 1e-9);
        assert!(irls.slope_p_value > 0.5);
    }

    #[test]
    fn exact_power_law() {
        let i: Vec<usize> = (1..=8).collect();
        let y: Vec<f64> = i.iter().map(|&v| 2.0 * (v as f64).powf(0.7)).collect();
        let fit = fit_loglog(&i, &y, None, FitMethod::OlsOnLogs).unwrap();
        assert_abs_diff_eq!(fit.intercept, 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(fit.slope, 0.7, epsilon = 1e-12);
        let flat = fit_loglog(&i, &[3.0; 8], None, FitMethod::OlsOnLogs).unwrap();
        assert_abs_diff_eq!(flat.slope, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let y: Vec<f32> = (0..5).map(|t| (0.3f32 + 0.2 * t as f32).exp()).collect();
        let t: Vec<f32> = (0..5).map(|t| t as f32).collect();
        let fit = fit_log_time(&y, &t, None, FitMethod::OlsOnLogs).unwrap();
        assert!((fit.intercept - 0.3).abs() < 1e-5);
        assert!((fit.slope - 0.2).abs() < 1e-5);
    }

    #[test]
    fn zeros_are_dropped_under_ols() {
        let fit = fit_log_time(&[0.0, 1.0, 2.0, 4.0], &[0.0, 1.0, 2.0, 3.0], None, FitMethod::OlsOnLogs).unwrap();
        assert_eq!(fit.dropped, 1);
        assert_eq!(fit.n_points, 3);
        // centering stays on the first supplied time
        assert_abs_diff_eq!(fit.intercept, -(2f64.ln()), epsilon = 1e-12);
        assert_eq!(
            fit_log_time(&[0.0, 0.0, 2.0], &[0.0, 1.0, 2.0], None, FitMethod::OlsOnLogs).unwrap_err(),
            FitError::InsufficientPoints { usable: 1 }
        );
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(
            fit_log_linear(&[1.0, 1.0], &[1.0, 2.0], None, FitMethod::OlsOnLogs).unwrap_err(),
            FitError::DegenerateDesign
        );
        assert_eq!(
            fit_log_linear(&[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0], None, FitMethod::PoissonIrls).unwrap_err(),
            FitError::AllZero
        );
        let two = fit_log_linear::<f64>(&[0.0, 1.0], &[1.0, 2.0], None, FitMethod::OlsOnLogs).unwrap();
        assert!(two.slope_se.is_nan());
        assert_eq!(coefficient_chi2_test(&two), Err(FitError::ZeroStandardError));
    }

    fn simulate(alpha: f64, beta: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut s = rng::stream(seed);
        let x: Vec<f64> = (0..n).map(|i| (i % 100) as f64).collect();
        let y = x.iter().map(|&xi| rng::poisson(&mut s, (alpha + beta * xi).exp()) as f64).collect();
        (x, y)
    }

    #[test]
    fn irls_recovers_simulated_coefficients() {
        let (x, y) = simulate(0.5, 0.02, 10_000, 3);
        let fit = fit_log_linear(&x, &y, None, FitMethod::PoissonIrls).unwrap();
        assert!((fit.intercept - 0.5).abs() < 0.05, "{fit:?}");
        assert!((fit.slope - 0.02).abs() < 0.05, "{fit:?}");
        assert!(fit.slope_p_value < 1e-3);
    }

    #[test]
    fn strong_trend_is_significant() {
        let (x, y) = simulate(0.0, 0.1, 10_000, 8);
        let x: Vec<f64> = x.iter().map(|v| v / 10.0).collect();
        let fit = fit_log_linear(&x, &y, None, FitMethod::PoissonIrls).unwrap();
        assert!(coefficient_chi2_test(&fit).unwrap() < 1e-3);
        let (x0, y0) = simulate(0.7, 0.0, 400, 9);
        let flat = fit_log_linear(&x0, &y0, None, FitMethod::PoissonIrls).unwrap();
        assert!(coefficient_chi2_test(&flat).unwrap() > 0.001);
    }

    #[test]
    fn noisy_power_law_slope_recovered() {
        let mut s = rng::stream(21);
        let i: Vec<usize> = (1..=40).collect();
        let y: Vec<f64> = i
            .iter()
            .map(|&v| {
                let noise = (rand::Rng::random::<f64>(&mut s) - 0.5) * 0.2;
                1.5 * (v as f64).powf(0.6) * noise.exp()
            })
            .collect();
        let fit = fit_loglog(&i, &y, None, FitMethod::OlsOnLogs).unwrap();
        assert!((fit.slope - 0.6).abs() < 0.1);
    }

    #[test]
    fn weights_match_replicated_points() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 2.0, 5.0];
        let w = [1.0, 2.0, 1.0, 3.0];
        let xr = [0.0, 1.0, 1.0, 2.0, 3.0, 3.0, 3.0];
        let yr = [1.0, 3.0, 3.0, 2.0, 5.0, 5.0, 5.0];
        for m in [FitMethod::OlsOnLogs, FitMethod::PoissonIrls] {
            let a = fit_log_linear(&x, &y, Some(&w), m).unwrap();
            let b = fit_log_linear(&xr, &yr, None, m).unwrap();
            assert_abs_diff_eq!(a.intercept, b.intercept, epsilon = 1e-9);
            assert_abs_diff_eq!(a.slope, b.slope, epsilon = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn irls_deviance_never_increases(seed in any::<u64>(), alpha in -1.0f64..2.0, beta in -0.3f64..0.3) {
            let (x, y) = simulate(alpha, beta, 60, seed);
            let x: Vec<f64> = x.iter().map(|v| v / 10.0).collect();
            if y.iter().any(|&v| v > 0.0) {
                let (_, trace) = fit_irls_traced(&x, &y, None).unwrap();
                for w in trace.windows(2) {
                    prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{:?}", trace);
                }
            }
        }

        #[test]
        fn noise_free_fits_are_exact(a in -2.0f64..2.0, b in -0.5f64..0.5, n in 3usize..30) {
            let t: Vec<f64> = (0..n).map(|v| v as f64 + 1985.0).collect();
            let y: Vec<f64> = (0..n).map(|v| (a + b * v as f64).exp()).collect();
            let fit = fit_log_time(&y, &t, None, FitMethod::OlsOnLogs).unwrap();
            prop_assert!((fit.intercept - a).abs() < 1e-10);
            prop_assert!((fit.slope - b).abs() < 1e-10);
        }
    }
}
