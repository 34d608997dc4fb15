//! Regression fits, coefficient tests, Kolmogorov–Smirnov tests and correlations.

mod corr;
mod fit;
mod ks;

use thiserror::Error;

pub use corr::{mid_ranks, pearson, spearman};
pub use fit::{coefficient_chi2_test, fit_log_linear, fit_log_time, fit_loglog, FitMethod, LogLinearFit, IRLS_MAX_ITER};
pub use ks::{kolmogorov_q, ks_statistic_poisson, ks_test_poisson, ks_test_two_sample, KsOutcome, DEFAULT_BOOTSTRAP};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least 2 usable points, have {usable}")]
    InsufficientPoints { usable: usize },
    #[error("regressor takes a single value")]
    DegenerateDesign,
    #[error("all responses are zero")]
    AllZero,
    #[error("IRLS did not converge in {iterations} iterations (last intercept {intercept}, slope {slope})")]
    NoConvergence { iterations: usize, intercept: f64, slope: f64 },
    #[error("slope standard error is zero or undefined")]
    ZeroStandardError,
    #[error("input is constant")]
    ConstantInput,
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sample is empty")]
    EmptySample,
    #[error("invalid rate {0}")]
    InvalidRate(f64),
}
