//! Reports comparing forecasts with what the test researchers actually did,
//! and descriptive diagnostics of a corpus slice.

use thiserror::Error;

use crate::glm::FitError;
use crate::predict::PredictError;

mod appendix;
mod auc;
mod autocorr;
mod scan;
mod trend;

pub use appendix::{appendix_diagnostics, AppendixReport, AppendixYear, GroupMean};
pub use auc::{auc_from_records, auc_report, AucCounts, AucReport, AUC_STRATA};
pub use autocorr::{autocorrelation, grouped_autocorrelation, AutocorrGroup, GroupedAutocorrelation};
pub use scan::{poisson_character_scan, GroupBy, ScanCell, ScanOptions, ScanReport};
pub use trend::{distribution_report, trend_report, DistributionMode, DistributionReport, DistributionYear, TrendGroup, TrendReport};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("forecast years and evaluation years do not overlap")]
    NoOverlap,
    #[error("nothing to evaluate: {0}")]
    Empty(&'static str),
    #[error("pooled comparison needs forecasts with stored trajectories")]
    MissingTrajectories,
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Predict(#[from] PredictError),
}
