//! Stage orchestration shared by the command-line tool and the tests.

use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::{build_timelines, slice_dataset, CorpusError, DatasetSlice, Publication, Role, Timelines, WindowSpec};
use crate::evaluate::EvalError;
use crate::hyperopt::HyperoptError;
use crate::matrices::{compute_eta, compute_xi, EtaMatrix, MatrixError, XiMatrix};
use crate::predict::PredictError;
use crate::training::{fit_lambda, fit_zeta, LambdaMatrix, TrainError, TrainOptions, ZetaMatrix};

mod config;
pub mod stages;
mod svg;

pub use config::{EvaluateConfig, InputConfig, InputFormat, OutputConfig, PipelineConfig, PredictConfig};
pub use stages::{Run, Stage};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot read {}", .0.display())]
    MissingFile(PathBuf),
    #[error("i/o error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed artifact {}: {message}", path.display())]
    Artifact { path: PathBuf, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("matrices: {0}")]
    Matrix(#[from] MatrixError),
    #[error("training: {0}")]
    Train(#[from] TrainError),
    #[error("tuning: {0}")]
    Tune(#[from] HyperoptError),
    #[error("prediction: {0}")]
    Predict(#[from] PredictError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
}

impl PipelineError {
    /// 2 for usage, configuration and missing-file problems, 1 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::MissingFile(_) => 2,
            _ => 1,
        }
    }
}

/// Researcher timelines and the three role slices of one corpus.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub timelines: Timelines,
    pub training: DatasetSlice,
    pub validation: DatasetSlice,
    pub test: DatasetSlice,
}

pub fn prepare(pubs: &[Publication], spec: &WindowSpec, focal_prefix: Option<&str>) -> Result<Prepared, PipelineError> {
    spec.validate()?;
    let mut timelines = build_timelines(pubs, spec.history_start, spec.end())?;
    if let Some(prefix) = focal_prefix {
        timelines.retain_prefix(prefix);
    }
    let training = slice_dataset(&timelines, spec, Role::Training)?;
    let validation = slice_dataset(&timelines, spec, Role::Validation)?;
    let test = slice_dataset(&timelines, spec, Role::Test)?;
    Ok(Prepared { timelines, training, validation, test })
}

/// Empirical and fitted rate matrices.
#[derive(Debug, Clone)]
pub struct Trained {
    pub eta: EtaMatrix<f64>,
    pub xi: XiMatrix<f64>,
    pub lambda: LambdaMatrix<f64>,
    pub zeta: ZetaMatrix<f64>,
}

pub fn train(training: &DatasetSlice, spec: &WindowSpec, opts: TrainOptions) -> Result<Trained, PipelineError> {
    let eta = compute_eta(training, spec)?;
    let xi = compute_xi(training, spec)?;
    let lambda = fit_lambda(&eta, spec, opts)?;
    let zeta = fit_zeta(&xi, spec, opts)?;
    Ok(Trained { eta, xi, lambda, zeta })
}
