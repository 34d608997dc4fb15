//! Coauthor-count forecasting with a piecewise Poisson rate model.
//!
//! Publication histories are turned into empirical rate matrices, smoothed
//! into full rate surfaces by log-linear and log-log regressions, corrected
//! for cumulative advantage with two hyperparameters found by a genetic
//! search, and then used to simulate future publication and coauthor counts.

pub mod corpus;
pub mod evaluate;
pub mod glm;
pub mod hyperopt;
pub mod matrices;
pub mod num;
pub mod pipeline;
pub mod predict;
pub mod rng;
pub mod synthetic;
pub mod training;

pub use num::Real;

/// Empirical group means in double precision.
pub type Eta = matrices::EtaMatrix<f64>;
pub type Xi = matrices::XiMatrix<f64>;
/// Fitted rate matrices in double precision.
pub type Lambda = training::LambdaMatrix<f64>;
pub type Zeta = training::ZetaMatrix<f64>;
pub type Fit = glm::LogLinearFit<f64>;

/// Single-precision variants of the rate matrices.
pub type LambdaF32 = training::LambdaMatrix<f32>;
pub type ZetaF32 = training::ZetaMatrix<f32>;
