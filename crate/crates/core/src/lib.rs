//! foreval evaluates human forecasts of noisy experimental results against
//! baseline mathematical models.
//!
//! The pipeline: load a prediction study ([`data_model`]), fit an empirical
//! Bayes prior to the estimated effects and sample the posterior μ | Y
//! ([`empirical_bayes`]), build benchmark predictors ([`baselines`]), and
//! estimate bias, risk, and comparative risk with a two-level Bayesian
//! bootstrap that propagates treatment sampling, forecaster sampling, and
//! ground-truth noise ([`inference`]). The [`synthetic`] module generates
//! ground-truth-known studies used to validate every estimator.

pub mod baselines;
pub mod data_model;
pub mod empirical_bayes;
pub mod inference;
pub mod losses;
pub mod stats;
pub mod synthetic;

pub use data_model::{
    backout_replication_effect, load_effect_study, load_replication_study, EffectEstimates,
    ForecastMatrix, ReplicationDataset,
};
pub use empirical_bayes::{EbChoice, EbFit, EbKind, PosteriorSampler};
pub use inference::{
    estimate, EstimandKind, EstimandSpec, EstimateOptions, EstimateSummary, EvaluationReport,
    ModelPredictions, ReportEntry, WeightScheme,
};
pub use losses::{loss, LossKind};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
