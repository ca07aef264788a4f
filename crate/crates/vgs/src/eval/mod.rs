//! Scoring: retrieval recall, spoken-STS correlation, AIC comparison.

pub mod retrieval;
pub mod stats;
pub mod sts;

pub use retrieval::{retrieval_eval, RetrievalMetrics, RetrievalReport};
pub use stats::{
    aic_regression, compare_aic, fisher_ci, pearson, AicModelInput, AicReport, AicRow,
    RegressionFit,
};
pub use sts::{sts_eval, voice_averaged_similarity, StsReport, StsSubtaskScore};
