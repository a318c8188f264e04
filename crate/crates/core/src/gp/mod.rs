//! Gaussian process models over graph nodes.

pub mod adam;
pub mod classify;
pub mod kernel;
pub mod linalg;
pub mod regress;

pub use classify::{
    accuracy, rejection_curve, ClassPrediction, ClassifierConfig, ClassifierFit, InducingPoints, RejectionRow,
    VariationalState, WaveletGpClassifier,
};
pub use kernel::{FeatureKernel, WaveletKernel, WaveletOperator};
pub use regress::{filter_mae, FitResult, ModelSummary, OptimizerConfig, PosteriorPrediction, WaveletGp};
