//! Experiment harness: configs, runners and report output.

mod classification;
mod config;
mod regression;
mod report;

pub use classification::{
    rejection_thresholds, run_classification, run_density, run_impulse, toy_filter, toy_two_cluster,
};
pub use config::{
    derive_seed, spread_scales, ClassificationSettings, ExperimentConfig, ExperimentKind, FeatureSettings, FitMode,
    GraphSource,
};
pub use regression::{
    approximation_error, build_operator, load_graph, projection_for, run_morlet_mismatch, run_scale_recovery,
    PreparedGraph,
};
pub use report::{
    aggregate, emit_plot_data, median, quantile, Aggregate, DensitySeries, ExperimentReport, FilterCurve, PlotData,
    PlotKind, RepetitionRow, CURVE_POINTS,
};

use crate::error::Result;

/// Dispatches on `config.kind`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    match config.kind {
        ExperimentKind::ScaleRecovery => run_scale_recovery(config),
        ExperimentKind::Mismatch => run_morlet_mismatch(config),
        ExperimentKind::Classification => run_classification(config),
        ExperimentKind::Density => run_density(config),
        ExperimentKind::Impulse => run_impulse(config),
    }
}
