use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde_json::json;

use super::config::{derive_seed, ExperimentConfig, ExperimentKind, FitMode, GraphSource};
use super::report::{median, DensitySeries, ExperimentReport, FilterCurve, RepetitionRow};
use crate::density::{exact_cdf, DensityEstimate};
use crate::error::{Error, Result};
use crate::filters::{FilterSpec, MotherWavelet, SpectralFilter};
use crate::gp::{filter_mae, FeatureKernel, OptimizerConfig, WaveletGp, WaveletKernel, WaveletOperator};
use crate::graph::{Graph, NormalizedLaplacian, SpectralDecomposition};
use crate::poly::{fit_polynomial, ApproxMode, ProjectionMatrix, CHEBYSHEV_NODES};
use crate::synth::{generate_multiscale, sample_labels, split_nodes};

const LABEL_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;
const FIT_STREAM: u64 = 3;

/// A graph with its Laplacian, eigendecomposition and (when needed) density.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub graph: Graph,
    pub laplacian: Arc<NormalizedLaplacian>,
    pub decomposition: Arc<SpectralDecomposition>,
    pub density: Option<DensityEstimate>,
}

impl PreparedGraph {
    pub fn new(graph: Graph, config: &ExperimentConfig, with_density: bool) -> Result<Self> {
        let laplacian = NormalizedLaplacian::new(&graph)?;
        let decomposition = laplacian.eigendecompose()?;
        let density = if with_density {
            Some(DensityEstimate::estimate(&laplacian, config.density)?)
        } else {
            None
        };
        Ok(PreparedGraph {
            graph,
            laplacian: Arc::new(laplacian),
            decomposition: Arc::new(decomposition),
            density,
        })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.decomposition.eigenvalues().iter().copied().collect()
    }

    pub fn density_series(&self) -> Option<DensitySeries> {
        let d = self.density.as_ref()?;
        let eigs = self.eigenvalues();
        Some(DensitySeries {
            points: d.sample_points().to_vec(),
            cdf: d.cdf_values().to_vec(),
            weights: d.weights().to_vec(),
            exact_cdf: Some(d.sample_points().iter().map(|&z| exact_cdf(&eigs, z)).collect()),
        })
    }
}

pub fn load_graph(source: &GraphSource) -> Result<Graph> {
    match source {
        GraphSource::Synthetic { spec } => generate_multiscale(spec),
        GraphSource::EdgeList { path } => Graph::read_edge_list(path),
        GraphSource::Dataset { path } => Ok(crate::datasets::load_dataset(path)?.graph),
        GraphSource::Toy { cluster_size, seed } => Ok(super::toy_two_cluster(*cluster_size, *seed)?.graph),
    }
}

/// Projection matrix for a polynomial mode; least-squares modes use the
/// density sample grid (weighted by the density for `wls`).
pub fn projection_for(mode: ApproxMode, degree: usize, density: &DensityEstimate) -> Result<ProjectionMatrix> {
    match mode {
        ApproxMode::UniformLS => ProjectionMatrix::least_squares(density.sample_points(), None, degree),
        ApproxMode::WeightedLS => {
            ProjectionMatrix::least_squares(density.sample_points(), Some(density.weights()), degree)
        }
        ApproxMode::Chebyshev => ProjectionMatrix::chebyshev(degree, CHEBYSHEV_NODES),
    }
}

pub fn build_operator(mode: FitMode, degree: usize, prepared: &PreparedGraph) -> Result<WaveletOperator> {
    match mode {
        FitMode::Exact => Ok(WaveletOperator::Exact(Arc::clone(&prepared.decomposition))),
        FitMode::Poly(m) => {
            let density = prepared
                .density
                .as_ref()
                .ok_or_else(|| Error::invalid("polynomial modes need a density estimate"))?;
            Ok(WaveletOperator::Polynomial {
                laplacian: Arc::clone(&prepared.laplacian),
                projection: Arc::new(projection_for(m, degree, density)?),
            })
        }
    }
}

struct Task {
    repetition: usize,
    fraction_index: usize,
    mode_index: usize,
    mother: MotherWavelet,
}

/// Runs every (repetition, fraction, mode) fit on one fixed graph.
fn run_regression(
    config: &ExperimentConfig,
    truth: &FilterSpec,
    mothers: &[MotherWavelet],
) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let needs_density = config.modes.iter().any(|m| matches!(m, FitMode::Poly(_)));
    let prepared = PreparedGraph::new(load_graph(&config.graph)?, config, needs_density)?;
    let n = prepared.graph.n_nodes();
    let eigs = prepared.eigenvalues();
    let operators: Vec<WaveletOperator> = config
        .modes
        .iter()
        .map(|&m| build_operator(m, config.degree, &prepared))
        .collect::<Result<_>>()?;
    let labels: Vec<Vec<f64>> = (0..config.repetitions)
        .map(|r| {
            sample_labels(
                &prepared.decomposition,
                truth,
                derive_seed(config.seed, LABEL_STREAM, r as u64),
            )
            .values
        })
        .collect();

    let mut tasks = Vec::new();
    for repetition in 0..config.repetitions {
        for fraction_index in 0..config.fractions.len() {
            for mode_index in 0..config.modes.len() {
                for &mother in mothers {
                    tasks.push(Task {
                        repetition,
                        fraction_index,
                        mode_index,
                        mother,
                    });
                }
            }
        }
    }
    info!("{} fits on a {n}-node graph", tasks.len());
    let label_mothers = mothers.len() > 1;
    let rows: Vec<RepetitionRow> = tasks
        .par_iter()
        .map(|t| {
            let fraction = config.fractions[t.fraction_index];
            let mode = config.modes[t.mode_index];
            let seed = derive_seed(config.seed, FIT_STREAM, t.repetition as u64);
            let mut row = RepetitionRow {
                repetition: t.repetition,
                fraction,
                mode: mode.to_string(),
                fit_mother: label_mothers.then(|| t.mother.to_string()),
                seed,
                ..Default::default()
            };
            let split_seed = derive_seed(
                config.seed,
                SPLIT_STREAM,
                (t.repetition * 1000 + t.fraction_index) as u64,
            );
            let outcome = fit_one(
                config,
                &operators[t.mode_index],
                &config.init.with_mother(t.mother),
                truth,
                &labels[t.repetition],
                n,
                fraction,
                split_seed,
                seed,
                &eigs,
            );
            match outcome {
                Ok((fitted, noise, objective, filter, prediction)) => {
                    row.fitted = Some(fitted);
                    row.noise_variance = Some(noise);
                    row.objective = Some(objective);
                    row.filter_mae = Some(filter);
                    row.prediction_mae = Some(prediction);
                }
                Err(e) => {
                    warn!("repetition {} fraction {fraction} mode {mode}: {e}", t.repetition);
                    row.error = Some(e.to_string());
                }
            }
            row
        })
        .collect();

    let mut report = ExperimentReport::new(config.clone(), rows);
    report.metadata.insert("n_nodes".into(), json!(n));
    report
        .metadata
        .insert("n_edges".into(), json!(prepared.graph.n_edges()));
    report.metadata.insert("truth".into(), serde_json::to_value(truth)?);
    report.plots.eigenvalues = eigs.clone();
    report.plots.density = prepared.density_series();
    report.plots.filter_curves = filter_curves(&report, truth, &operators)?;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn fit_one(
    config: &ExperimentConfig,
    operator: &WaveletOperator,
    init: &FilterSpec,
    truth: &FilterSpec,
    y: &[f64],
    n: usize,
    fraction: f64,
    split_seed: u64,
    fit_seed: u64,
    eigs: &[f64],
) -> Result<(FilterSpec, f64, f64, f64, f64)> {
    let (train, test) = split_nodes(n, fraction, split_seed)?;
    let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let kernel = WaveletKernel::new(operator.clone(), Box::new(init.clone()), FeatureKernel::Identity)?;
    let model = WaveletGp::new(kernel, 1.0, train)?;
    let optimizer = OptimizerConfig {
        seed: fit_seed,
        ..config.optimizer
    };
    let fit = model.optimize(&y_train, &optimizer)?;
    let fitted = fit
        .model
        .kernel()
        .filter()
        .as_spec()
        .cloned()
        .ok_or_else(|| Error::invalid("fitted filter is not a spec"))?;
    let prediction = fit.model.predict(&y_train, &test)?;
    let pred_mae = test
        .iter()
        .zip(&prediction.mean)
        .map(|(&i, m)| (m - y[i]).abs())
        .sum::<f64>()
        / test.len() as f64;
    Ok((
        fitted.clone(),
        fit.model.noise_variance(),
        fit.objective,
        filter_mae(&fitted, truth, eigs),
        pred_mae,
    ))
}

/// Truth plus, per series, the repetition-0 fit at the largest fraction.
fn filter_curves(
    report: &ExperimentReport,
    truth: &FilterSpec,
    operators: &[WaveletOperator],
) -> Result<Vec<FilterCurve>> {
    let mut curves = vec![FilterCurve {
        label: "truth".into(),
        spec: truth.clone(),
        coefficients: None,
    }];
    let config = &report.config;
    let largest = config.fractions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (mode, operator) in config.modes.iter().zip(operators) {
        let mut seen = std::collections::BTreeSet::new();
        for row in &report.rows {
            if row.mode != mode.to_string() || row.fraction != largest || !seen.insert(row.series()) {
                continue;
            }
            let Some(spec) = row.fitted.clone() else {
                continue;
            };
            curves.push(FilterCurve {
                label: row.series(),
                spec: spec.clone(),
                coefficients: None,
            });
            if let WaveletOperator::Polynomial { projection, .. } = operator {
                curves.push(FilterCurve {
                    label: format!("{}-poly", row.series()),
                    coefficients: Some(fit_polynomial(&spec, projection).coefficients().to_vec()),
                    spec,
                });
            }
        }
    }
    Ok(curves)
}

/// Scale recovery: labels sampled from `config.truth`, fitted with the
/// family of `config.init`.
pub fn run_scale_recovery(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut config = config.clone();
    config.kind = ExperimentKind::ScaleRecovery;
    let mother = config.init.mother();
    run_regression(&config, &config.truth.clone(), &[mother])
}

/// Labels from a Morlet filter, fitted with Mexican Hat (and optionally
/// Morlet for a paired comparison).
pub fn run_morlet_mismatch(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut config = config.clone();
    config.kind = ExperimentKind::Mismatch;
    let truth = config.truth.with_mother(MotherWavelet::Morlet);
    let mothers: Vec<MotherWavelet> = if config.compare_matched {
        vec![MotherWavelet::MexicanHat, MotherWavelet::Morlet]
    } else {
        vec![MotherWavelet::MexicanHat]
    };
    let mut report = run_regression(&config, &truth, &mothers)?;
    report
        .metadata
        .insert("generating_mother".into(), json!(MotherWavelet::Morlet));
    report
        .metadata
        .insert("fitting_mother".into(), json!(MotherWavelet::MexicanHat));
    if config.compare_matched {
        let mut paired = Vec::new();
        for mode in &config.modes {
            for &fraction in &config.fractions {
                let med = |mother: MotherWavelet| {
                    let label = format!("{mode}/{mother}");
                    let v: Vec<f64> = report
                        .rows
                        .iter()
                        .filter(|r| r.series() == label && r.fraction == fraction)
                        .filter_map(|r| r.prediction_mae)
                        .collect();
                    median(&v)
                };
                let (matched, mismatched) = (med(MotherWavelet::Morlet), med(MotherWavelet::MexicanHat));
                paired.push(json!({
                    "mode": mode.to_string(),
                    "fraction": fraction,
                    "matched_median_prediction_mae": matched,
                    "mismatched_median_prediction_mae": mismatched,
                    "matched_not_worse": matched <= mismatched,
                }));
            }
        }
        report.metadata.insert("paired_comparison".into(), json!(paired));
    }
    Ok(report)
}

/// Mean `|p(λ) - g(λ)|` at the actual eigenvalues for a polynomial mode.
pub fn approximation_error<F: SpectralFilter + ?Sized>(
    filter: &F,
    mode: ApproxMode,
    degree: usize,
    prepared: &PreparedGraph,
) -> Result<f64> {
    let density = prepared
        .density
        .as_ref()
        .ok_or_else(|| Error::invalid("approximation error needs a density estimate"))?;
    let proj = projection_for(mode, degree, density)?;
    Ok(fit_polynomial(filter, &proj).spectral_error(filter, &prepared.eigenvalues()))
}
