use std::time::Instant;

use log::info;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::config::{spread_scales, ExperimentConfig, ExperimentKind, GraphSource};
use super::regression::{build_operator, load_graph, PreparedGraph};
use super::report::{ExperimentReport, RepetitionRow};
use crate::datasets::{load_dataset, tfidf, NodeDataset, Split, TfidfConfig};
use crate::error::{Error, Result};
use crate::filters::{impulse_response, FilterSpec};
use crate::gp::{accuracy, rejection_curve, ClassPrediction, FeatureKernel, WaveletGpClassifier, WaveletKernel};
use crate::graph::{Graph, NormalizedLaplacian};

const TOY_INTRA_P: f64 = 0.25;
const TOY_BRIDGES: usize = 4;

/// Initial filter for the toy dataset: low-pass plus one band below the
/// clusters' bulk spectrum.
pub fn toy_filter() -> FilterSpec {
    FilterSpec::mexican_hat(12.0, &[0.3]).expect("valid constants")
}

/// Two ER clusters joined by a few random bridge edges; labels are the sign of
/// the Fiedler vector, features the identity. Each class puts a third of
/// its nodes (at least one) in train, the rest in test.
pub fn toy_two_cluster(cluster_size: usize, seed: u64) -> Result<NodeDataset> {
    if cluster_size < 2 {
        return Err(Error::invalid("toy clusters need at least two nodes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * cluster_size;
    let graph = (0..100)
        .find_map(|_| {
            let mut edges = Vec::new();
            for c in 0..2 {
                let base = c * cluster_size;
                for i in 0..cluster_size {
                    for j in i + 1..cluster_size {
                        if rng.random_bool(TOY_INTRA_P) {
                            edges.push((base + i, base + j, 1.0));
                        }
                    }
                }
            }
            for _ in 0..TOY_BRIDGES {
                edges.push((
                    rng.random_range(0..cluster_size),
                    cluster_size + rng.random_range(0..cluster_size),
                    1.0,
                ));
            }
            Graph::new(n, &edges).ok().filter(Graph::is_connected)
        })
        .ok_or(Error::NotConnected(100))?;
    let dec = NormalizedLaplacian::new(&graph)?.eigendecompose()?;
    let fiedler = dec.eigenvectors().column(1);
    let labels: Vec<usize> = fiedler.iter().map(|&v| usize::from(v > 0.0)).collect();
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::invalid("degenerate toy labelling"));
    }
    let mut split = Split::default();
    for members in by_class {
        let k = members.len().div_ceil(3).min(members.len() - 1).max(1);
        split.train.extend(&members[..k]);
        split.test.extend(&members[k..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    NodeDataset::new("toy-two-cluster", graph, DMatrix::identity(n, n), labels, 2, split)
}

fn load_node_dataset(source: &GraphSource) -> Result<NodeDataset> {
    match source {
        GraphSource::Dataset { path } => load_dataset(path),
        GraphSource::Toy { cluster_size, seed } => toy_two_cluster(*cluster_size, *seed),
        _ => Err(Error::Config(
            "classification needs a dataset bundle or the toy source".into(),
        )),
    }
}

/// Thresholds at evenly spaced ranks of the sorted variances; the last
/// one keeps every node.
pub fn rejection_thresholds(variances: &[f64], points: usize) -> Vec<f64> {
    let mut v = variances.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() || points == 0 {
        return Vec::new();
    }
    let mut out: Vec<f64> = (0..points)
        .map(|i| v[(i * (v.len() - 1)) / (points - 1).max(1)])
        .collect();
    out.dedup();
    out
}

/// Fits the variational classifier for each configured filter family and
/// reports test accuracy, ELBO trace and rejection curve.
pub fn run_classification(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut config = config.clone();
    config.kind = ExperimentKind::Classification;
    config.validate()?;
    let start = Instant::now();
    let settings = config.classification.clone();
    let mut dataset = load_node_dataset(&config.graph)?;
    if let Some(k) = settings.per_class_train {
        dataset = dataset.random_split(k, settings.val_size, settings.split_seed)?;
    }
    let mode = config.modes[0];
    let needs_density = !matches!(mode, super::FitMode::Exact);
    let prepared = PreparedGraph::new(dataset.graph.clone(), &config, needs_density)?;
    let operator = build_operator(mode, config.degree, &prepared)?;
    let fs = settings.features;
    let feature = if fs.identity {
        FeatureKernel::Identity
    } else {
        let x = if fs.tfidf {
            tfidf(&dataset.features, TfidfConfig::default())?
        } else {
            dataset.features.clone()
        };
        FeatureKernel::polynomial(&x, fs.degree, fs.variance, fs.offset)?
    };
    let inits: Vec<FilterSpec> = if settings.scale_counts.is_empty() {
        vec![config.init.clone()]
    } else {
        settings
            .scale_counts
            .iter()
            .map(|&c| spread_scales(config.init.mother(), config.init.low_pass(), c))
            .collect::<Result<_>>()?
    };
    let train = dataset.split.train.clone();
    let test = dataset.split.test.clone();
    let y_train = dataset.labels_at(&train);
    let y_test = dataset.labels_at(&test);

    let mut rows = Vec::new();
    let mut first: Option<(Vec<f64>, ClassPrediction)> = None;
    for (i, init) in inits.iter().enumerate() {
        info!("classification run {i}: {} band scales", init.band_scales().len());
        let kernel = WaveletKernel::new(operator.clone(), Box::new(init.clone()), feature.clone())?;
        let model = WaveletGpClassifier::new(kernel, dataset.n_classes, train.clone())?;
        let fit = model.fit(&y_train, &settings.classifier)?;
        let seed = settings.classifier.seed;
        let on_test = fit.model.predict(&fit.state, &test, settings.predict_samples, seed)?;
        let on_train = fit.model.predict(&fit.state, &train, settings.predict_samples, seed)?;
        rows.push(RepetitionRow {
            repetition: i,
            fraction: train.len() as f64 / dataset.n_nodes() as f64,
            mode: mode.to_string(),
            seed,
            accuracy: Some(accuracy(&on_test.predicted, &y_test)),
            train_accuracy: Some(accuracy(&on_train.predicted, &y_train)),
            objective: fit.trace.get(fit.best_epoch).copied(),
            fitted: fit.model.kernel().filter().as_spec().cloned(),
            elbo_trace: (i == 0).then(|| "elbo.csv".to_string()),
            ..Default::default()
        });
        if first.is_none() {
            first = Some((fit.trace, on_test));
        }
    }
    let mut report = ExperimentReport::new(config.clone(), rows);
    report.metadata.insert("dataset".into(), json!(dataset.name));
    report.metadata.insert("n_nodes".into(), json!(dataset.n_nodes()));
    report.metadata.insert("n_edges".into(), json!(dataset.graph.n_edges()));
    report.metadata.insert("n_features".into(), json!(dataset.n_features()));
    report.metadata.insert("n_classes".into(), json!(dataset.n_classes));
    report.metadata.insert("n_train".into(), json!(train.len()));
    report.metadata.insert("n_test".into(), json!(test.len()));
    report
        .metadata
        .insert("feature_kernel".into(), serde_json::to_value(&feature)?);
    if let Some((trace, prediction)) = first {
        let thresholds = rejection_thresholds(&prediction.variance, settings.rejection_points);
        report.plots.rejection = rejection_curve(&prediction, &y_test, &thresholds)?;
        report.plots.elbo_trace = trace;
    }
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Estimated and exact spectrum of a graph.
pub fn run_density(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut config = config.clone();
    config.kind = ExperimentKind::Density;
    config.validate()?;
    let start = Instant::now();
    let prepared = PreparedGraph::new(load_graph(&config.graph)?, &config, true)?;
    let mut report = ExperimentReport::new(config, Vec::new());
    let series = prepared.density_series().expect("density requested");
    let exact = series.exact_cdf.clone().unwrap_or_default();
    let mae = series.cdf.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>() / exact.len().max(1) as f64;
    report
        .metadata
        .insert("n_nodes".into(), json!(prepared.graph.n_nodes()));
    report.metadata.insert("cdf_mae".into(), json!(mae));
    report.plots.eigenvalues = prepared.eigenvalues();
    report.plots.density = Some(series);
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Impulse response of `config.truth` at `config.impulse_node`.
pub fn run_impulse(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut config = config.clone();
    config.kind = ExperimentKind::Impulse;
    config.validate()?;
    let start = Instant::now();
    let prepared = PreparedGraph::new(load_graph(&config.graph)?, &config, false)?;
    let response = impulse_response(&prepared.decomposition, &config.truth, config.impulse_node)?;
    let mut report = ExperimentReport::new(config, Vec::new());
    report.plots.impulse = response.iter().copied().collect();
    report.plots.eigenvalues = prepared.eigenvalues();
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(report)
}
