use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::DensityConfig;
use crate::error::{Error, Result};
use crate::filters::{FilterSpec, MotherWavelet};
use crate::gp::{ClassifierConfig, OptimizerConfig};
use crate::poly::{ApproxMode, MAX_DEGREE};
use crate::synth::MultiScaleSpec;

/// How the wavelet operator is realized in a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FitMode {
    Exact,
    Poly(ApproxMode),
}

impl fmt::Display for FitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitMode::Exact => f.write_str("exact"),
            FitMode::Poly(m) => m.fmt(f),
        }
    }
}

impl FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(FitMode::Exact),
            other => other
                .parse::<ApproxMode>()
                .map(FitMode::Poly)
                .map_err(|_| Error::Config(format!("unknown mode {other:?} (exact|uls|wls|cheb)"))),
        }
    }
}

impl TryFrom<String> for FitMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FitMode> for String {
    fn from(m: FitMode) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ScaleRecovery,
    Mismatch,
    Classification,
    Density,
    Impulse,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::ScaleRecovery => "scale-recovery",
            ExperimentKind::Mismatch => "mismatch",
            ExperimentKind::Classification => "classification",
            ExperimentKind::Density => "density",
            ExperimentKind::Impulse => "impulse",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GraphSource {
    Synthetic {
        spec: MultiScaleSpec,
    },
    EdgeList {
        path: PathBuf,
    },
    Dataset {
        path: PathBuf,
    },
    /// Two ER clusters labelled by the sign of the Fiedler vector.
    Toy {
        cluster_size: usize,
        seed: u64,
    },
}

impl Default for GraphSource {
    fn default() -> Self {
        GraphSource::Synthetic {
            spec: MultiScaleSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSettings {
    /// Use `K = I` instead of the polynomial kernel.
    pub identity: bool,
    pub tfidf: bool,
    pub degree: u32,
    pub variance: f64,
    pub offset: f64,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        FeatureSettings {
            identity: false,
            tfidf: true,
            degree: 3,
            variance: 1.0,
            offset: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassificationSettings {
    pub features: FeatureSettings,
    pub classifier: ClassifierConfig,
    /// Replace the bundle split with a stratified one of this many nodes per class.
    pub per_class_train: Option<usize>,
    pub val_size: usize,
    pub split_seed: u64,
    pub predict_samples: usize,
    pub rejection_points: usize,
    /// Band-scale counts to sweep; empty means the count in `init`.
    pub scale_counts: Vec<usize>,
}

impl Default for ClassificationSettings {
    fn default() -> Self {
        ClassificationSettings {
            features: FeatureSettings::default(),
            classifier: ClassifierConfig::default(),
            per_class_train: None,
            val_size: 0,
            split_seed: 0,
            predict_samples: 256,
            rejection_points: 20,
            scale_counts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub graph: GraphSource,
    /// Generating filter for synthetic labels.
    pub truth: FilterSpec,
    /// Fitted filter family (mother and number of scales). Restarts draw
    /// fresh scales; these values only fix the structure.
    pub init: FilterSpec,
    pub modes: Vec<FitMode>,
    pub degree: usize,
    pub fractions: Vec<f64>,
    pub repetitions: usize,
    pub optimizer: OptimizerConfig,
    pub density: DensityConfig,
    pub seed: u64,
    /// Mismatch runs also fit the generating mother for a paired comparison.
    pub compare_matched: bool,
    pub impulse_node: usize,
    pub classification: ClassificationSettings,
}

impl ExperimentConfig {
    /// Classification on the two-cluster toy graph. Features are node
    /// indicators under a linear kernel, so only an output scale is learned.
    pub fn toy_classification(cluster_size: usize, seed: u64) -> Self {
        ExperimentConfig {
            kind: ExperimentKind::Classification,
            graph: GraphSource::Toy { cluster_size, seed },
            init: super::classification::toy_filter(),
            modes: vec![FitMode::Exact],
            classification: ClassificationSettings {
                features: FeatureSettings {
                    identity: false,
                    tfidf: false,
                    degree: 1,
                    variance: 10.0,
                    offset: 0.0,
                },
                classifier: ClassifierConfig {
                    learning_rate: 0.05,
                    max_epochs: 1000,
                    seed,
                    ..Default::default()
                },
                ..Default::default()
            },
            ..Default::default()
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::ScaleRecovery,
            graph: GraphSource::default(),
            truth: FilterSpec::ground_truth(),
            init: FilterSpec::ground_truth(),
            modes: vec![FitMode::Exact],
            degree: 5,
            fractions: vec![0.1, 0.3, 0.5, 0.7],
            repetitions: 30,
            optimizer: OptimizerConfig::default(),
            density: DensityConfig::default(),
            seed: 0,
            compare_matched: false,
            impulse_node: 0,
            classification: ClassificationSettings::default(),
        }
    }
}

/// Band scales spread geometrically over `[0.5, 8]`, for scale-count sweeps.
pub fn spread_scales(mother: MotherWavelet, alpha: Option<f64>, count: usize) -> Result<FilterSpec> {
    let betas: Vec<f64> = match count {
        0 => Vec::new(),
        1 => vec![2.0],
        c => (0..c).map(|i| 0.5 * 16f64.powf(i as f64 / (c - 1) as f64)).collect(),
    };
    FilterSpec::new(mother, alpha, betas)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match &self.graph {
            GraphSource::EdgeList { path } | GraphSource::Dataset { path } => {
                if !path.exists() {
                    return bad(format!("{} does not exist", path.display()));
                }
            }
            GraphSource::Toy { cluster_size, .. } if *cluster_size < 2 => {
                return bad("toy clusters need at least two nodes".into());
            }
            _ => {}
        }
        if self.modes.is_empty() {
            return bad("at least one mode is required".into());
        }
        if self.degree > MAX_DEGREE {
            return bad(format!("degree {} exceeds {MAX_DEGREE}", self.degree));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return bad(format!("training fraction {f} not in (0, 1)"));
        }
        if matches!(self.kind, ExperimentKind::ScaleRecovery | ExperimentKind::Mismatch) {
            if self.fractions.is_empty() {
                return bad("at least one training fraction is required".into());
            }
            if self.repetitions == 0 {
                return bad("repetitions must be positive".into());
            }
            if self.optimizer.restarts == 0 {
                return bad("restarts must be positive".into());
            }
            if matches!(self.graph, GraphSource::Dataset { .. } | GraphSource::Toy { .. }) {
                return bad("regression experiments need a synthetic or edge-list graph".into());
            }
        }
        if self.kind == ExperimentKind::Classification
            && !matches!(self.graph, GraphSource::Dataset { .. } | GraphSource::Toy { .. })
        {
            return bad("classification needs a dataset bundle or the toy source".into());
        }
        if self.classification.classifier.mc_samples == 0 || self.classification.predict_samples == 0 {
            return bad("Monte Carlo sample counts must be positive".into());
        }
        Ok(())
    }
}

/// Deterministic seed for a (base, stream, index) triple.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xd1b5_4a32_d192_ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
