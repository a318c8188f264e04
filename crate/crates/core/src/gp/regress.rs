//! Exact GP regression with a wavelet-filtered prior.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::kernel::{FeatureKernel, WaveletKernel, WaveletOperator};
use super::linalg::{cholesky_with_jitter, log_det, select};
use crate::error::{Error, Result};
use crate::filters::{FilterSpec, SpectralFilter};

/// Best parameters, objective and trace of one restart.
type RestartOutcome = Option<(Vec<f64>, f64, Vec<f64>)>;

/// Range of the log-uniform scale initialization used by restarts.
pub const INIT_SCALE_RANGE: (f64, f64) = (0.1, 20.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub learning_rate: f64,
    /// Stop when the objective changes by less than this (relative) over `patience` iterations.
    pub tolerance: f64,
    pub patience: usize,
    pub seed: u64,
    /// Keep the noise variance fixed at its current value.
    pub fix_noise: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 20,
            max_iters: 300,
            learning_rate: 0.01,
            tolerance: 1e-7,
            patience: 10,
            seed: 0,
            fix_noise: false,
        }
    }
}

/// Posterior marginals at query nodes. Variances are of the latent
/// (noise-free) function.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorPrediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartSummary {
    pub initial: Vec<f64>,
    pub objective: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: WaveletGp,
    /// Marginal likelihood of `model`; reproduced exactly by re-evaluation.
    pub objective: f64,
    /// Objective per iteration of the winning restart.
    pub trace: Vec<f64>,
    pub restarts: Vec<RestartSummary>,
}

/// Mean over `eigenvalues` of `|g_fitted(λ) - g_truth(λ)|`.
pub fn filter_mae<A, B>(fitted: &A, truth: &B, eigenvalues: &[f64]) -> f64
where
    A: SpectralFilter + ?Sized,
    B: SpectralFilter + ?Sized,
{
    if eigenvalues.is_empty() {
        return 0.0;
    }
    let total: f64 = eigenvalues
        .iter()
        .map(|&l| (fitted.value(l) - truth.value(l)).abs())
        .sum();
    total / eigenvalues.len() as f64
}

/// JSON export of a fitted model.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub filter: Option<FilterSpec>,
    pub filter_params: Vec<f64>,
    pub noise_variance: f64,
    pub feature_kernel: FeatureKernel,
    pub operator: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

/// Zero-mean GP regression model `y = f + ε`, `f ~ N(0, W K W)`, `ε ~ N(0, σ² I)`.
#[derive(Debug, Clone)]
pub struct WaveletGp {
    kernel: WaveletKernel,
    noise_variance: f64,
    train: Vec<usize>,
}

struct Evaluation {
    value: f64,
    gradient: Option<Vec<f64>>,
}

impl WaveletGp {
    pub fn new(kernel: WaveletKernel, noise_variance: f64, train: Vec<usize>) -> Result<Self> {
        if !(noise_variance > 0.0) {
            return Err(Error::invalid("noise variance must be positive"));
        }
        let n = kernel.dim();
        let mut seen = vec![false; n];
        for &i in &train {
            if i >= n {
                return Err(Error::NodeOutOfRange { index: i, n_nodes: n });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("duplicate training index {i}")));
            }
        }
        if train.is_empty() {
            return Err(Error::invalid("no training nodes"));
        }
        Ok(WaveletGp {
            kernel,
            noise_variance,
            train,
        })
    }

    pub fn kernel(&self) -> &WaveletKernel {
        &self.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn summary(&self) -> ModelSummary {
        let operator = match self.kernel.operator() {
            WaveletOperator::Exact(_) => "exact".to_string(),
            WaveletOperator::Polynomial { projection, .. } => {
                format!("{} (degree {})", projection.mode(), projection.degree())
            }
        };
        ModelSummary {
            filter: self.kernel.filter().as_spec().cloned(),
            filter_params: self.kernel.filter().params(),
            noise_variance: self.noise_variance,
            feature_kernel: self.kernel.feature().clone(),
            operator,
            objective: None,
            trace: Vec::new(),
        }
    }

    /// Full prior covariance over all nodes, with the jitter (if any) that
    /// made it numerically positive definite.
    pub fn prior_covariance(&self) -> Result<(DMatrix<f64>, f64)> {
        let all: Vec<usize> = (0..self.kernel.dim()).collect();
        let mut c = self.kernel.covariance(&all)?;
        let (_, jitter) = cholesky_with_jitter(&c)?;
        for i in 0..c.nrows() {
            c[(i, i)] += jitter;
        }
        Ok((c, jitter))
    }

    /// Parameters as optimized: kernel parameters followed by `σ²` (unless fixed).
    pub fn params(&self, fix_noise: bool) -> Vec<f64> {
        let mut p = self.kernel.params();
        if !fix_noise {
            p.push(self.noise_variance);
        }
        p
    }

    pub fn with_params(&self, params: &[f64], fix_noise: bool) -> Result<Self> {
        let nk = self.kernel.n_params();
        let expected = nk + usize::from(!fix_noise);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: params.len(),
            });
        }
        Ok(WaveletGp {
            kernel: self.kernel.with_params(&params[..nk])?,
            noise_variance: if fix_noise { self.noise_variance } else { params[nk] },
            train: self.train.clone(),
        })
    }

    fn check_targets(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.train.len() {
            return Err(Error::DimensionMismatch {
                expected: self.train.len(),
                got: y.len(),
            });
        }
        Ok(())
    }

    fn evaluate(&self, y: &[f64], with_gradient: bool, fix_noise: bool) -> Result<Evaluation> {
        self.check_targets(y)?;
        let n = self.train.len();
        let (mut ky, rows) = self.kernel.covariance_parts(&self.train)?;
        for i in 0..n {
            ky[(i, i)] += self.noise_variance;
        }
        let (chol, _) = cholesky_with_jitter(&ky)?;
        let y = DVector::from_column_slice(y);
        let alpha = chol.solve(&y);
        let value = -0.5 * y.dot(&alpha) - 0.5 * log_det(&chol) - 0.5 * n as f64 * (2.0 * PI).ln();
        let gradient = if with_gradient {
            // ∂/∂C = ½ (α αᵀ - K_y⁻¹)
            let adjoint = (&alpha * alpha.transpose() - chol.inverse()) * 0.5;
            let mut g = self.kernel.contract_gradient_with(&self.train, &adjoint, rows)?;
            if !fix_noise {
                g.push(adjoint.trace());
            }
            Some(g)
        } else {
            None
        };
        Ok(Evaluation { value, gradient })
    }

    /// `log p(y | θ, ψ, σ²)` of the training targets.
    pub fn log_marginal_likelihood(&self, y: &[f64]) -> Result<f64> {
        Ok(self.evaluate(y, false, false)?.value)
    }

    /// Value and gradient with respect to [`params`](Self::params) (natural scale).
    pub fn log_marginal_likelihood_with_gradient(&self, y: &[f64], fix_noise: bool) -> Result<(f64, Vec<f64>)> {
        let e = self.evaluate(y, true, fix_noise)?;
        Ok((e.value, e.gradient.expect("gradient requested")))
    }

    /// Maximizes the marginal likelihood with Adam in log-parameter space from
    /// `restarts` random initializations; returns the best parameters seen.
    pub fn optimize(&self, y: &[f64], config: &OptimizerConfig) -> Result<FitResult> {
        self.check_targets(y)?;
        if config.restarts < 1 {
            return Err(Error::invalid("at least one restart is required"));
        }
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
        let n_filter = self.kernel.filter().n_params();
        let base = self.params(config.fix_noise);
        let inits: Vec<Vec<f64>> = (0..config.restarts)
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(r as u64);
                let (lo, hi) = (INIT_SCALE_RANGE.0.ln(), INIT_SCALE_RANGE.1.ln());
                let mut p = base.clone();
                for v in p.iter_mut().take(n_filter) {
                    *v = rng.random_range(lo..hi).exp();
                }
                if !config.fix_noise {
                    *p.last_mut().unwrap() = (0.1 * var).max(1e-6);
                }
                p
            })
            .collect();
        let runs: Vec<(RestartSummary, RestartOutcome)> = inits
            .into_par_iter()
            .map(|init| self.run_restart(y, init, config))
            .collect();
        let mut best: RestartOutcome = None;
        let mut summaries = Vec::with_capacity(runs.len());
        for (summary, outcome) in runs {
            summaries.push(summary);
            if let Some(o) = outcome {
                if best.as_ref().is_none_or(|b| o.1 > b.1) {
                    best = Some(o);
                }
            }
        }
        let (params, objective, trace) =
            best.ok_or_else(|| Error::OptimizationFailed("all restarts failed numerically".into()))?;
        Ok(FitResult {
            model: self.with_params(&params, config.fix_noise)?,
            objective,
            trace,
            restarts: summaries,
        })
    }

    fn run_restart(&self, y: &[f64], init: Vec<f64>, config: &OptimizerConfig) -> (RestartSummary, RestartOutcome) {
        let mut log_p: Vec<f64> = init.iter().map(|v| v.ln()).collect();
        let mut adam = Adam::new(log_p.len(), config.learning_rate);
        let mut trace = Vec::with_capacity(config.max_iters);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for _ in 0..config.max_iters {
            let params: Vec<f64> = log_p.iter().map(|v| v.exp()).collect();
            let step = self
                .with_params(&params, config.fix_noise)
                .and_then(|m| m.evaluate(y, true, config.fix_noise));
            let e = match step {
                Ok(e) if e.value.is_finite() => e,
                _ => break,
            };
            let grad = e.gradient.expect("gradient requested");
            if grad.iter().any(|g| !g.is_finite()) {
                break;
            }
            trace.push(e.value);
            if best.as_ref().is_none_or(|b| e.value > b.1) {
                best = Some((params.clone(), e.value));
            }
            // chain rule into log space
            let log_grad: Vec<f64> = grad.iter().zip(&params).map(|(g, p)| g * p).collect();
            adam.step(&mut log_p, &log_grad);
            let k = trace.len();
            if k > config.patience {
                let old = trace[k - 1 - config.patience];
                if (e.value - old).abs() < config.tolerance * e.value.abs().max(1.0) {
                    break;
                }
            }
        }
        let summary = RestartSummary {
            initial: init,
            objective: best.as_ref().map(|b| b.1),
            iterations: trace.len(),
        };
        (summary, best.map(|(p, v)| (p, v, trace)))
    }

    /// Posterior of the latent function at `query` given training targets `y`.
    pub fn predict(&self, y: &[f64], query: &[usize]) -> Result<PosteriorPrediction> {
        self.check_targets(y)?;
        let n = self.kernel.dim();
        if let Some(&index) = query.iter().find(|&&q| q >= n) {
            return Err(Error::NodeOutOfRange { index, n_nodes: n });
        }
        let t = self.train.len();
        let mut union = self.train.clone();
        let mut position = vec![usize::MAX; n];
        for (i, &v) in self.train.iter().enumerate() {
            position[v] = i;
        }
        for &q in query {
            if position[q] == usize::MAX {
                position[q] = union.len();
                union.push(q);
            }
        }
        let c = self.kernel.covariance(&union)?;
        let train_pos: Vec<usize> = (0..t).collect();
        let query_pos: Vec<usize> = query.iter().map(|&q| position[q]).collect();
        let mut ky = select(&c, &train_pos, &train_pos);
        for i in 0..t {
            ky[(i, i)] += self.noise_variance;
        }
        let (chol, _) = cholesky_with_jitter(&ky)?;
        let cross = select(&c, &train_pos, &query_pos);
        let alpha = chol.solve(&DVector::from_column_slice(y));
        let mean = cross.tr_mul(&alpha);
        let v = chol
            .l()
            .solve_lower_triangular(&cross)
            .expect("triangular factor is nonsingular");
        let variance = query_pos
            .iter()
            .enumerate()
            .map(|(j, &p)| (c[(p, p)] - v.column(j).norm_squared()).max(0.0))
            .collect();
        Ok(PosteriorPrediction {
            mean: mean.iter().copied().collect(),
            variance,
        })
    }
}

impl FitResult {
    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            objective: Some(self.objective),
            trace: self.trace.clone(),
            ..self.model.summary()
        }
    }
}
