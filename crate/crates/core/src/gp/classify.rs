//! Variational multi-class GP classification with a shared wavelet kernel.
//!
//! One latent GP per class; `q(u_c) = N(m_c, L_c L_cᵀ)` over the inducing
//! nodes; softmax likelihood with reparameterized Monte Carlo draws. With
//! the default inducing set (all training nodes) the model is the
//! non-sparse variational GP.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::kernel::WaveletKernel;
use super::linalg::{cholesky_with_jitter, log_det, select};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InducingPoints {
    /// Every training node is an inducing input.
    All,
    /// Uniform subsample of this many training nodes.
    Subset(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub mc_samples: usize,
    pub inducing: InducingPoints,
    /// Optimize filter and feature-kernel parameters jointly with `q`.
    pub learn_kernel: bool,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            learning_rate: 0.01,
            max_epochs: 300,
            mc_samples: 16,
            inducing: InducingPoints::All,
            learn_kernel: true,
            seed: 0,
        }
    }
}

/// Variational parameters, one `(m_c, L_c)` pair per class.
#[derive(Debug, Clone)]
pub struct VariationalState {
    means: Vec<DVector<f64>>,
    factors: Vec<DMatrix<f64>>,
}

impl VariationalState {
    /// `m_c = 0`, `S_c = K_zz` for every class.
    pub fn from_prior(k_zz_factor: &DMatrix<f64>, n_classes: usize) -> Self {
        let m = k_zz_factor.nrows();
        VariationalState {
            means: vec![DVector::zeros(m); n_classes],
            factors: vec![k_zz_factor.clone(); n_classes],
        }
    }

    pub fn new(means: Vec<DVector<f64>>, factors: Vec<DMatrix<f64>>) -> Result<Self> {
        if means.len() != factors.len() || means.is_empty() {
            return Err(Error::invalid("need one mean and one factor per class"));
        }
        let m = means[0].len();
        for (mean, l) in means.iter().zip(&factors) {
            if mean.len() != m || l.nrows() != m || l.ncols() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: l.nrows(),
                });
            }
            if l.diagonal().iter().any(|&d| !(d > 0.0)) {
                return Err(Error::invalid("covariance factor needs a positive diagonal"));
            }
        }
        Ok(VariationalState {
            means,
            factors: factors.into_iter().map(|l| l.lower_triangle()).collect(),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.means.len()
    }

    pub fn n_inducing(&self) -> usize {
        self.means[0].len()
    }

    pub fn mean(&self, class: usize) -> &DVector<f64> {
        &self.means[class]
    }

    pub fn factor(&self, class: usize) -> &DMatrix<f64> {
        &self.factors[class]
    }

    pub fn covariance(&self, class: usize) -> DMatrix<f64> {
        &self.factors[class] * self.factors[class].transpose()
    }

    pub fn set_mean(&mut self, class: usize, mean: DVector<f64>) {
        self.means[class] = mean;
    }

    /// Unconstrained vector: per class, the mean, then the lower triangle
    /// of `L` row-major with the diagonal stored as `ln L_ii`.
    fn to_vector(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (m, l) in self.means.iter().zip(&self.factors) {
            out.extend(m.iter());
            for i in 0..l.nrows() {
                for j in 0..=i {
                    out.push(if i == j { l[(i, i)].ln() } else { l[(i, j)] });
                }
            }
        }
        out
    }

    fn from_vector(v: &[f64], n_classes: usize, m: usize) -> Self {
        let mut means = Vec::with_capacity(n_classes);
        let mut factors = Vec::with_capacity(n_classes);
        let mut it = v.iter().copied();
        for _ in 0..n_classes {
            means.push(DVector::from_iterator(m, it.by_ref().take(m)));
            let mut l = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..=i {
                    let x = it.next().expect("vector length");
                    l[(i, j)] = if i == j { x.exp() } else { x };
                }
            }
            factors.push(l);
        }
        VariationalState { means, factors }
    }

    fn vector_len(n_classes: usize, m: usize) -> usize {
        n_classes * (m + m * (m + 1) / 2)
    }
}

/// Gradients of the ELBO.
#[derive(Debug, Clone)]
pub struct ElboGradient {
    pub means: Vec<DVector<f64>>,
    /// With respect to `L_c` (lower triangle).
    pub factors: Vec<DMatrix<f64>>,
    /// With respect to the kernel parameters in natural scale.
    pub kernel: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassPrediction {
    /// Monte Carlo averaged class probabilities, one row per query node.
    pub probabilities: Vec<Vec<f64>>,
    pub predicted: Vec<usize>,
    /// Variance across draws of the predicted class's probability.
    pub variance: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RejectionRow {
    pub threshold: f64,
    pub kept_fraction: f64,
    pub kept: usize,
    /// `None` when no node is kept.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ClassifierFit {
    pub model: WaveletGpClassifier,
    pub state: VariationalState,
    /// ELBO estimate per epoch.
    pub trace: Vec<f64>,
    pub best_epoch: usize,
}

/// Kernel blocks over the training nodes shared by the ELBO terms.
struct Blocks {
    kdiag: DVector<f64>,
    kzz_inv: DMatrix<f64>,
    kzz_logdet: f64,
    a: DMatrix<f64>,
    /// rowsum(A ∘ K_xz)
    q_diag: DVector<f64>,
}

/// Standard normal draws for the Monte Carlo expectation, `[sample][node * C + class]`.
pub fn mc_draws(samples: usize, nodes: usize, classes: usize, seed: u64, stream: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..samples)
        .map(|_| (0..nodes * classes).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

fn softmax(logits: &[f64], out: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    max + total.ln()
}

/// Wavelet GP classifier over the nodes of one graph.
#[derive(Debug, Clone)]
pub struct WaveletGpClassifier {
    kernel: WaveletKernel,
    n_classes: usize,
    train: Vec<usize>,
    /// Positions within `train` of the inducing nodes.
    inducing: Vec<usize>,
}

impl WaveletGpClassifier {
    pub fn new(kernel: WaveletKernel, n_classes: usize, train: Vec<usize>) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::invalid("classification needs at least two classes"));
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
        let inducing = (0..train.len()).collect();
        Ok(WaveletGpClassifier {
            kernel,
            n_classes,
            train,
            inducing,
        })
    }

    /// Restricts the inducing set to the given training-node positions.
    pub fn with_inducing_positions(mut self, positions: Vec<usize>) -> Result<Self> {
        let t = self.train.len();
        let mut seen = vec![false; t];
        for &p in &positions {
            if p >= t || std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid("inducing positions must be distinct training positions"));
            }
        }
        if positions.is_empty() {
            return Err(Error::invalid("empty inducing set"));
        }
        self.inducing = positions;
        Ok(self)
    }

    pub fn with_kernel(&self, kernel: WaveletKernel) -> Self {
        WaveletGpClassifier { kernel, ..self.clone() }
    }

    pub fn kernel(&self) -> &WaveletKernel {
        &self.kernel
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    /// Node indices of the inducing inputs.
    pub fn inducing_nodes(&self) -> Vec<usize> {
        self.inducing.iter().map(|&p| self.train[p]).collect()
    }

    /// Cholesky factor of `K_zz` (after jitter), for initializing `q` at the prior.
    pub fn prior_factor(&self) -> Result<DMatrix<f64>> {
        let c = self.kernel.covariance(&self.train)?;
        let kzz = select(&c, &self.inducing, &self.inducing);
        Ok(cholesky_with_jitter(&kzz)?.0.l())
    }

    pub fn prior_state(&self) -> Result<VariationalState> {
        Ok(VariationalState::from_prior(&self.prior_factor()?, self.n_classes))
    }

    fn blocks(&self, c: &DMatrix<f64>, rows: &[usize]) -> Result<Blocks> {
        let kzz = select(c, &self.inducing, &self.inducing);
        let (chol, _) = cholesky_with_jitter(&kzz)?;
        let kzz_inv = chol.inverse();
        let k_xz = select(c, rows, &self.inducing);
        let kdiag = DVector::from_iterator(rows.len(), rows.iter().map(|&r| c[(r, r)]));
        let a = &k_xz * &kzz_inv;
        let q_diag = DVector::from_iterator(rows.len(), (0..rows.len()).map(|i| a.row(i).dot(&k_xz.row(i))));
        Ok(Blocks {
            kdiag,
            kzz_logdet: log_det(&chol),
            kzz_inv,
            a,
            q_diag,
        })
    }

    fn check_state(&self, state: &VariationalState) -> Result<()> {
        if state.n_classes() != self.n_classes {
            return Err(Error::DimensionMismatch {
                expected: self.n_classes,
                got: state.n_classes(),
            });
        }
        if state.n_inducing() != self.inducing.len() {
            return Err(Error::DimensionMismatch {
                expected: self.inducing.len(),
                got: state.n_inducing(),
            });
        }
        Ok(())
    }

    fn check_labels(&self, labels: &[usize]) -> Result<()> {
        if labels.len() != self.train.len() {
            return Err(Error::DimensionMismatch {
                expected: self.train.len(),
                got: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.n_classes) {
            return Err(Error::invalid(format!("class index {bad} out of range")));
        }
        Ok(())
    }

    /// Marginal means and variances `[class][row]` of `q(f)` at `rows`.
    fn marginals(&self, b: &Blocks, state: &VariationalState) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let mut mus = Vec::with_capacity(self.n_classes);
        let mut vars = Vec::with_capacity(self.n_classes);
        for c in 0..self.n_classes {
            mus.push(&b.a * state.mean(c));
            let as_ = &b.a * state.covariance(c);
            let r_diag = (0..b.a.nrows()).map(|i| as_.row(i).dot(&b.a.row(i)));
            vars.push(DVector::from_iterator(
                b.a.nrows(),
                r_diag
                    .zip(b.kdiag.iter().zip(b.q_diag.iter()))
                    .map(|(r, (k, q))| (k - q + r).max(1e-12)),
            ));
        }
        (mus, vars)
    }

    /// `KL[q(u) || p(u)]` summed over classes.
    pub fn kl_divergence(&self, state: &VariationalState) -> Result<f64> {
        self.check_state(state)?;
        let c = self.kernel.covariance(&self.train)?;
        let rows: Vec<usize> = (0..self.train.len()).collect();
        let b = self.blocks(&c, &rows)?;
        Ok(self.kl_terms(&b, state))
    }

    fn kl_terms(&self, b: &Blocks, state: &VariationalState) -> f64 {
        let m = state.n_inducing() as f64;
        (0..self.n_classes)
            .map(|c| {
                let s = state.covariance(c);
                let mean = state.mean(c);
                let logdet_s = 2.0 * state.factor(c).diagonal().iter().map(|d| d.ln()).sum::<f64>();
                0.5 * ((&b.kzz_inv * &s).trace() + mean.dot(&(&b.kzz_inv * mean)) - m + b.kzz_logdet - logdet_s)
            })
            .sum()
    }

    /// Monte Carlo ELBO with `mc_samples` draws per node from `seed`.
    pub fn elbo(&self, state: &VariationalState, labels: &[usize], mc_samples: usize, seed: u64) -> Result<f64> {
        let draws = mc_draws(mc_samples, self.train.len(), self.n_classes, seed, 0);
        Ok(self.elbo_with_draws(state, labels, &draws, false)?.0)
    }

    /// ELBO and its gradient for fixed draws (common random numbers).
    pub fn elbo_with_gradient(
        &self,
        state: &VariationalState,
        labels: &[usize],
        draws: &[Vec<f64>],
    ) -> Result<(f64, ElboGradient)> {
        let (v, g) = self.elbo_with_draws(state, labels, draws, true)?;
        Ok((v, g.expect("gradient requested")))
    }

    fn elbo_with_draws(
        &self,
        state: &VariationalState,
        labels: &[usize],
        draws: &[Vec<f64>],
        with_gradient: bool,
    ) -> Result<(f64, Option<ElboGradient>)> {
        self.check_state(state)?;
        self.check_labels(labels)?;
        if draws.is_empty() {
            return Err(Error::invalid("need at least one Monte Carlo sample"));
        }
        let n = self.train.len();
        let nc = self.n_classes;
        if draws.iter().any(|d| d.len() != n * nc) {
            return Err(Error::DimensionMismatch {
                expected: n * nc,
                got: draws[0].len(),
            });
        }
        let (c, w_rows) = self.kernel.covariance_parts(&self.train)?;
        let rows: Vec<usize> = (0..n).collect();
        let b = self.blocks(&c, &rows)?;
        let (mus, vars) = self.marginals(&b, state);
        let sds: Vec<DVector<f64>> = vars.iter().map(|v| v.map(f64::sqrt)).collect();

        let s_count = draws.len() as f64;
        let mut ell = 0.0;
        let mut mu_bar = vec![DVector::<f64>::zeros(n); nc];
        let mut var_bar = vec![DVector::<f64>::zeros(n); nc];
        let mut logits = vec![0.0; nc];
        let mut probs = vec![0.0; nc];
        for eps in draws {
            for i in 0..n {
                for k in 0..nc {
                    logits[k] = mus[k][i] + sds[k][i] * eps[i * nc + k];
                }
                let lse = softmax(&logits, &mut probs);
                ell += logits[labels[i]] - lse;
                if with_gradient {
                    for k in 0..nc {
                        let g = f64::from(u8::from(k == labels[i])) - probs[k];
                        mu_bar[k][i] += g / s_count;
                        var_bar[k][i] += g * eps[i * nc + k] / (2.0 * sds[k][i] * s_count);
                    }
                }
            }
        }
        ell /= s_count;
        let value = ell - self.kl_terms(&b, state);
        if !with_gradient {
            return Ok((value, None));
        }

        let m = self.inducing.len();
        let mut kxz_bar = DMatrix::<f64>::zeros(n, m);
        let mut kzz_bar = DMatrix::<f64>::zeros(m, m);
        let mut kdiag_bar = DVector::<f64>::zeros(n);
        let mut mean_grads = Vec::with_capacity(nc);
        let mut factor_grads = Vec::with_capacity(nc);
        for k in 0..nc {
            let mean = state.mean(k);
            let l = state.factor(k);
            let s = state.covariance(k);
            let a_vec = &b.kzz_inv * mean;
            let at_mu = b.a.tr_mul(&mu_bar[k]);
            // D̄ A
            let mut da = b.a.clone();
            for (i, &v) in var_bar[k].iter().enumerate() {
                da.row_mut(i).scale_mut(v);
            }
            let atda = b.a.tr_mul(&da);
            let s_kinv = &s * &b.kzz_inv;

            mean_grads.push(&at_mu - &a_vec);
            let mut lg = (&atda * l) * 2.0 - &b.kzz_inv * l;
            for i in 0..m {
                lg[(i, i)] += 1.0 / l[(i, i)];
            }
            factor_grads.push(lg.lower_triangle());

            kxz_bar += &mu_bar[k] * a_vec.transpose() - &da * 2.0 + (&da * &s_kinv) * 2.0;
            kzz_bar += -(&at_mu * a_vec.transpose()) + &atda - (&atda * &s_kinv) * 2.0;
            // -∂KL/∂K_zz
            kzz_bar += (&b.kzz_inv * &s_kinv + &a_vec * a_vec.transpose() - &b.kzz_inv) * 0.5;
            kdiag_bar += &var_bar[k];
        }
        let mut adjoint = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            adjoint[(i, i)] += kdiag_bar[i];
            for (j, &zj) in self.inducing.iter().enumerate() {
                adjoint[(i, zj)] += kxz_bar[(i, j)];
            }
        }
        for (i, &zi) in self.inducing.iter().enumerate() {
            for (j, &zj) in self.inducing.iter().enumerate() {
                adjoint[(zi, zj)] += kzz_bar[(i, j)];
            }
        }
        let kernel = self.kernel.contract_gradient_with(&self.train, &adjoint, w_rows)?;
        Ok((
            value,
            Some(ElboGradient {
                means: mean_grads,
                factors: factor_grads,
                kernel,
            }),
        ))
    }

    /// ELBO of a single latent GP under a Gaussian likelihood `N(y | f, noise)`.
    /// Uses class 0 of `state`; the expectation is closed form.
    pub fn gaussian_elbo(&self, state: &VariationalState, y: &[f64], noise_variance: f64) -> Result<f64> {
        self.check_state(state)?;
        if y.len() != self.train.len() {
            return Err(Error::DimensionMismatch {
                expected: self.train.len(),
                got: y.len(),
            });
        }
        let c = self.kernel.covariance(&self.train)?;
        let rows: Vec<usize> = (0..self.train.len()).collect();
        let b = self.blocks(&c, &rows)?;
        let (mus, vars) = self.marginals(&b, state);
        let ell: f64 = y
            .iter()
            .enumerate()
            .map(|(i, &yi)| {
                -0.5 * (2.0 * PI * noise_variance).ln()
                    - ((yi - mus[0][i]).powi(2) + vars[0][i]) / (2.0 * noise_variance)
            })
            .sum();
        let single = VariationalState {
            means: vec![state.mean(0).clone()],
            factors: vec![state.factor(0).clone()],
        };
        let one_class = WaveletGpClassifier {
            n_classes: 1,
            ..self.clone()
        };
        Ok(ell - one_class.kl_terms(&b, &single))
    }

    /// Joint Adam ascent of the ELBO over `q` and (optionally) kernel
    /// parameters. Returns the state with the best training ELBO.
    pub fn fit(&self, labels: &[usize], config: &ClassifierConfig) -> Result<ClassifierFit> {
        self.check_labels(labels)?;
        let model = match config.inducing {
            InducingPoints::All => self.clone(),
            InducingPoints::Subset(m) => {
                let t = self.train.len();
                if m == 0 || m > t {
                    return Err(Error::invalid(format!("inducing subset size {m} not in 1..={t}")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x1dc0_5eed);
                let mut positions = sample(&mut rng, t, m).into_vec();
                positions.sort_unstable();
                self.clone().with_inducing_positions(positions)?
            }
        };
        let state = model.prior_state()?;
        let (nc, m) = (model.n_classes, model.inducing.len());
        let n_var = VariationalState::vector_len(nc, m);
        let mut params = state.to_vector();
        let kernel_params = model.kernel.params();
        if config.learn_kernel {
            params.extend(kernel_params.iter().map(|p| p.ln()));
        }
        let mut adam = Adam::new(params.len(), config.learning_rate);
        let mut trace = Vec::with_capacity(config.max_epochs);
        let mut best: Option<(f64, usize, WaveletGpClassifier, VariationalState)> = None;
        for epoch in 0..config.max_epochs {
            let state = VariationalState::from_vector(&params[..n_var], nc, m);
            let current = if config.learn_kernel {
                let natural: Vec<f64> = params[n_var..].iter().map(|v| v.exp()).collect();
                model.with_kernel(model.kernel.with_params(&natural)?)
            } else {
                model.clone()
            };
            let draws = mc_draws(config.mc_samples, model.train.len(), nc, config.seed, epoch as u64);
            let (value, grad) = match current.elbo_with_gradient(&state, labels, &draws) {
                Ok(r) if r.0.is_finite() => r,
                Ok(_) => break,
                Err(e) if best.is_none() => return Err(e),
                Err(_) => break,
            };
            trace.push(value);
            if best.as_ref().is_none_or(|b| value > b.0) {
                best = Some((value, epoch, current.clone(), state.clone()));
            }
            let mut flat = Vec::with_capacity(params.len());
            for k in 0..nc {
                flat.extend(grad.means[k].iter());
                let l = state.factor(k);
                for i in 0..m {
                    for j in 0..=i {
                        let g = grad.factors[k][(i, j)];
                        flat.push(if i == j { g * l[(i, i)] } else { g });
                    }
                }
            }
            if config.learn_kernel {
                let natural = current.kernel.params();
                flat.extend(grad.kernel.iter().zip(&natural).map(|(g, p)| g * p));
            }
            if flat.iter().any(|g| !g.is_finite()) {
                break;
            }
            adam.step(&mut params, &flat);
        }
        let (_, best_epoch, model, state) =
            best.ok_or_else(|| Error::OptimizationFailed("no epoch completed".into()))?;
        Ok(ClassifierFit {
            model,
            state,
            trace,
            best_epoch,
        })
    }

    /// Predictive class probabilities at `query` from `mc_samples` draws.
    pub fn predict(
        &self,
        state: &VariationalState,
        query: &[usize],
        mc_samples: usize,
        seed: u64,
    ) -> Result<ClassPrediction> {
        self.check_state(state)?;
        if mc_samples == 0 {
            return Err(Error::invalid("need at least one Monte Carlo sample"));
        }
        let n = self.kernel.dim();
        if let Some(&index) = query.iter().find(|&&q| q >= n) {
            return Err(Error::NodeOutOfRange { index, n_nodes: n });
        }
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
        let rows: Vec<usize> = query.iter().map(|&q| position[q]).collect();
        let b = self.blocks(&c, &rows)?;
        let (mus, vars) = self.marginals(&b, state);
        let nc = self.n_classes;
        let draws = mc_draws(mc_samples, query.len(), nc, seed, u64::MAX);
        let mut probabilities = Vec::with_capacity(query.len());
        let mut predicted = Vec::with_capacity(query.len());
        let mut variance = Vec::with_capacity(query.len());
        let mut logits = vec![0.0; nc];
        let mut p = vec![0.0; nc];
        for i in 0..query.len() {
            let mut per_draw = Vec::with_capacity(mc_samples);
            let mut mean = vec![0.0; nc];
            for eps in &draws {
                for k in 0..nc {
                    logits[k] = mus[k][i] + vars[k][i].sqrt() * eps[i * nc + k];
                }
                softmax(&logits, &mut p);
                for k in 0..nc {
                    mean[k] += p[k] / mc_samples as f64;
                }
                per_draw.push(p.clone());
            }
            let best = (0..nc).max_by(|&a, &b| mean[a].total_cmp(&mean[b])).unwrap();
            let avg = mean[best];
            let var = per_draw.iter().map(|d| (d[best] - avg).powi(2)).sum::<f64>() / mc_samples as f64;
            probabilities.push(mean);
            predicted.push(best);
            variance.push(var);
        }
        Ok(ClassPrediction {
            probabilities,
            predicted,
            variance,
        })
    }
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if predicted.is_empty() {
        return f64::NAN;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / predicted.len() as f64
}

/// Accuracy over nodes whose predictive variance is at most each threshold.
pub fn rejection_curve(prediction: &ClassPrediction, truth: &[usize], thresholds: &[f64]) -> Result<Vec<RejectionRow>> {
    let n = prediction.predicted.len();
    if truth.len() != n || prediction.variance.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: truth.len(),
        });
    }
    Ok(thresholds
        .iter()
        .map(|&threshold| {
            let kept: Vec<usize> = (0..n).filter(|&i| prediction.variance[i] <= threshold).collect();
            let hits = kept.iter().filter(|&&i| prediction.predicted[i] == truth[i]).count();
            RejectionRow {
                threshold,
                kept_fraction: if n == 0 { 0.0 } else { kept.len() as f64 / n as f64 },
                kept: kept.len(),
                accuracy: (!kept.is_empty()).then(|| hits as f64 / kept.len() as f64),
            }
        })
        .collect())
}

/// `epoch,elbo` CSV lines for a convergence trace.
pub fn elbo_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("epoch,elbo\n");
    for (i, v) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    out
}
