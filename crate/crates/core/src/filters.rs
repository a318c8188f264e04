//! Spectral filter functions on `[0, 2]`: the Mexican Hat and Morlet
//! band-pass profiles, the `1 / (1 + αλ)` low-pass, and their sums.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SpectralDecomposition;

/// Morlet width as a fraction of its center scale.
pub const MORLET_WIDTH_RATIO: f64 = 0.5;

fn mexican_hat_norm() -> f64 {
    2.0 * 2f64.sqrt() / (3f64.sqrt() * PI.powf(0.25))
}

fn check_scale(name: &str, s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {s}")))
    }
}

/// `b_β(λ) = c (λ/β)² exp(-(λ/β)²/2)` with `c = 2√2 / (√3 π^{1/4})`.
pub fn mexican_hat(lambda: f64, beta: f64) -> Result<f64> {
    check_scale("beta", beta)?;
    Ok(mexican_hat_unchecked(lambda, beta))
}

/// Gaussian bump of unit height centred at `β` with width `β/2`.
pub fn morlet(lambda: f64, beta: f64) -> Result<f64> {
    check_scale("beta", beta)?;
    Ok(morlet_unchecked(lambda, beta))
}

/// `h_α(λ) = 1 / (1 + αλ)`.
pub fn low_pass(lambda: f64, alpha: f64) -> Result<f64> {
    check_scale("alpha", alpha)?;
    Ok(low_pass_unchecked(lambda, alpha))
}

fn mexican_hat_unchecked(lambda: f64, beta: f64) -> f64 {
    let u = lambda / beta;
    mexican_hat_norm() * u * u * (-0.5 * u * u).exp()
}

fn mexican_hat_dbeta(lambda: f64, beta: f64) -> f64 {
    let u = lambda / beta;
    let u2 = u * u;
    -mexican_hat_norm() * (2.0 * u2 - u2 * u2) * (-0.5 * u2).exp() / beta
}

fn morlet_unchecked(lambda: f64, beta: f64) -> f64 {
    let z = (lambda - beta) / (MORLET_WIDTH_RATIO * beta);
    (-0.5 * z * z).exp()
}

fn morlet_dbeta(lambda: f64, beta: f64) -> f64 {
    // z = (λ/β - 1)/r, dz/dβ = -λ/(r β²)
    let r = MORLET_WIDTH_RATIO;
    let z = (lambda / beta - 1.0) / r;
    let value = (-0.5 * z * z).exp();
    value * z * lambda / (r * beta * beta)
}

fn low_pass_unchecked(lambda: f64, alpha: f64) -> f64 {
    1.0 / (1.0 + alpha * lambda)
}

fn low_pass_dalpha(lambda: f64, alpha: f64) -> f64 {
    let d = 1.0 + alpha * lambda;
    -lambda / (d * d)
}

/// A spectral response `g(λ)` with positive, differentiable parameters.
///
/// The wavelet GP models are written against this trait so that
/// parameter-free reference filters can stand in for a [`FilterSpec`].
pub trait SpectralFilter: fmt::Debug + Send + Sync {
    fn value(&self, lambda: f64) -> f64;

    /// Partial derivatives of `value` with respect to each entry of [`params`](Self::params).
    fn gradient(&self, lambda: f64) -> Vec<f64>;

    /// Current parameters; all strictly positive.
    fn params(&self) -> Vec<f64>;

    fn with_params(&self, params: &[f64]) -> Result<Box<dyn SpectralFilter>>;

    fn boxed_clone(&self) -> Box<dyn SpectralFilter>;

    /// The filter as a serializable spec, when it is one.
    fn as_spec(&self) -> Option<&FilterSpec> {
        None
    }

    fn n_params(&self) -> usize {
        self.params().len()
    }
}

impl Clone for Box<dyn SpectralFilter> {
    fn clone(&self) -> Self {
        self.boxed_clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotherWavelet {
    MexicanHat,
    Morlet,
}

impl MotherWavelet {
    pub fn value(self, lambda: f64, beta: f64) -> f64 {
        match self {
            MotherWavelet::MexicanHat => mexican_hat_unchecked(lambda, beta),
            MotherWavelet::Morlet => morlet_unchecked(lambda, beta),
        }
    }

    pub fn dbeta(self, lambda: f64, beta: f64) -> f64 {
        match self {
            MotherWavelet::MexicanHat => mexican_hat_dbeta(lambda, beta),
            MotherWavelet::Morlet => morlet_dbeta(lambda, beta),
        }
    }
}

impl fmt::Display for MotherWavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MotherWavelet::MexicanHat => "mexican_hat",
            MotherWavelet::Morlet => "morlet",
        })
    }
}

#[derive(Serialize, Deserialize)]
struct RawFilterSpec {
    mother: MotherWavelet,
    alpha: Option<f64>,
    betas: Vec<f64>,
}

/// A multi-scale filter `g(λ) = h_α(λ) + Σ_l b_{β_l}(λ)`; the low-pass term is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFilterSpec", into = "RawFilterSpec")]
pub struct FilterSpec {
    mother: MotherWavelet,
    low_pass: Option<f64>,
    band_scales: Vec<f64>,
}

impl TryFrom<RawFilterSpec> for FilterSpec {
    type Error = Error;

    fn try_from(raw: RawFilterSpec) -> Result<Self> {
        FilterSpec::new(raw.mother, raw.alpha, raw.betas)
    }
}

impl From<FilterSpec> for RawFilterSpec {
    fn from(spec: FilterSpec) -> Self {
        RawFilterSpec {
            mother: spec.mother,
            alpha: spec.low_pass,
            betas: spec.band_scales,
        }
    }
}

impl FilterSpec {
    pub fn new(mother: MotherWavelet, low_pass: Option<f64>, band_scales: Vec<f64>) -> Result<Self> {
        if let Some(alpha) = low_pass {
            check_scale("alpha", alpha)?;
        }
        for &b in &band_scales {
            check_scale("beta", b)?;
        }
        if low_pass.is_none() && band_scales.is_empty() {
            return Err(Error::invalid("filter needs a low-pass or at least one band-pass"));
        }
        Ok(FilterSpec {
            mother,
            low_pass,
            band_scales,
        })
    }

    pub fn mexican_hat(alpha: f64, betas: &[f64]) -> Result<Self> {
        FilterSpec::new(MotherWavelet::MexicanHat, Some(alpha), betas.to_vec())
    }

    /// The synthetic ground truth: low-pass α = 12 and band-passes at 1.2 and 6.
    pub fn ground_truth() -> Self {
        FilterSpec::mexican_hat(12.0, &[1.2, 6.0]).expect("valid constants")
    }

    pub fn mother(&self) -> MotherWavelet {
        self.mother
    }

    pub fn low_pass(&self) -> Option<f64> {
        self.low_pass
    }

    pub fn band_scales(&self) -> &[f64] {
        &self.band_scales
    }

    pub fn with_mother(&self, mother: MotherWavelet) -> Self {
        FilterSpec { mother, ..self.clone() }
    }

    /// Same structure with new scales, ordered `[α?, β_1, ..., β_L]`.
    pub fn with_scales(&self, scales: &[f64]) -> Result<Self> {
        let offset = usize::from(self.low_pass.is_some());
        if scales.len() != offset + self.band_scales.len() {
            return Err(Error::DimensionMismatch {
                expected: offset + self.band_scales.len(),
                got: scales.len(),
            });
        }
        FilterSpec::new(self.mother, self.low_pass.map(|_| scales[0]), scales[offset..].to_vec())
    }

    pub fn scales(&self) -> Vec<f64> {
        self.low_pass
            .into_iter()
            .chain(self.band_scales.iter().copied())
            .collect()
    }

    pub fn evaluate(&self, lambda: f64) -> f64 {
        let low = self.low_pass.map_or(0.0, |a| low_pass_unchecked(lambda, a));
        low + self
            .band_scales
            .iter()
            .map(|&b| self.mother.value(lambda, b))
            .sum::<f64>()
    }

    /// `[∂g/∂α?, ∂g/∂β_1, ..., ∂g/∂β_L]`.
    pub fn gradient_at(&self, lambda: f64) -> Vec<f64> {
        self.low_pass
            .map(|a| low_pass_dalpha(lambda, a))
            .into_iter()
            .chain(self.band_scales.iter().map(|&b| self.mother.dbeta(lambda, b)))
            .collect()
    }
}

impl SpectralFilter for FilterSpec {
    fn value(&self, lambda: f64) -> f64 {
        self.evaluate(lambda)
    }

    fn gradient(&self, lambda: f64) -> Vec<f64> {
        self.gradient_at(lambda)
    }

    fn params(&self) -> Vec<f64> {
        self.scales()
    }

    fn with_params(&self, params: &[f64]) -> Result<Box<dyn SpectralFilter>> {
        Ok(Box::new(self.with_scales(params)?))
    }

    fn boxed_clone(&self) -> Box<dyn SpectralFilter> {
        Box::new(self.clone())
    }

    fn as_spec(&self) -> Option<&FilterSpec> {
        Some(self)
    }
}

/// `W = U g(Λ) Uᵀ` built from a dense eigendecomposition.
#[derive(Debug, Clone)]
pub struct WaveletMatrix {
    matrix: DMatrix<f64>,
    response: Vec<f64>,
}

impl WaveletMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Filter values at the eigenvalues, in ascending eigenvalue order.
    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }
}

pub fn exact_wavelet_matrix<F: SpectralFilter + ?Sized>(dec: &SpectralDecomposition, filter: &F) -> WaveletMatrix {
    let response: Vec<f64> = dec.eigenvalues().iter().map(|&l| filter.value(l)).collect();
    let mut matrix = dec.spectral_matrix(&response);
    // Round-off asymmetry from the product.
    let t = matrix.transpose();
    matrix += t;
    matrix *= 0.5;
    WaveletMatrix { matrix, response }
}

/// Response of the filter to a unit impulse at `node`: column `node` of `W`.
pub fn impulse_response<F: SpectralFilter + ?Sized>(
    dec: &SpectralDecomposition,
    filter: &F,
    node: usize,
) -> Result<DVector<f64>> {
    let n = dec.dim();
    if node >= n {
        return Err(Error::NodeOutOfRange {
            index: node,
            n_nodes: n,
        });
    }
    let u = dec.eigenvectors();
    let coeffs = DVector::from_iterator(
        n,
        dec.eigenvalues()
            .iter()
            .enumerate()
            .map(|(l, &lam)| filter.value(lam) * u[(node, l)]),
    );
    Ok(u * coeffs)
}
