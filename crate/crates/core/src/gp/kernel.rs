//! The filtered covariance `C = W K Wᵀ` and its parameter gradients.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::filters::SpectralFilter;
use crate::graph::{NormalizedLaplacian, SpectralDecomposition};
use crate::poly::{apply_transposed, coefficient_gradient, laplacian_powers_transposed, ProjectionMatrix};

/// Covariance of the unfiltered node signal.
#[derive(Debug, Clone)]
pub enum FeatureKernel {
    /// `K = I`; no parameters.
    Identity,
    /// `K_ij = variance · (x_iᵀ x_j + offset)^degree`. The offset is
    /// trainable only when it starts strictly positive.
    Polynomial {
        degree: u32,
        variance: f64,
        offset: f64,
        gram: Arc<DMatrix<f64>>,
    },
}

#[derive(Serialize)]
struct FeatureKernelSummary {
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    degree: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    offset: Option<f64>,
}

impl Serialize for FeatureKernel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let summary = match self {
            FeatureKernel::Identity => FeatureKernelSummary {
                kind: "identity",
                degree: None,
                variance: None,
                offset: None,
            },
            FeatureKernel::Polynomial {
                degree,
                variance,
                offset,
                ..
            } => FeatureKernelSummary {
                kind: "polynomial",
                degree: Some(*degree),
                variance: Some(*variance),
                offset: Some(*offset),
            },
        };
        summary.serialize(s)
    }
}

impl FeatureKernel {
    /// Polynomial kernel over the rows of `features`.
    pub fn polynomial(features: &DMatrix<f64>, degree: u32, variance: f64, offset: f64) -> Result<Self> {
        if degree < 1 {
            return Err(Error::invalid("polynomial kernel degree must be at least 1"));
        }
        if !(variance > 0.0) {
            return Err(Error::invalid("polynomial kernel variance must be positive"));
        }
        if !(offset >= 0.0) {
            return Err(Error::invalid("polynomial kernel offset must be nonnegative"));
        }
        Ok(FeatureKernel::Polynomial {
            degree,
            variance,
            offset,
            gram: Arc::new(features * features.transpose()),
        })
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            FeatureKernel::Identity => vec![],
            FeatureKernel::Polynomial { variance, offset, .. } => {
                if *offset > 0.0 {
                    vec![*variance, *offset]
                } else {
                    vec![*variance]
                }
            }
        }
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        let expected = self.params().len();
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: params.len(),
            });
        }
        Ok(match self {
            FeatureKernel::Identity => FeatureKernel::Identity,
            FeatureKernel::Polynomial {
                degree, offset, gram, ..
            } => FeatureKernel::Polynomial {
                degree: *degree,
                variance: params[0],
                offset: if expected == 2 { params[1] } else { *offset },
                gram: Arc::clone(gram),
            },
        })
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, FeatureKernel::Identity)
    }

    /// Full Gram matrix over `n` nodes.
    pub fn gram(&self, n: usize) -> DMatrix<f64> {
        match self {
            FeatureKernel::Identity => DMatrix::identity(n, n),
            FeatureKernel::Polynomial {
                degree,
                variance,
                offset,
                gram,
            } => gram.map(|g| variance * (g + offset).powi(*degree as i32)),
        }
    }

    /// `Σ_ij F_ij ∂K_ij/∂ψ` for each parameter.
    fn contract_gradient(&self, f: &DMatrix<f64>) -> Vec<f64> {
        match self {
            FeatureKernel::Identity => vec![],
            FeatureKernel::Polynomial {
                degree,
                variance,
                offset,
                gram,
            } => {
                let d = *degree as i32;
                let mut dvar = 0.0;
                let mut doff = 0.0;
                for (fij, gij) in f.iter().zip(gram.iter()) {
                    let base = gij + offset;
                    let pow_lower = base.powi(d - 1);
                    dvar += fij * pow_lower * base;
                    doff += fij * variance * d as f64 * pow_lower;
                }
                if *offset > 0.0 {
                    vec![dvar, doff]
                } else {
                    vec![dvar]
                }
            }
        }
    }
}

/// How the filter matrix `W` is realized.
#[derive(Debug, Clone)]
pub enum WaveletOperator {
    /// `W = U g(Λ) Uᵀ`.
    Exact(Arc<SpectralDecomposition>),
    /// `W = Σ_k γ_k L^k`, with `γ = P g(ξ)`.
    Polynomial {
        laplacian: Arc<NormalizedLaplacian>,
        projection: Arc<ProjectionMatrix>,
    },
}

impl WaveletOperator {
    pub fn dim(&self) -> usize {
        match self {
            WaveletOperator::Exact(dec) => dec.dim(),
            WaveletOperator::Polynomial { laplacian, .. } => laplacian.dim(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, WaveletOperator::Exact(_))
    }
}

/// The node covariance `C = W K W` for a filter, operator and feature kernel.
///
/// Parameters are ordered filter parameters first, then feature-kernel
/// parameters; all are positive and handled in natural (not log) scale.
#[derive(Debug, Clone)]
pub struct WaveletKernel {
    operator: WaveletOperator,
    filter: Box<dyn SpectralFilter>,
    feature: FeatureKernel,
}

impl WaveletKernel {
    pub fn new(operator: WaveletOperator, filter: Box<dyn SpectralFilter>, feature: FeatureKernel) -> Result<Self> {
        if let FeatureKernel::Polynomial { gram, .. } = &feature {
            if gram.nrows() != operator.dim() {
                return Err(Error::DimensionMismatch {
                    expected: operator.dim(),
                    got: gram.nrows(),
                });
            }
        }
        Ok(WaveletKernel {
            operator,
            filter,
            feature,
        })
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn operator(&self) -> &WaveletOperator {
        &self.operator
    }

    pub fn filter(&self) -> &dyn SpectralFilter {
        self.filter.as_ref()
    }

    pub fn feature(&self) -> &FeatureKernel {
        &self.feature
    }

    pub fn n_params(&self) -> usize {
        self.filter.n_params() + self.feature.params().len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.filter.params();
        p.extend(self.feature.params());
        p
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: params.len(),
            });
        }
        let nf = self.filter.n_params();
        Ok(WaveletKernel {
            operator: self.operator.clone(),
            filter: self.filter.with_params(&params[..nf])?,
            feature: self.feature.with_params(&params[nf..])?,
        })
    }

    fn check_indices(&self, idx: &[usize]) -> Result<()> {
        let n = self.dim();
        match idx.iter().find(|&&i| i >= n) {
            Some(&index) => Err(Error::NodeOutOfRange { index, n_nodes: n }),
            None => Ok(()),
        }
    }

    /// Filter coefficients of the polynomial mode.
    pub fn polynomial_coefficients(&self) -> Option<Vec<f64>> {
        match &self.operator {
            WaveletOperator::Polynomial { projection, .. } => {
                let values: Vec<f64> = projection
                    .sample_points()
                    .iter()
                    .map(|&x| self.filter.value(x))
                    .collect();
                Some(projection.project(&values))
            }
            WaveletOperator::Exact(_) => None,
        }
    }

    /// Rows `W[idx, :]` (equal to `W[:, idx]ᵀ`), a `|idx| × N` matrix.
    fn rows(&self, idx: &[usize]) -> Result<DMatrix<f64>> {
        self.check_indices(idx)?;
        let n = self.dim();
        match &self.operator {
            WaveletOperator::Exact(dec) => {
                let mut scaled = spectral_rows(dec, idx);
                for (l, &lambda) in dec.eigenvalues().iter().enumerate() {
                    scaled.column_mut(l).scale_mut(self.filter.value(lambda));
                }
                Ok(scaled * dec.eigenvectors().transpose())
            }
            WaveletOperator::Polynomial { laplacian, .. } => {
                let coeffs = self.polynomial_coefficients().expect("polynomial mode");
                let mut et = DMatrix::zeros(idx.len(), n);
                for (t, &i) in idx.iter().enumerate() {
                    et[(t, i)] = 1.0;
                }
                Ok(apply_transposed(laplacian, &coeffs, &et))
            }
        }
    }

    /// Columns `W[:, idx]`, an `N × |idx|` matrix.
    pub fn wavelet_columns(&self, idx: &[usize]) -> Result<DMatrix<f64>> {
        Ok(self.rows(idx)?.transpose())
    }

    /// Full filter matrix `W`.
    pub fn wavelet_matrix(&self) -> Result<DMatrix<f64>> {
        let all: Vec<usize> = (0..self.dim()).collect();
        self.wavelet_columns(&all)
    }

    /// Exact operator with `K = I`: `C_TT = U_T g² U_Tᵀ` costs `O(N t²)`.
    fn exact_identity(&self) -> Option<&SpectralDecomposition> {
        match (&self.operator, &self.feature) {
            (WaveletOperator::Exact(dec), FeatureKernel::Identity) => Some(dec),
            _ => None,
        }
    }

    /// `C[idx, idx]`, symmetrized.
    pub fn covariance(&self, idx: &[usize]) -> Result<DMatrix<f64>> {
        Ok(self.covariance_parts(idx)?.0)
    }

    /// Covariance plus the `W[idx, :]` block it was built from, when one was needed.
    pub(crate) fn covariance_parts(&self, idx: &[usize]) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>)> {
        if let Some(dec) = self.exact_identity() {
            self.check_indices(idx)?;
            let ut = spectral_rows(dec, idx);
            let mut scaled = ut.clone();
            for (l, &lambda) in dec.eigenvalues().iter().enumerate() {
                let g = self.filter.value(lambda);
                scaled.column_mut(l).scale_mut(g * g);
            }
            let mut c = scaled * ut.transpose();
            super::linalg::symmetrize(&mut c);
            return Ok((c, None));
        }
        let wt = self.rows(idx)?;
        let mut c = match &self.feature {
            FeatureKernel::Identity => &wt * wt.transpose(),
            other => (&wt * other.gram(self.dim())) * wt.transpose(),
        };
        super::linalg::symmetrize(&mut c);
        Ok((c, Some(wt)))
    }

    /// Gradient of `Σ_ij adjoint_ij C[idx, idx]_ij` with respect to [`params`](Self::params).
    pub fn contract_gradient(&self, idx: &[usize], adjoint: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.contract_gradient_with(idx, adjoint, None)
    }

    /// As [`contract_gradient`](Self::contract_gradient), reusing `W[idx, :]` when given.
    pub(crate) fn contract_gradient_with(
        &self,
        idx: &[usize],
        adjoint: &DMatrix<f64>,
        rows: Option<DMatrix<f64>>,
    ) -> Result<Vec<f64>> {
        let t = idx.len();
        if adjoint.nrows() != t || adjoint.ncols() != t {
            return Err(Error::DimensionMismatch {
                expected: t,
                got: adjoint.nrows(),
            });
        }
        self.check_indices(idx)?;
        let mut a = adjoint.clone();
        super::linalg::symmetrize(&mut a);
        if let Some(dec) = self.exact_identity() {
            let ut = spectral_rows(dec, idx);
            let p = &a * &ut;
            let mut grad = vec![0.0; self.filter.n_params()];
            for (l, &lambda) in dec.eigenvalues().iter().enumerate() {
                let d = self.filter.value(lambda) * ut.column(l).dot(&p.column(l));
                for (gj, dg) in grad.iter_mut().zip(self.filter.gradient(lambda)) {
                    *gj += 2.0 * dg * d;
                }
            }
            return Ok(grad);
        }
        let n = self.dim();
        let wt = match rows {
            Some(w) => w,
            None => self.rows(idx)?,
        };
        let gram = (!self.feature.is_identity()).then(|| self.feature.gram(n));
        // (W_T A)ᵀ and Bᵀ = (K W_T A)ᵀ
        let awt = &a * &wt;
        let bt = match &gram {
            Some(k) => &awt * k,
            None => awt.clone(),
        };
        let mut grad = match &self.operator {
            WaveletOperator::Exact(dec) => {
                let u = dec.eigenvectors();
                let ut = spectral_rows(dec, idx);
                let btu = &bt * u;
                let mut grad = vec![0.0; self.filter.n_params()];
                for (l, &lambda) in dec.eigenvalues().iter().enumerate() {
                    let d = ut.column(l).dot(&btu.column(l));
                    for (gj, dg) in grad.iter_mut().zip(self.filter.gradient(lambda)) {
                        *gj += 2.0 * dg * d;
                    }
                }
                grad
            }
            WaveletOperator::Polynomial { laplacian, projection } => {
                let jac = coefficient_gradient(self.filter.as_ref(), projection);
                let powers = laplacian_powers_transposed(laplacian, bt, projection.degree());
                let traces: Vec<f64> = powers.iter().map(|p| (0..t).map(|s| p[(s, idx[s])]).sum()).collect();
                (0..jac.ncols())
                    .map(|j| 2.0 * (0..jac.nrows()).map(|k| jac[(k, j)] * traces[k]).sum::<f64>())
                    .collect()
            }
        };
        if gram.is_some() {
            let f = wt.tr_mul(&awt);
            grad.extend(self.feature.contract_gradient(&f));
        }
        Ok(grad)
    }
}

fn spectral_rows(dec: &SpectralDecomposition, idx: &[usize]) -> DMatrix<f64> {
    let u = dec.eigenvectors();
    DMatrix::from_fn(idx.len(), dec.dim(), |t, l| u[(idx[t], l)])
}
