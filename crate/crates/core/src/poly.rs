//! Polynomial surrogates `p(λ) = γ_0 + γ_1 λ + ... + γ_K λ^K` for spectral
//! filters, and their application to signals through sparse matvecs.
//!
//! Every fitting mode is linear in the filter values: `γ = P g(ξ)` for a
//! fixed projection matrix `P` and abscissae `ξ`. Coefficient gradients
//! with respect to filter parameters follow as `P ∂g(ξ)/∂θ`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{FilterSpec, SpectralFilter};
use crate::graph::NormalizedLaplacian;

/// Largest supported polynomial degree; monomials on `[0, 2]` are
/// ill-conditioned beyond this.
pub const MAX_DEGREE: usize = 8;

/// Gauss–Chebyshev nodes used by [`chebyshev_fit`].
pub const CHEBYSHEV_NODES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ApproxMode {
    #[serde(rename = "uls")]
    UniformLS,
    #[serde(rename = "wls")]
    WeightedLS,
    #[serde(rename = "cheb")]
    Chebyshev,
}

impl fmt::Display for ApproxMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApproxMode::UniformLS => "uls",
            ApproxMode::WeightedLS => "wls",
            ApproxMode::Chebyshev => "cheb",
        })
    }
}

impl FromStr for ApproxMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uls" => Ok(ApproxMode::UniformLS),
            "wls" => Ok(ApproxMode::WeightedLS),
            "cheb" => Ok(ApproxMode::Chebyshev),
            other => Err(Error::invalid(format!("unknown approximation mode {other:?}"))),
        }
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        Err(Error::invalid(format!(
            "polynomial degree {degree} exceeds {MAX_DEGREE}"
        )))
    } else {
        Ok(())
    }
}

/// Rows `(1, ξ_i, ξ_i², ..., ξ_i^K)`.
pub fn vandermonde(points: &[f64], degree: usize) -> Result<DMatrix<f64>> {
    if points.len() < degree + 1 {
        return Err(Error::Underdetermined {
            points: points.len(),
            degree,
        });
    }
    Ok(DMatrix::from_fn(points.len(), degree + 1, |i, k| {
        points[i].powi(k as i32)
    }))
}

/// Linear map from filter values at `sample_points` to monomial coefficients.
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    matrix: DMatrix<f64>,
    sample_points: Vec<f64>,
    weights: Option<Vec<f64>>,
    mode: ApproxMode,
}

impl ProjectionMatrix {
    /// `P = (Vᵀ Ω V)⁻¹ Vᵀ Ω`, with `Ω = I` when `weights` is `None`.
    ///
    /// Solved through a QR factorization of `Ω^{1/2} V`.
    pub fn least_squares(points: &[f64], weights: Option<&[f64]>, degree: usize) -> Result<Self> {
        check_degree(degree)?;
        let v = vandermonde(points, degree)?;
        let s = points.len();
        let sqrt_w: Vec<f64> = match weights {
            Some(w) => {
                if w.len() != s {
                    return Err(Error::DimensionMismatch {
                        expected: s,
                        got: w.len(),
                    });
                }
                if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return Err(Error::invalid("least-squares weights must be strictly positive"));
                }
                w.iter().map(|x| x.sqrt()).collect()
            }
            None => vec![1.0; s],
        };
        let mut distinct = points.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < degree + 1 {
            return Err(Error::RankDeficient);
        }
        let mut a = v;
        for (i, &sw) in sqrt_w.iter().enumerate() {
            a.row_mut(i).scale_mut(sw);
        }
        let qr = a.qr();
        let r = qr.r();
        let diag_max = r.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * diag_max) {
            return Err(Error::RankDeficient);
        }
        let mut rhs = qr.q().transpose();
        for (j, &sw) in sqrt_w.iter().enumerate() {
            rhs.column_mut(j).scale_mut(sw);
        }
        let matrix = r.solve_upper_triangular(&rhs).ok_or(Error::RankDeficient)?;
        Ok(ProjectionMatrix {
            matrix,
            sample_points: points.to_vec(),
            weights: weights.map(<[f64]>::to_vec),
            mode: if weights.is_some() {
                ApproxMode::WeightedLS
            } else {
                ApproxMode::UniformLS
            },
        })
    }

    /// Truncated Chebyshev series on `[0, 2]` from `nodes`-point Gauss–Chebyshev
    /// quadrature, re-expressed in monomials of `λ`.
    pub fn chebyshev(degree: usize, nodes: usize) -> Result<Self> {
        check_degree(degree)?;
        if nodes < degree + 1 {
            return Err(Error::Underdetermined { points: nodes, degree });
        }
        let angles: Vec<f64> = (0..nodes).map(|j| PI * (j as f64 + 0.5) / nodes as f64).collect();
        let series = DMatrix::from_fn(degree + 1, nodes, |k, j| {
            let scale = if k == 0 { 1.0 } else { 2.0 };
            scale * (k as f64 * angles[j]).cos() / nodes as f64
        });
        let matrix = chebyshev_to_monomial(degree) * series;
        Ok(ProjectionMatrix {
            matrix,
            sample_points: angles.iter().map(|a| a.cos() + 1.0).collect(),
            weights: None,
            mode: ApproxMode::Chebyshev,
        })
    }

    pub fn degree(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn mode(&self) -> ApproxMode {
        self.mode
    }

    /// The `(K+1) × S` projection.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn sample_points(&self) -> &[f64] {
        &self.sample_points
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(values))
            .iter()
            .copied()
            .collect()
    }
}

/// Column `k` holds the monomial coefficients (in `λ`) of `T_k(λ - 1)`.
fn chebyshev_to_monomial(degree: usize) -> DMatrix<f64> {
    // Chebyshev polynomials in x by the three-term recurrence.
    let mut cheb_x: Vec<Vec<f64>> = vec![vec![1.0]];
    if degree >= 1 {
        cheb_x.push(vec![0.0, 1.0]);
    }
    for k in 2..=degree {
        let mut next = vec![0.0; k + 1];
        for (i, c) in cheb_x[k - 1].iter().enumerate() {
            next[i + 1] += 2.0 * c;
        }
        for (i, c) in cheb_x[k - 2].iter().enumerate() {
            next[i] -= c;
        }
        cheb_x.push(next);
    }
    let binom = |n: usize, k: usize| -> f64 { (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64) };
    let mut out = DMatrix::zeros(degree + 1, degree + 1);
    for (k, tx) in cheb_x.iter().enumerate() {
        for (i, &c) in tx.iter().enumerate() {
            // x^i = (λ - 1)^i
            for m in 0..=i {
                let sign = if (i - m) % 2 == 0 { 1.0 } else { -1.0 };
                out[(m, k)] += c * binom(i, m) * sign;
            }
        }
    }
    out
}

/// Monomial-coefficient polynomial approximation of a filter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolynomialFilter {
    mode: ApproxMode,
    degree: usize,
    coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spec: Option<FilterSpec>,
}

impl PolynomialFilter {
    pub fn from_coefficients(coefficients: Vec<f64>, mode: ApproxMode) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::invalid("polynomial needs at least one coefficient"));
        }
        Ok(PolynomialFilter {
            mode,
            degree: coefficients.len() - 1,
            coefficients,
            spec: None,
        })
    }

    pub fn mode(&self) -> ApproxMode {
        self.mode
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn spec(&self) -> Option<&FilterSpec> {
        self.spec.as_ref()
    }

    pub fn evaluate(&self, lambda: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * lambda + c)
    }

    /// Mean of `|p(λ) - g(λ)|` over the given eigenvalues.
    pub fn spectral_error<F: SpectralFilter + ?Sized>(&self, filter: &F, eigenvalues: &[f64]) -> f64 {
        if eigenvalues.is_empty() {
            return 0.0;
        }
        let total: f64 = eigenvalues
            .iter()
            .map(|&l| (self.evaluate(l) - filter.value(l)).abs())
            .sum();
        total / eigenvalues.len() as f64
    }
}

fn filter_values<F: SpectralFilter + ?Sized>(filter: &F, points: &[f64]) -> Vec<f64> {
    points.iter().map(|&x| filter.value(x)).collect()
}

/// `γ = P g(ξ)`.
pub fn fit_polynomial<F: SpectralFilter + ?Sized>(filter: &F, proj: &ProjectionMatrix) -> PolynomialFilter {
    PolynomialFilter {
        mode: proj.mode(),
        degree: proj.degree(),
        coefficients: proj.project(&filter_values(filter, proj.sample_points())),
        spec: filter.as_spec().cloned(),
    }
}

/// `∂γ/∂θ = P ∂g(ξ)/∂θ`, shape `(K+1) × n_params`.
pub fn coefficient_gradient<F: SpectralFilter + ?Sized>(filter: &F, proj: &ProjectionMatrix) -> DMatrix<f64> {
    let points = proj.sample_points();
    let n_params = filter.n_params();
    let mut jac = DMatrix::zeros(points.len(), n_params);
    for (i, &x) in points.iter().enumerate() {
        for (j, d) in filter.gradient(x).into_iter().enumerate() {
            jac[(i, j)] = d;
        }
    }
    proj.matrix() * jac
}

/// Degree-`K` truncated Chebyshev approximation in the monomial basis.
pub fn chebyshev_fit<F: SpectralFilter + ?Sized>(filter: &F, degree: usize) -> Result<PolynomialFilter> {
    Ok(fit_polynomial(
        filter,
        &ProjectionMatrix::chebyshev(degree, CHEBYSHEV_NODES)?,
    ))
}

/// `Σ_k γ_k L^k f` accumulated through repeated sparse matvecs.
pub fn apply_polynomial(l: &NormalizedLaplacian, coefficients: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    let n = l.dim();
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    Ok(apply_unchecked(l, coefficients, f))
}

fn apply_unchecked(l: &NormalizedLaplacian, coefficients: &[f64], f: &[f64]) -> Vec<f64> {
    let c0 = coefficients.first().copied().unwrap_or(0.0);
    let mut out: Vec<f64> = f.iter().map(|v| c0 * v).collect();
    let mut power = f.to_vec();
    let mut scratch = vec![0.0; f.len()];
    for &c in coefficients.iter().skip(1) {
        l.apply_into(&power, &mut scratch);
        std::mem::swap(&mut power, &mut scratch);
        for (o, p) in out.iter_mut().zip(&power) {
            *o += c * p;
        }
    }
    out
}

/// [`apply_polynomial`] applied to each column of an `N × m` matrix.
pub fn apply_polynomial_matrix(
    l: &NormalizedLaplacian,
    coefficients: &[f64],
    f: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = l.dim();
    if f.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.nrows(),
        });
    }
    Ok(apply_transposed(l, coefficients, &f.transpose()).transpose())
}

/// `(p(L) X)ᵀ` from `Xᵀ`.
pub(crate) fn apply_transposed(l: &NormalizedLaplacian, coefficients: &[f64], xt: &DMatrix<f64>) -> DMatrix<f64> {
    let c0 = coefficients.first().copied().unwrap_or(0.0);
    let mut out = xt * c0;
    let mut power = xt.clone();
    let mut scratch = DMatrix::zeros(xt.nrows(), xt.ncols());
    for &c in coefficients.iter().skip(1) {
        l.matrix().matmul_transposed_into(&power, &mut scratch);
        std::mem::swap(&mut power, &mut scratch);
        out.zip_apply(&power, |o, p| *o += c * p);
    }
    out
}

/// Transposed powers `(L^k X)ᵀ` for `k = 0..=degree`, from `Xᵀ`.
pub(crate) fn laplacian_powers_transposed(
    l: &NormalizedLaplacian,
    xt: DMatrix<f64>,
    degree: usize,
) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(degree + 1);
    out.push(xt);
    for _ in 0..degree {
        let prev = out.last().unwrap();
        let mut next = DMatrix::zeros(prev.nrows(), prev.ncols());
        l.matrix().matmul_transposed_into(prev, &mut next);
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vandermonde_rows() {
        assert_eq!(vandermonde(&[0.0], 0).unwrap(), DMatrix::from_row_slice(1, 1, &[1.0]));
        let v = vandermonde(&[0.0, 1.0, 2.0], 2).unwrap();
        assert_eq!(
            v,
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0, 4.0])
        );
        assert!(matches!(
            vandermonde(&[0.0, 1.0], 2),
            Err(Error::Underdetermined { points: 2, degree: 2 })
        ));
    }

    #[test]
    fn square_system_interpolates() {
        let xs = [0.0, 0.4, 1.1, 2.0];
        let p = ProjectionMatrix::least_squares(&xs, None, 3).unwrap();
        let g = [0.3, -1.0, 2.0, 0.5];
        let poly = PolynomialFilter::from_coefficients(p.project(&g), ApproxMode::UniformLS).unwrap();
        for (x, y) in xs.iter().zip(g) {
            assert!((poly.evaluate(*x) - y).abs() < 1e-10);
        }
    }

    #[test]
    fn weight_scale_invariance() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64 / 5.5).collect();
        let uniform = ProjectionMatrix::least_squares(&xs, None, 4).unwrap();
        let scaled = ProjectionMatrix::least_squares(&xs, Some(&[7.5; 12]), 4).unwrap();
        assert!((uniform.matrix() - scaled.matrix()).amax() < 1e-10);
    }

    #[test]
    fn rank_deficiency_detected() {
        let xs = [0.5, 0.5, 0.5, 1.0];
        assert!(matches!(
            ProjectionMatrix::least_squares(&xs, None, 2),
            Err(Error::RankDeficient)
        ));
        assert!(ProjectionMatrix::least_squares(&[0.0, 1.0], Some(&[1.0, 0.0]), 1).is_err());
    }

    #[test]
    fn degree_guard() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 14.5).collect();
        assert!(ProjectionMatrix::least_squares(&xs, None, 9).is_err());
        assert!(ProjectionMatrix::chebyshev(9, 200).is_err());
    }

    #[test]
    fn chebyshev_basis_conversion() {
        // T_2(λ - 1) = 2(λ-1)² - 1 = 2λ² - 4λ + 1
        let m = chebyshev_to_monomial(2);
        assert_eq!(m.column(2).as_slice(), &[1.0, -4.0, 2.0]);
    }

    #[test]
    fn apply_identity_and_laplacian() {
        let g = crate::graph::Graph::new(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let l = NormalizedLaplacian::new(&g).unwrap();
        let f = [1.0, -2.0, 0.5];
        assert_eq!(apply_polynomial(&l, &[1.0], &f).unwrap(), f.to_vec());
        assert_eq!(apply_polynomial(&l, &[0.0, 1.0], &f).unwrap(), l.apply(&f));
        assert!(apply_polynomial(&l, &[1.0], &[1.0]).is_err());
    }
}
