#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wavelet_gp::{Graph, NormalizedLaplacian, Result, SpectralDecomposition, SpectralFilter};

/// `g(λ) = c`; its single parameter is `c`.
#[derive(Debug, Clone)]
pub struct ConstantFilter(pub f64);

impl SpectralFilter for ConstantFilter {
    fn value(&self, _: f64) -> f64 {
        self.0
    }
    fn gradient(&self, _: f64) -> Vec<f64> {
        vec![1.0]
    }
    fn params(&self) -> Vec<f64> {
        vec![self.0]
    }
    fn with_params(&self, p: &[f64]) -> Result<Box<dyn SpectralFilter>> {
        Ok(Box::new(ConstantFilter(p[0])))
    }
    fn boxed_clone(&self) -> Box<dyn SpectralFilter> {
        Box::new(self.clone())
    }
}

/// `g(λ) = λ`.
#[derive(Debug, Clone)]
pub struct LinearFilter;

impl SpectralFilter for LinearFilter {
    fn value(&self, l: f64) -> f64 {
        l
    }
    fn gradient(&self, _: f64) -> Vec<f64> {
        vec![]
    }
    fn params(&self) -> Vec<f64> {
        vec![]
    }
    fn with_params(&self, _: &[f64]) -> Result<Box<dyn SpectralFilter>> {
        Ok(Box::new(LinearFilter))
    }
    fn boxed_clone(&self) -> Box<dyn SpectralFilter> {
        Box::new(LinearFilter)
    }
}

/// `g ≡ 0`.
#[derive(Debug, Clone)]
pub struct ZeroFilter;

impl SpectralFilter for ZeroFilter {
    fn value(&self, _: f64) -> f64 {
        0.0
    }
    fn gradient(&self, _: f64) -> Vec<f64> {
        vec![]
    }
    fn params(&self) -> Vec<f64> {
        vec![]
    }
    fn with_params(&self, _: &[f64]) -> Result<Box<dyn SpectralFilter>> {
        Ok(Box::new(ZeroFilter))
    }
    fn boxed_clone(&self) -> Box<dyn SpectralFilter> {
        Box::new(ZeroFilter)
    }
}

/// Connected G(n, p) sample.
pub fn er_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(p) {
                    edges.push((i, j, 1.0));
                }
            }
        }
        if let Ok(g) = Graph::new(n, &edges) {
            if g.is_connected() {
                return g;
            }
        }
    }
}

pub fn decompose(g: &Graph) -> (NormalizedLaplacian, SpectralDecomposition) {
    let l = NormalizedLaplacian::new(g).unwrap();
    let d = l.eigendecompose().unwrap();
    (l, d)
}

pub fn k2() -> Graph {
    Graph::new(2, &[(0, 1, 1.0)]).unwrap()
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    gaussian_matrix(n, 1, rng).column(0).into_owned()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Proptest settings without on-disk regression files.
pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases: n,
        failure_persistence: None,
        ..Default::default()
    }
}

/// `g ≡ 1` with no trainable parameters, so `W = I`.
#[derive(Debug, Clone)]
pub struct IdentityFilter;

impl SpectralFilter for IdentityFilter {
    fn value(&self, _: f64) -> f64 {
        1.0
    }
    fn gradient(&self, _: f64) -> Vec<f64> {
        vec![]
    }
    fn params(&self) -> Vec<f64> {
        vec![]
    }
    fn with_params(&self, _: &[f64]) -> Result<Box<dyn SpectralFilter>> {
        Ok(Box::new(IdentityFilter))
    }
    fn boxed_clone(&self) -> Box<dyn SpectralFilter> {
        Box::new(IdentityFilter)
    }
}

pub fn exact_kernel(
    dec: &SpectralDecomposition,
    filter: impl SpectralFilter + 'static,
    feature: wavelet_gp::gp::FeatureKernel,
) -> wavelet_gp::gp::WaveletKernel {
    use std::sync::Arc;
    use wavelet_gp::gp::{WaveletKernel, WaveletOperator};
    WaveletKernel::new(WaveletOperator::Exact(Arc::new(dec.clone())), Box::new(filter), feature).unwrap()
}

pub fn poly_kernel(
    l: &NormalizedLaplacian,
    projection: wavelet_gp::poly::ProjectionMatrix,
    filter: impl SpectralFilter + 'static,
    feature: wavelet_gp::gp::FeatureKernel,
) -> wavelet_gp::gp::WaveletKernel {
    use std::sync::Arc;
    use wavelet_gp::gp::{WaveletKernel, WaveletOperator};
    let op = WaveletOperator::Polynomial {
        laplacian: Arc::new(l.clone()),
        projection: Arc::new(projection),
    };
    WaveletKernel::new(op, Box::new(filter), feature).unwrap()
}

/// Fixed polynomial response, exactly representable by degree-K fits.
#[derive(Debug, Clone)]
pub struct PolyTarget(pub wavelet_gp::poly::PolynomialFilter);

impl SpectralFilter for PolyTarget {
    fn value(&self, l: f64) -> f64 {
        self.0.evaluate(l)
    }
    fn gradient(&self, _: f64) -> Vec<f64> {
        vec![]
    }
    fn params(&self) -> Vec<f64> {
        vec![]
    }
    fn with_params(&self, _: &[f64]) -> Result<Box<dyn SpectralFilter>> {
        Ok(Box::new(self.clone()))
    }
    fn boxed_clone(&self) -> Box<dyn SpectralFilter> {
        Box::new(self.clone())
    }
}
