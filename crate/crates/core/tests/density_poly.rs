mod common;

use common::*;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wavelet_gp::density::{estimate_trace, exact_cdf, sample_grid, DensityConfig, DensityEstimate, JacksonChebStep};
use wavelet_gp::poly::{
    apply_polynomial, apply_polynomial_matrix, chebyshev_fit, coefficient_gradient, fit_polynomial, ApproxMode,
    PolynomialFilter, ProjectionMatrix,
};
use wavelet_gp::{FilterSpec, Graph, MotherWavelet, NormalizedLaplacian, SpectralFilter};

fn k3() -> Graph {
    Graph::new(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
}

fn cfg(samples: usize, probes: usize, degree: usize, seed: u64) -> DensityConfig {
    DensityConfig {
        samples,
        probes,
        degree,
        seed,
    }
}

#[derive(Debug, Clone)]
struct Cubic;

impl SpectralFilter for Cubic {
    fn value(&self, l: f64) -> f64 {
        l * l * l
    }
    fn gradient(&self, _: f64) -> Vec<f64> {
        vec![]
    }
    fn params(&self) -> Vec<f64> {
        vec![]
    }
    fn with_params(&self, _: &[f64]) -> wavelet_gp::Result<Box<dyn SpectralFilter>> {
        Ok(Box::new(Cubic))
    }
    fn boxed_clone(&self) -> Box<dyn SpectralFilter> {
        Box::new(Cubic)
    }
}

#[test]
fn jackson_step_midpoint() {
    for xi in [0.5, 1.0, 1.5] {
        let s = JacksonChebStep::new(xi, 100).unwrap();
        assert!((s.evaluate(xi) - 0.5).abs() < 0.05, "{xi}: {}", s.evaluate(xi));
    }
    assert!(JacksonChebStep::new(1.0, 0).is_err());
    assert!(JacksonChebStep::new(2.5, 10).is_err());
}

#[test]
fn k3_cdf_and_weights() {
    let l = NormalizedLaplacian::new(&k3()).unwrap();
    let est = DensityEstimate::estimate(&l, cfg(20, 2000, 100, 1)).unwrap();
    assert!((est.cdf(0.75) - 1.0 / 3.0).abs() < 0.1, "{}", est.cdf(0.75));
    assert!((est.cdf(2.0) - 1.0).abs() < 0.05);
    let pts = est.sample_points();
    let w = est.weights();
    let mid = (0..pts.len())
        .min_by(|&a, &b| (pts[a] - 0.75).abs().total_cmp(&(pts[b] - 0.75).abs()))
        .unwrap();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    assert!(w[mid] < mean);
    let near_zero = w[0].max(w[1]);
    let near_peak = (0..pts.len())
        .filter(|&i| (pts[i] - 1.5).abs() < 0.2)
        .map(|i| w[i])
        .fold(0.0, f64::max);
    assert!(near_zero > w[mid] && near_peak > w[mid]);
}

#[test]
fn er20_cdf_close_to_exact() {
    let g = er_graph(20, 0.25, 4);
    let (l, d) = decompose(&g);
    let est = DensityEstimate::estimate(&l, cfg(30, 5000, 150, 0)).unwrap();
    let ev: Vec<f64> = d.eigenvalues().iter().copied().collect();
    let mae = est
        .sample_points()
        .iter()
        .zip(est.cdf_values())
        .map(|(&x, &c)| (c - exact_cdf(&ev, x)).abs())
        .sum::<f64>()
        / 30.0;
    assert!(mae <= 0.05, "mae {mae}");
}

#[test]
fn trace_examples_and_reproducibility() {
    let diag = [1.0, 2.0, 3.0];
    let apply = |x: &[f64]| x.iter().zip(&diag).map(|(a, d)| a * d).collect::<Vec<_>>();
    let t = estimate_trace(apply, 3, 10_000, 9).unwrap();
    assert!((t - 6.0).abs() <= 0.3);
    let again = estimate_trace(apply, 3, 10_000, 9).unwrap();
    assert_eq!(t.to_bits(), again.to_bits());
    let zero = estimate_trace(|x: &[f64]| vec![0.0; x.len()], 3, 17, 0).unwrap();
    assert_eq!(zero, 0.0);
    let id = estimate_trace(|x: &[f64]| x.to_vec(), 3, 10_000, 1).unwrap();
    assert!((id - 3.0).abs() <= 0.2);
}

#[test]
fn cubic_recovered_by_least_squares_and_chebyshev() {
    let grid = sample_grid(30);
    let p = ProjectionMatrix::least_squares(&grid, None, 3).unwrap();
    let fit = fit_polynomial(&Cubic, &p);
    for (c, e) in fit.coefficients().iter().zip([0.0, 0.0, 0.0, 1.0]) {
        assert!((c - e).abs() < 1e-8);
    }
    let cheb = chebyshev_fit(&Cubic, 5).unwrap();
    for (c, e) in cheb.coefficients().iter().zip([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]) {
        assert!((c - e).abs() < 1e-8, "{:?}", cheb.coefficients());
    }
    let lin = chebyshev_fit(&LinearFilter, 3).unwrap();
    assert!((lin.coefficients()[1] - 1.0).abs() < 1e-10 && lin.coefficients()[0].abs() < 1e-10);
    let c = chebyshev_fit(&ConstantFilter(2.5), 4).unwrap();
    assert!((c.coefficients()[0] - 2.5).abs() < 1e-10);
    assert!(c.coefficients()[1..].iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn higher_degree_fits_mexican_hat_better() {
    let spec = FilterSpec::new(MotherWavelet::MexicanHat, None, vec![1.2]).unwrap();
    let grid = sample_grid(30);
    let residual = |k| {
        let p = fit_polynomial(&spec, &ProjectionMatrix::least_squares(&grid, None, k).unwrap());
        grid.iter()
            .map(|&x| (p.evaluate(x) - spec.evaluate(x)).abs())
            .fold(0.0, f64::max)
    };
    assert!(residual(5) < residual(3));
    let uls = fit_polynomial(&spec, &ProjectionMatrix::least_squares(&grid, None, 5).unwrap());
    let cheb = chebyshev_fit(&spec, 5).unwrap();
    let max_err = |p: &PolynomialFilter| {
        grid.iter()
            .map(|&x| (p.evaluate(x) - spec.evaluate(x)).abs())
            .fold(0.0, f64::max)
    };
    println!(
        "max error on the uniform grid: uls {:.3e}, cheb {:.3e}",
        max_err(&uls),
        max_err(&cheb)
    );
}

#[test]
fn coefficient_gradient_matches_differences() {
    let spec = FilterSpec::ground_truth();
    let proj = ProjectionMatrix::least_squares(&sample_grid(30), None, 5).unwrap();
    let jac = coefficient_gradient(&spec, &proj);
    let scales = spec.scales();
    for k in 0..scales.len() {
        let h = 1e-5 * scales[k];
        let mut up = scales.clone();
        let mut down = scales.clone();
        up[k] += h;
        down[k] -= h;
        let cu = fit_polynomial(&spec.with_scales(&up).unwrap(), &proj);
        let cd = fit_polynomial(&spec.with_scales(&down).unwrap(), &proj);
        for j in 0..6 {
            let fd = (cu.coefficients()[j] - cd.coefficients()[j]) / (2.0 * h);
            assert!(
                (fd - jac[(j, k)]).abs() <= 1e-5 * fd.abs().max(jac[(j, k)].abs()) + 1e-9,
                "coef {j} param {k}: {fd} vs {}",
                jac[(j, k)]
            );
        }
    }
}

#[test]
fn polynomial_application_on_50_nodes() {
    let g = er_graph(50, 0.1, 8);
    let (l, d) = decompose(&g);
    let coeffs = [0.7, -1.3, 0.4, 0.9, -0.2, 0.05];
    let p = PolynomialFilter::from_coefficients(coeffs.to_vec(), ApproxMode::UniformLS).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = gaussian_vector(50, &mut rng);
    let fast = DVector::from_vec(apply_polynomial(&l, &coeffs, f.as_slice()).unwrap());
    let response: Vec<f64> = d.eigenvalues().iter().map(|&x| p.evaluate(x)).collect();
    let dense = d.spectral_matrix(&response) * &f;
    assert!((&fast - &dense).norm() <= 1e-8 * dense.norm());
    let x = gaussian_matrix(50, 4, &mut rng);
    let many = apply_polynomial_matrix(&l, &coeffs, &x).unwrap();
    for c in 0..4 {
        let col: Vec<f64> = x.column(c).iter().copied().collect();
        let single = apply_polynomial(&l, &coeffs, &col).unwrap();
        for (a, b) in many.column(c).iter().zip(&single) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    assert!(apply_polynomial(&l, &coeffs, &[1.0; 3]).is_err());
}

fn any_spec() -> impl Strategy<Value = FilterSpec> {
    (0.5f64..20.0, prop::collection::vec(0.2f64..8.0, 0..3), prop::bool::ANY).prop_map(|(a, b, morlet)| {
        let m = if morlet {
            MotherWavelet::Morlet
        } else {
            MotherWavelet::MexicanHat
        };
        FilterSpec::new(m, Some(a), b).unwrap()
    })
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn cdf_estimates_monotone_and_bounded(n in 6usize..30, p in 0.2f64..0.7, gseed in any::<u64>(), seed in any::<u64>()) {
        let g = er_graph(n, p, gseed);
        let l = NormalizedLaplacian::new(&g).unwrap();
        let est = DensityEstimate::estimate(&l, cfg(30, 20, 60, seed)).unwrap();
        let c = est.cdf_values();
        prop_assert!(c.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(c[0] >= 0.0 && *c.last().unwrap() <= 1.0 + 1e-6);
        let w = est.weights();
        prop_assert!(w.iter().all(|&v| v > 0.0));
        prop_assert!((w.iter().sum::<f64>() - 30.0).abs() < 1e-9);
    }

    #[test]
    fn polynomials_fitted_exactly(coeffs in prop::collection::vec(-3.0f64..3.0, 1..6), extra in 0usize..3) {
        let k = coeffs.len() - 1 + extra;
        let target = PolyTarget(PolynomialFilter::from_coefficients(coeffs.clone(), ApproxMode::UniformLS).unwrap());
        let grid = sample_grid(30);
        let uls = fit_polynomial(&target, &ProjectionMatrix::least_squares(&grid, None, k).unwrap());
        let cheb = chebyshev_fit(&target, k).unwrap();
        for j in 0..=k {
            let e = coeffs.get(j).copied().unwrap_or(0.0);
            prop_assert!((uls.coefficients()[j] - e).abs() <= 1e-8);
            prop_assert!((cheb.coefficients()[j] - e).abs() <= 1e-8);
        }
    }

    #[test]
    fn weighted_fit_minimizes_weighted_residual(spec in any_spec(), gseed in any::<u64>(), k in 2usize..6) {
        let g = er_graph(40, 0.15, gseed);
        let l = NormalizedLaplacian::new(&g).unwrap();
        let est = DensityEstimate::estimate(&l, cfg(30, 30, 60, 0)).unwrap();
        let grid = est.sample_points();
        let w = est.weights();
        let wls = fit_polynomial(&spec, &ProjectionMatrix::least_squares(grid, Some(w), k).unwrap());
        let uls = fit_polynomial(&spec, &ProjectionMatrix::least_squares(grid, None, k).unwrap());
        let cost = |p: &PolynomialFilter| grid.iter().zip(w).map(|(&x, &wi)| wi * (p.evaluate(x) - spec.evaluate(x)).powi(2)).sum::<f64>();
        prop_assert!(cost(&wls) <= cost(&uls) * (1.0 + 1e-9) + 1e-15);
    }

    #[test]
    fn polynomial_application_matches_spectral(n in 5usize..120, p in 0.05f64..0.5, gseed in any::<u64>(),
                                               coeffs in prop::collection::vec(-2.0f64..2.0, 1..6)) {
        let g = er_graph(n, p, gseed);
        let (l, d) = decompose(&g);
        let poly = PolynomialFilter::from_coefficients(coeffs.clone(), ApproxMode::UniformLS).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(gseed ^ 1);
        let f = gaussian_vector(n, &mut rng);
        let fast = DVector::from_vec(apply_polynomial(&l, &coeffs, f.as_slice()).unwrap());
        let response: Vec<f64> = d.eigenvalues().iter().map(|&x| poly.evaluate(x)).collect();
        let dense = d.spectral_matrix(&response) * &f;
        prop_assert!((&fast - &dense).norm() <= 1e-8 * dense.norm().max(1e-12));
    }
}
