mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wavelet_gp::filters::{exact_wavelet_matrix, impulse_response, low_pass, mexican_hat, morlet};
use wavelet_gp::{FilterSpec, MotherWavelet, NormalizedLaplacian, SpectralFilter};

#[test]
fn er20_reconstruction() {
    let g = er_graph(20, 0.3, 7);
    let (l, d) = decompose(&g);
    let u = d.eigenvectors();
    let rebuilt = d.spectral_matrix(d.eigenvalues().as_slice());
    assert!(max_abs(&(rebuilt - l.to_dense())) <= 1e-8 * 20.0);
    assert!(max_abs(&(u.transpose() * u - DMatrix::identity(20, 20))) <= 1e-8);
    let ev = d.eigenvalues();
    assert!(
        ev[0].abs() < 1e-8 && ev[1] > 1e-8,
        "connected graph has a single zero eigenvalue"
    );
}

#[test]
fn k2_low_pass_matrix() {
    let (_, d) = decompose(&k2());
    let spec = FilterSpec::new(MotherWavelet::MexicanHat, Some(1.0), vec![]).unwrap();
    let w = exact_wavelet_matrix(&d, &spec);
    assert!((w.response()[0] - 1.0).abs() < 1e-12);
    assert!((w.response()[1] - 1.0 / 3.0).abs() < 1e-12);
    let col = impulse_response(&d, &spec, 0).unwrap();
    assert!((col[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((col[1] - 1.0 / 3.0).abs() < 1e-12);
    assert!(impulse_response(&d, &spec, 2).is_err());
}

#[test]
fn diagnostic_filters_reproduce_identity_and_laplacian() {
    let g = er_graph(15, 0.3, 1);
    let (l, d) = decompose(&g);
    let w1 = exact_wavelet_matrix(&d, &ConstantFilter(1.0));
    assert!(max_abs(&(w1.matrix() - DMatrix::identity(15, 15))) < 1e-10);
    let wl = exact_wavelet_matrix(&d, &LinearFilter);
    assert!(max_abs(&(wl.matrix() - l.to_dense())) < 1e-10);
    let delta = impulse_response(&d, &ConstantFilter(1.0), 4).unwrap();
    for (i, v) in delta.iter().enumerate() {
        assert!((v - f64::from(i == 4)).abs() < 1e-12);
    }
}

#[test]
fn impulse_energy_matches_parseval() {
    let g = er_graph(25, 0.2, 3);
    let (_, d) = decompose(&g);
    let spec = FilterSpec::ground_truth();
    for node in [0, 7, 24] {
        let r = impulse_response(&d, &spec, node).unwrap();
        let spectral: f64 = d
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(l, &lam)| (spec.value(lam) * d.eigenvectors()[(node, l)]).powi(2))
            .sum();
        assert!(rel_err(r.norm_squared(), spectral) < 1e-10);
    }
}

#[test]
fn band_pass_impulse_is_localized() {
    // Path graph: response mass should fall off with hop distance.
    let n = 30;
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    let g = wavelet_gp::Graph::new(n, &edges).unwrap();
    let (_, d) = decompose(&g);
    let spec = FilterSpec::new(MotherWavelet::MexicanHat, None, vec![0.5]).unwrap();
    let r = impulse_response(&d, &spec, 15).unwrap();
    let near: f64 = (13..=17).map(|i| r[i].abs()).sum();
    let far: f64 = (0..5).chain(25..30).map(|i| r[i].abs()).sum();
    assert!(near > 10.0 * far, "near {near} far {far}");
}

#[test]
fn scale_derivatives_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    use rand::Rng;
    for _ in 0..50 {
        let mother = if rng.random_bool(0.5) {
            MotherWavelet::MexicanHat
        } else {
            MotherWavelet::Morlet
        };
        let alpha = rng.random_range(0.2..20.0);
        let betas: Vec<f64> = (0..rng.random_range(0..4))
            .map(|_| rng.random_range(0.1..8.0))
            .collect();
        let spec = FilterSpec::new(mother, Some(alpha), betas).unwrap();
        let lambda = rng.random_range(0.0..2.0);
        let grad = spec.gradient_at(lambda);
        let scales = spec.scales();
        for (k, &gk) in grad.iter().enumerate() {
            let h = 1e-5;
            let mut up = scales.clone();
            let mut down = scales.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (spec.with_scales(&up).unwrap().evaluate(lambda)
                - spec.with_scales(&down).unwrap().evaluate(lambda))
                / (2.0 * h);
            assert!(
                (fd - gk).abs() <= 1e-6 * fd.abs().max(gk.abs()) + 1e-9,
                "{spec:?} at {lambda}: param {k} analytic {gk} numeric {fd}"
            );
        }
    }
}

#[test]
fn mexican_hat_scale_derivative_at_generic_point() {
    let spec = FilterSpec::new(MotherWavelet::MexicanHat, None, vec![1.3]).unwrap();
    let g = spec.gradient_at(1.3)[0];
    let h = 1e-5;
    let fd = (mexican_hat(1.3, 1.3 + h).unwrap() - mexican_hat(1.3, 1.3 - h).unwrap()) / (2.0 * h);
    assert!(rel_err(g, fd) < 1e-6);
}

fn connected_graph() -> impl Strategy<Value = wavelet_gp::Graph> {
    (5usize..40, 0.15f64..0.8, any::<u64>()).prop_map(|(n, p, s)| er_graph(n, p, s))
}

fn filter_spec() -> impl Strategy<Value = FilterSpec> {
    (
        prop::bool::ANY,
        prop::option::of(0.05f64..30.0),
        prop::collection::vec(0.05f64..10.0, 0..4),
    )
        .prop_filter_map("needs a term", |(morlet, alpha, betas)| {
            let mother = if morlet {
                MotherWavelet::Morlet
            } else {
                MotherWavelet::MexicanHat
            };
            FilterSpec::new(mother, alpha, betas).ok()
        })
}

proptest! {
    #![proptest_config(cases(32))]

    #[test]
    fn laplacian_spectrum_in_bounds(g in connected_graph()) {
        let (l, d) = decompose(&g);
        let n = g.n_nodes();
        let ev = d.eigenvalues();
        prop_assert!(ev[0] >= -1e-8 && ev[n - 1] <= 2.0 + 1e-8);
        let rebuilt = d.spectral_matrix(ev.as_slice());
        prop_assert!(max_abs(&(rebuilt - l.to_dense())) <= 1e-8 * n as f64);
        prop_assert!(l.matrix().is_symmetric(0.0));
        for i in 0..n {
            prop_assert!((l.matrix().get(i, i) - 1.0).abs() < 1e-15);
            prop_assert!((g.adjacency().row_sum(i) - g.degrees()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_energy_is_spectral_sum(g in connected_graph(), seed in any::<u64>()) {
        let (l, d) = decompose(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = gaussian_vector(g.n_nodes(), &mut rng);
        let e = l.dirichlet_energy(f.as_slice()).unwrap();
        let c = d.fourier(&f);
        let s: f64 = c.iter().zip(d.eigenvalues().iter()).map(|(c, l)| l * c * c).sum();
        prop_assert!(e >= -1e-10);
        prop_assert!(rel_err(e, s) < 1e-8);
        let sqrt_d = DVector::from_iterator(g.n_nodes(), g.degrees().iter().map(|d| d.sqrt()));
        prop_assert!(l.dirichlet_energy(sqrt_d.as_slice()).unwrap().abs() < 1e-10);
    }

    #[test]
    fn combined_filter_nonnegative(spec in filter_spec(), lambda in 0.0f64..2.0) {
        prop_assert!(spec.evaluate(lambda) >= 0.0);
    }

    #[test]
    fn wavelet_matrix_symmetric_psd(g in connected_graph(), spec in filter_spec()) {
        let (_, d) = decompose(&g);
        let w = exact_wavelet_matrix(&d, &spec);
        let m = w.matrix();
        prop_assert!(max_abs(&(m - m.transpose())) <= 1e-10);
        let min = m.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min >= -1e-8);
    }

    #[test]
    fn mexican_hat_dilation(lambda in 0.0f64..2.0, beta in 0.01f64..20.0) {
        let a = mexican_hat(lambda, beta).unwrap();
        let b = mexican_hat(lambda / beta, 1.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300) + 1e-300);
    }

    #[test]
    fn morlet_is_symmetric_about_its_center(beta in 0.05f64..10.0, t in 0.0f64..2.0) {
        let d = t * beta;
        let a = morlet(beta - d, beta).unwrap();
        let b = morlet(beta + d, beta).unwrap();
        prop_assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn low_pass_decreasing(alpha in 0.01f64..50.0, a in 0.0f64..2.0, b in 0.0f64..2.0) {
        prop_assume!(a < b);
        prop_assert!(low_pass(a, alpha).unwrap() > low_pass(b, alpha).unwrap());
    }
}

#[test]
fn laplacian_apply_agrees_with_dense() {
    let g = er_graph(30, 0.2, 5);
    let l = NormalizedLaplacian::new(&g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let f = gaussian_vector(30, &mut rng);
    let dense = l.to_dense() * &f;
    let sparse = l.apply(f.as_slice());
    for (a, b) in dense.iter().zip(&sparse) {
        assert!((a - b).abs() < 1e-13);
    }
}
