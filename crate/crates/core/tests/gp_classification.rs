mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wavelet_gp::experiments::{toy_filter, toy_two_cluster, ExperimentConfig};
use wavelet_gp::gp::classify::{mc_draws, VariationalState};
use wavelet_gp::gp::{
    accuracy, rejection_curve, ClassifierConfig, FeatureKernel, WaveletGp, WaveletGpClassifier, WaveletKernel,
};
use wavelet_gp::{FilterSpec, MotherWavelet};

fn toy_classifier(
    cluster: usize,
    seed: u64,
    feature: FeatureKernel,
) -> (WaveletGpClassifier, Vec<usize>, Vec<usize>, Vec<usize>, Vec<usize>) {
    let ds = toy_two_cluster(cluster, seed).unwrap();
    let (_, d) = decompose(&ds.graph);
    let kernel = exact_kernel(&d, toy_filter(), feature);
    let train = ds.split.train.clone();
    let test = ds.split.test.clone();
    let model = WaveletGpClassifier::new(kernel, 2, train.clone()).unwrap();
    (model, ds.labels_at(&train), test.clone(), ds.labels_at(&test), train)
}

fn small_model(seed: u64, classes: usize) -> (WaveletGpClassifier, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(8..16);
    let g = er_graph(n, 0.35, seed);
    let (l, d) = decompose(&g);
    let spec = FilterSpec::new(
        MotherWavelet::MexicanHat,
        Some(rng.random_range(1.0..10.0)),
        vec![rng.random_range(0.3..3.0)],
    )
    .unwrap();
    let feature = if rng.random_bool(0.5) {
        FeatureKernel::Identity
    } else {
        let x = DMatrix::from_fn(n, 4, |_, _| rng.random_range(0.0..0.5));
        FeatureKernel::polynomial(&x, 2, rng.random_range(0.5..2.0), rng.random_range(0.2..1.0)).unwrap()
    };
    let kernel: WaveletKernel = if rng.random_bool(0.5) {
        exact_kernel(&d, spec, feature)
    } else {
        let proj =
            wavelet_gp::poly::ProjectionMatrix::least_squares(&wavelet_gp::density::sample_grid(30), None, 4).unwrap();
        poly_kernel(&l, proj, spec, feature)
    };
    let t = n * 2 / 3;
    let train: Vec<usize> = (0..t).collect();
    let labels: Vec<usize> = (0..t).map(|_| rng.random_range(0..classes)).collect();
    (WaveletGpClassifier::new(kernel, classes, train).unwrap(), labels)
}

fn random_state(model: &WaveletGpClassifier, rng: &mut ChaCha8Rng) -> VariationalState {
    let m = model.train_indices().len();
    let means = (0..model.n_classes()).map(|_| gaussian_vector(m, rng) * 0.7).collect();
    let factors = (0..model.n_classes())
        .map(|_| {
            DMatrix::from_fn(m, m, |i, j| match i.cmp(&j) {
                std::cmp::Ordering::Greater => 0.2 * rng.random_range(-1.0..1.0),
                std::cmp::Ordering::Equal => rng.random_range(0.3..1.0),
                std::cmp::Ordering::Less => 0.0,
            })
        })
        .collect();
    VariationalState::new(means, factors).unwrap()
}

#[test]
fn kl_vanishes_at_the_prior() {
    for seed in 0..5 {
        let (model, _) = small_model(seed, 3);
        let kl = model.kl_divergence(&model.prior_state().unwrap()).unwrap();
        assert!(kl.abs() < 1e-8, "{kl}");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        assert!(model.kl_divergence(&random_state(&model, &mut rng)).unwrap() > 0.0);
    }
}

#[test]
fn confident_correct_posterior_has_near_zero_likelihood_cost() {
    let (model, labels) = small_model(1, 2);
    let m = labels.len();
    let means = (0..2)
        .map(|c| DVector::from_iterator(m, labels.iter().map(|&y| if y == c { 10.0 } else { -10.0 })))
        .collect();
    let factors = (0..2).map(|_| DMatrix::identity(m, m) * 1e-3).collect();
    let state = VariationalState::new(means, factors).unwrap();
    let elbo = model.elbo(&state, &labels, 64, 0).unwrap();
    let kl = model.kl_divergence(&state).unwrap();
    let per_node = (elbo + kl) / m as f64;
    assert!(per_node <= 0.0 && per_node > -1e-3, "{per_node}");
}

#[test]
fn gaussian_variant_is_bounded_by_marginal_likelihood() {
    let g = er_graph(10, 0.4, 3);
    let (_, d) = decompose(&g);
    let kernel = exact_kernel(&d, FilterSpec::ground_truth(), FeatureKernel::Identity);
    let train: Vec<usize> = (0..10).collect();
    let noise = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let y: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
    let lml = WaveletGp::new(kernel.clone(), noise, train.clone())
        .unwrap()
        .log_marginal_likelihood(&y)
        .unwrap();
    let model = WaveletGpClassifier::new(kernel.clone(), 2, train.clone()).unwrap();
    for _ in 0..5 {
        let state = random_state(&model, &mut rng);
        assert!(model.gaussian_elbo(&state, &y, noise).unwrap() <= lml);
    }
    // The exact posterior over u attains the bound.
    let k = kernel.covariance(&train).unwrap();
    let ky = &k + DMatrix::identity(10, 10) * noise;
    let solve = ky.clone().cholesky().unwrap();
    let mean = &k * solve.solve(&DVector::from_vec(y.clone()));
    let cov = &k - &k * solve.solve(&k);
    let cov = (&cov + cov.transpose()) * 0.5;
    let factor = cov.cholesky().unwrap().l();
    let state = VariationalState::new(vec![mean.clone(), mean], vec![factor.clone(), factor]).unwrap();
    let tight = model.gaussian_elbo(&state, &y, noise).unwrap();
    assert!((tight - lml).abs() < 1e-6, "{tight} vs {lml}");
}

#[test]
fn elbo_gradients_match_common_random_number_differences() {
    for seed in 0..6 {
        let (model, labels) = small_model(seed, 2 + (seed as usize % 2));
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let state = random_state(&model, &mut rng);
        let draws = mc_draws(8, labels.len(), model.n_classes(), seed, 0);
        let (_, grad) = model.elbo_with_gradient(&state, &labels, &draws).unwrap();
        let value = |s: &VariationalState, m: &WaveletGpClassifier| m.elbo_with_gradient(s, &labels, &draws).unwrap().0;
        let h = 1e-5;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-3 * a.abs().max(b.abs()) + 1e-6;
        for c in 0..model.n_classes() {
            for i in 0..state.n_inducing() {
                let shift = |delta: f64| {
                    let mut s = state.clone();
                    let mut m = s.mean(c).clone();
                    m[i] += delta;
                    s.set_mean(c, m);
                    value(&s, &model)
                };
                let fd = (shift(h) - shift(-h)) / (2.0 * h);
                assert!(
                    close(fd, grad.means[c][i]),
                    "seed {seed} mean {c},{i}: {fd} vs {}",
                    grad.means[c][i]
                );
            }
            for i in 0..state.n_inducing() {
                for j in 0..=i {
                    let shift = |delta: f64| {
                        let mut factors: Vec<DMatrix<f64>> =
                            (0..model.n_classes()).map(|k| state.factor(k).clone()).collect();
                        factors[c][(i, j)] += delta;
                        let means = (0..model.n_classes()).map(|k| state.mean(k).clone()).collect();
                        value(&VariationalState::new(means, factors).unwrap(), &model)
                    };
                    let fd = (shift(h) - shift(-h)) / (2.0 * h);
                    let an = grad.factors[c][(i, j)];
                    assert!(close(fd, an), "seed {seed} factor {c},({i},{j}): {fd} vs {an}");
                }
            }
        }
        let p = model.kernel().params();
        for k in 0..p.len() {
            let shift = |delta: f64| {
                let mut q = p.clone();
                q[k] += delta;
                value(&state, &model.with_kernel(model.kernel().with_params(&q).unwrap()))
            };
            let step = h * p[k];
            let fd = (shift(step) - shift(-step)) / (2.0 * step);
            assert!(
                close(fd, grad.kernel[k]),
                "seed {seed} kernel {k}: {fd} vs {}",
                grad.kernel[k]
            );
        }
    }
}

#[test]
fn monte_carlo_error_shrinks_with_samples() {
    let (model, labels) = small_model(2, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let state = random_state(&model, &mut rng);
    let spread = |samples: usize| {
        let v: Vec<f64> = (0..50)
            .map(|s| model.elbo(&state, &labels, samples, s).unwrap())
            .collect();
        let mean = v.iter().sum::<f64>() / 50.0;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 49.0).sqrt()
    };
    let (coarse, fine) = (spread(16), spread(256));
    assert!(fine < coarse, "{fine} vs {coarse}");
    assert_eq!(
        model.elbo(&state, &labels, 16, 3).unwrap(),
        model.elbo(&state, &labels, 16, 3).unwrap()
    );
}

#[test]
fn symmetric_prior_predicts_even_odds() {
    let (model, _) = small_model(4, 2);
    let state = model.prior_state().unwrap();
    let n = model.kernel().dim();
    let query: Vec<usize> = (0..n).collect();
    let pred = model.predict(&state, &query, 4096, 1).unwrap();
    for p in &pred.probabilities {
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((p[0] - 0.5).abs() < 0.02, "{p:?}");
    }
}

#[test]
fn class_relabelling_permutes_probabilities() {
    let (model, _) = small_model(5, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let state = random_state(&model, &mut rng);
    let perm = [2, 0, 1];
    let means = perm.iter().map(|&k| state.mean(k).clone()).collect();
    let factors = perm.iter().map(|&k| state.factor(k).clone()).collect();
    let relabelled = VariationalState::new(means, factors).unwrap();
    let query: Vec<usize> = (0..model.kernel().dim()).collect();
    let a = model.predict(&state, &query, 8192, 2).unwrap();
    let b = model.predict(&relabelled, &query, 8192, 2).unwrap();
    for (pa, pb) in a.probabilities.iter().zip(&b.probabilities) {
        for (new, &old) in perm.iter().enumerate() {
            assert!((pb[new] - pa[old]).abs() < 0.02, "{pa:?} {pb:?}");
        }
    }
}

fn toy_config(seed: u64) -> ClassifierConfig {
    ExperimentConfig::toy_classification(10, seed).classification.classifier
}

fn toy_feature(n: usize) -> FeatureKernel {
    FeatureKernel::polynomial(&DMatrix::identity(n, n), 1, 10.0, 0.0).unwrap()
}

#[test]
fn toy_fit_separates_clusters() {
    for (cluster, seed) in [(10, 0), (10, 1), (10, 2), (15, 0), (15, 1)] {
        let (model, y_train, test, y_test, train) = toy_classifier(cluster, seed, toy_feature(2 * cluster));
        let fit = model.fit(&y_train, &toy_config(seed)).unwrap();
        assert!(fit.trace.last().unwrap() > &fit.trace[0], "seed {seed}");
        let on_train = fit.model.predict(&fit.state, &train, 256, seed).unwrap();
        assert_eq!(accuracy(&on_train.predicted, &y_train), 1.0, "seed {seed}");
        let on_test = fit.model.predict(&fit.state, &test, 256, seed).unwrap();
        assert!(accuracy(&on_test.predicted, &y_test) >= 0.95, "seed {seed}");
    }
}

#[test]
fn identity_ablation_beats_chance_on_toy_data() {
    let (full, y_train, test, y_test, _) = toy_classifier(10, 0, toy_feature(20));
    let (ablated, ..) = toy_classifier(10, 0, FeatureKernel::Identity);
    let acc = |m: &WaveletGpClassifier| {
        let fit = m.fit(&y_train, &toy_config(0)).unwrap();
        accuracy(
            &fit.model.predict(&fit.state, &test, 256, 0).unwrap().predicted,
            &y_test,
        )
    };
    let (a_full, a_id) = (acc(&full), acc(&ablated));
    println!("toy accuracy: scaled features {a_full:.3}, identity {a_id:.3}");
    assert!(a_id >= 0.5);
}

#[test]
fn toy_boundary_is_less_certain_than_interior() {
    for (cluster, seed) in [(10, 0), (10, 1), (15, 0), (15, 1)] {
        let ds = toy_two_cluster(cluster, seed).unwrap();
        let (model, y_train, test, _, _) = toy_classifier(cluster, seed, toy_feature(2 * cluster));
        let fit = model.fit(&y_train, &toy_config(seed)).unwrap();
        let pred = fit.model.predict(&fit.state, &test, 512, 0).unwrap();
        let adj = ds.graph.adjacency();
        let n = ds.n_nodes();
        let crosses = |i: usize| (0..n).any(|j| adj.get(i, j) > 0.0 && ds.labels[j] != ds.labels[i]);
        let (mut boundary, mut interior) = (Vec::new(), Vec::new());
        for (k, &i) in test.iter().enumerate() {
            if crosses(i) { &mut boundary } else { &mut interior }.push(pred.variance[k]);
        }
        assert!(!boundary.is_empty() && !interior.is_empty(), "seed {seed}");
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&interior) < mean(&boundary),
            "cluster {cluster} seed {seed}: {} vs {}",
            mean(&interior),
            mean(&boundary)
        );
    }
}

#[test]
fn toy_rejection_curve() {
    let (model, y_train, test, y_test, _) = toy_classifier(15, 0, toy_feature(30));
    let fit = model.fit(&y_train, &toy_config(0)).unwrap();
    let pred = fit.model.predict(&fit.state, &test, 512, 0).unwrap();
    let overall = accuracy(&pred.predicted, &y_test);
    let min_var = pred.variance.iter().copied().fold(f64::INFINITY, f64::min);
    let mut thresholds: Vec<f64> = pred.variance.clone();
    thresholds.sort_by(f64::total_cmp);
    thresholds.insert(0, min_var / 2.0 - 1.0);
    thresholds.push(f64::INFINITY);
    let rows = rejection_curve(&pred, &y_test, &thresholds).unwrap();
    assert!(rows[0].accuracy.is_none() && rows[0].kept == 0);
    assert_eq!(rows.last().unwrap().accuracy, Some(overall));
    assert!(rows.windows(2).all(|w| w[0].kept_fraction <= w[1].kept_fraction));
    let strictest = rows.iter().find(|r| r.accuracy.is_some()).unwrap();
    assert!(strictest.accuracy.unwrap() >= overall);
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn kl_is_nonnegative(seed in any::<u64>()) {
        let (model, _) = small_model(seed % 50, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = random_state(&model, &mut rng);
        prop_assert!(model.kl_divergence(&state).unwrap() >= 0.0);
    }

    #[test]
    fn predicted_probabilities_are_distributions(seed in any::<u64>(), classes in 2usize..5) {
        let (model, _) = small_model(seed % 50, classes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = random_state(&model, &mut rng);
        let query: Vec<usize> = (0..model.kernel().dim()).collect();
        let pred = model.predict(&state, &query, 32, seed).unwrap();
        for (p, &v) in pred.probabilities.iter().zip(&pred.variance) {
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
            prop_assert!(v >= 0.0);
        }
    }
}
