//! Eigendecomposition-free spectral density estimation (kernel polynomial
//! method): Jackson-damped Chebyshev step functions, Gaussian trace
//! probes, and a monotone cubic fit of the cumulative density.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NormalizedLaplacian;
use crate::interp::{isotonic, MonotoneCubic};

/// Relative floor applied to the density weights.
pub const WEIGHT_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensityConfig {
    /// Number of linearly spaced sample points on `[0, 2]`.
    pub samples: usize,
    /// Gaussian probe vectors for the trace estimate.
    pub probes: usize,
    /// Degree of the Jackson-Chebyshev step approximation.
    pub degree: usize,
    pub seed: u64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            samples: 30,
            probes: 100,
            degree: 100,
            seed: 0,
        }
    }
}

/// `S` linearly spaced points on `[0, 2]`.
pub fn sample_grid(samples: usize) -> Vec<f64> {
    match samples {
        0 => vec![],
        1 => vec![0.0],
        s => (0..s).map(|i| 2.0 * i as f64 / (s - 1) as f64).collect(),
    }
}

/// Jackson damping factors `g_0..g_M`.
pub fn jackson_factors(degree: usize) -> Vec<f64> {
    let m2 = (degree + 2) as f64;
    let a = PI / m2;
    (0..=degree)
        .map(|k| {
            let k = k as f64;
            ((1.0 - k / m2) * a.sin() * (k * a).cos() + (1.0 / m2) * a.cos() * (k * a).sin()) / a.sin()
        })
        .collect()
}

/// Damped Chebyshev approximation of `1{λ ≤ threshold}` on `[0, 2]`.
#[derive(Debug, Clone)]
pub struct JacksonChebStep {
    threshold: f64,
    coefficients: Vec<f64>,
}

impl JacksonChebStep {
    pub fn new(threshold: f64, degree: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::invalid("Jackson-Chebyshev degree must be at least 1"));
        }
        if !(0.0..=2.0).contains(&threshold) {
            return Err(Error::invalid(format!("threshold {threshold} outside [0, 2]")));
        }
        let damping = jackson_factors(degree);
        Ok(JacksonChebStep {
            threshold,
            coefficients: step_coefficients(threshold, degree)
                .into_iter()
                .zip(damping)
                .map(|(c, g)| c * g)
                .collect(),
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Damped coefficients in the Chebyshev basis of `λ - 1`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn evaluate(&self, lambda: f64) -> f64 {
        clenshaw(&self.coefficients, lambda - 1.0)
    }
}

/// Undamped Chebyshev coefficients of `1{x ≤ a}` on `[-1, 1]` with `a = ξ - 1`.
fn step_coefficients(threshold: f64, degree: usize) -> Vec<f64> {
    let theta = (threshold - 1.0).clamp(-1.0, 1.0).acos();
    let mut c = Vec::with_capacity(degree + 1);
    c.push((PI - theta) / PI);
    for k in 1..=degree {
        let k = k as f64;
        c.push(-2.0 * (k * theta).sin() / (k * PI));
    }
    c
}

fn clenshaw(coefficients: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coefficients.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    coefficients[0] + x * b1 - b2
}

fn probe(n: usize, seed: u64, index: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Gaussian (Hutchinson-type) trace estimate `(1/R) Σ zᵀ B z`.
pub fn estimate_trace<F>(apply: F, n: usize, probes: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    if probes < 1 {
        return Err(Error::invalid("trace estimation needs at least one probe"));
    }
    let per_probe: Vec<f64> = (0..probes)
        .into_par_iter()
        .map(|r| {
            let z = probe(n, seed, r);
            let bz = apply(&z);
            z.iter().zip(&bz).map(|(a, b)| a * b).sum()
        })
        .collect();
    Ok(per_probe.iter().sum::<f64>() / probes as f64)
}

/// Averaged Chebyshev moments `(1/R) Σ_r z_rᵀ T_k(L - I) z_r` for `k = 0..=degree`.
fn chebyshev_moments(l: &NormalizedLaplacian, degree: usize, probes: usize, seed: u64) -> Vec<f64> {
    let n = l.dim();
    let per_probe: Vec<Vec<f64>> = (0..probes)
        .into_par_iter()
        .map(|r| {
            let z = probe(n, seed, r);
            let dot = |v: &[f64]| z.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
            let mut moments = Vec::with_capacity(degree + 1);
            let mut prev = z.clone();
            moments.push(dot(&prev));
            // T_1 = (L - I) z
            let mut cur = l.apply(&z);
            for (c, p) in cur.iter_mut().zip(&prev) {
                *c -= p;
            }
            if degree >= 1 {
                moments.push(dot(&cur));
            }
            let mut scratch = vec![0.0; n];
            for _ in 2..=degree {
                l.apply_into(&cur, &mut scratch);
                // T_{k+1} = 2 (L - I) T_k - T_{k-1}
                for i in 0..n {
                    scratch[i] = 2.0 * (scratch[i] - cur[i]) - prev[i];
                }
                std::mem::swap(&mut prev, &mut cur);
                std::mem::swap(&mut cur, &mut scratch);
                moments.push(dot(&cur));
            }
            moments
        })
        .collect();
    let mut avg = vec![0.0; degree + 1];
    for m in &per_probe {
        for (a, v) in avg.iter_mut().zip(m) {
            *a += v;
        }
    }
    avg.iter_mut().for_each(|a| *a /= probes as f64);
    avg
}

/// Estimated cumulative spectral density with its monotone interpolant
/// and the derived least-squares weights.
#[derive(Debug, Clone, Serialize)]
pub struct DensityEstimate {
    sample_points: Vec<f64>,
    raw_cdf: Vec<f64>,
    cdf_values: Vec<f64>,
    weights: Vec<f64>,
    config: DensityConfig,
    #[serde(skip)]
    interpolant: MonotoneCubic,
}

impl DensityEstimate {
    pub fn estimate(l: &NormalizedLaplacian, config: DensityConfig) -> Result<Self> {
        if config.samples < 2 {
            return Err(Error::invalid("density estimation needs at least two sample points"));
        }
        if config.probes < 1 {
            return Err(Error::invalid("density estimation needs at least one probe"));
        }
        let steps = sample_grid(config.samples)
            .into_iter()
            .map(|xi| JacksonChebStep::new(xi, config.degree))
            .collect::<Result<Vec<_>>>()?;
        let moments = chebyshev_moments(l, config.degree, config.probes, config.seed);
        let n = l.dim() as f64;
        let raw_cdf: Vec<f64> = steps
            .iter()
            .map(|s| s.coefficients().iter().zip(&moments).map(|(c, m)| c * m).sum::<f64>() / n)
            .collect();
        let cdf_values: Vec<f64> = isotonic(&raw_cdf).into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let sample_points: Vec<f64> = steps.iter().map(|s| s.threshold()).collect();
        let interpolant = MonotoneCubic::new(&sample_points, &cdf_values)?;
        let weights = floored_weights(sample_points.iter().map(|&x| interpolant.derivative(x)).collect());
        Ok(DensityEstimate {
            sample_points,
            raw_cdf,
            cdf_values,
            weights,
            config,
            interpolant,
        })
    }

    /// Builds the estimate from externally supplied cumulative values, e.g.
    /// an exact eigenvalue count.
    pub fn from_cdf(sample_points: Vec<f64>, cdf: Vec<f64>, config: DensityConfig) -> Result<Self> {
        let cdf_values: Vec<f64> = isotonic(&cdf).into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let interpolant = MonotoneCubic::new(&sample_points, &cdf_values)?;
        let weights = floored_weights(sample_points.iter().map(|&x| interpolant.derivative(x)).collect());
        Ok(DensityEstimate {
            sample_points,
            raw_cdf: cdf,
            cdf_values,
            weights,
            config,
            interpolant,
        })
    }

    pub fn sample_points(&self) -> &[f64] {
        &self.sample_points
    }

    /// Trace estimates before isotonic cleanup.
    pub fn raw_cdf(&self) -> &[f64] {
        &self.raw_cdf
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf_values
    }

    pub fn config(&self) -> DensityConfig {
        self.config
    }

    pub fn cdf(&self, z: f64) -> f64 {
        self.interpolant.value(z)
    }

    /// Estimated density `d/dz` of the interpolated cumulative density.
    pub fn density(&self, z: f64) -> f64 {
        self.interpolant.derivative(z)
    }

    /// Least-squares weights: density at the sample points, floored at
    /// `1e-4 · max` and normalized to sum to `S`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn floored_weights(mut density: Vec<f64>) -> Vec<f64> {
    let s = density.len() as f64;
    let max = density.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return vec![1.0; density.len()];
    }
    let floor = WEIGHT_FLOOR * max;
    density.iter_mut().for_each(|d| *d = d.max(floor));
    let total: f64 = density.iter().sum();
    density.iter_mut().for_each(|d| *d *= s / total);
    density
}

/// Exact cumulative spectral density `#{λ_l ≤ z} / N` from known eigenvalues.
pub fn exact_cdf(eigenvalues: &[f64], z: f64) -> f64 {
    let count = eigenvalues.iter().filter(|&&l| l <= z + 1e-10).count();
    count as f64 / eigenvalues.len() as f64
}
