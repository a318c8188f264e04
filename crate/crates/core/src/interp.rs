//! Fritsch–Carlson monotone cubic interpolation and isotonic regression.

use crate::error::{Error, Result};

/// Piecewise cubic Hermite interpolant whose tangents are limited so that
/// monotone data yields a monotone curve.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: ys.len(),
            });
        }
        if n < 2 {
            return Err(Error::invalid("monotone interpolation needs at least two knots"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("interpolation abscissae must be strictly increasing"));
        }
        let secants: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for k in 1..n - 1 {
            let (a, b) = (secants[k - 1], secants[k]);
            slopes[k] = if a * b > 0.0 { 0.5 * (a + b) } else { 0.0 };
        }
        for (k, &d) in secants.iter().enumerate() {
            if d == 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            let a = slopes[k] / d;
            let b = slopes[k + 1] / d;
            // Sign flips only happen for non-monotone data; clip to keep shape.
            if a < 0.0 {
                slopes[k] = 0.0;
            }
            if b < 0.0 {
                slopes[k + 1] = 0.0;
            }
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slopes[k] = tau * a * d;
                slopes[k + 1] = tau * b * d;
            }
        }
        Ok(MonotoneCubic {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            slopes,
        })
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    /// Value at `x`; constant extrapolation outside the knot range.
    pub fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.ys[k]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[k]
            + (-2.0 * t3 + 3.0 * t2) * self.ys[k + 1]
            + (t3 - t2) * h * self.slopes[k + 1]
    }

    /// Analytic derivative; zero outside the knot range.
    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * self.ys[k] + (-6.0 * t2 + 6.0 * t) * self.ys[k + 1]) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * self.slopes[k]
            + (3.0 * t2 - 2.0 * t) * self.slopes[k + 1]
    }

    pub fn knot_slopes(&self) -> &[f64] {
        &self.slopes
    }
}

/// Least-squares nondecreasing fit (pool adjacent violators, unit weights).
pub fn isotonic(values: &[f64]) -> Vec<f64> {
    // (mean, count) blocks
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, c2) = blocks[blocks.len() - 1];
            let (m1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let c = c1 + c2;
            *blocks.last_mut().unwrap() = ((m1 * c1 as f64 + m2 * c2 as f64) / c as f64, c);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, c)| std::iter::repeat_n(m, c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_knots_and_lines() {
        let xs = [0.0, 0.5, 1.0, 2.0];
        let ys = [0.0, 0.25, 0.5, 1.0];
        let c = MonotoneCubic::new(&xs, &ys).unwrap();
        for (&x, &y) in xs.iter().zip(&ys) {
            assert!((c.value(x) - y).abs() < 1e-15);
        }
        assert!((c.value(1.5) - 0.75).abs() < 1e-12);
        assert!((c.derivative(0.3) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn flat_region_has_zero_slope() {
        let c = MonotoneCubic::new(&[0.0, 1.0, 2.0, 3.0], &[0.0, 0.5, 0.5, 1.0]).unwrap();
        assert_eq!(c.derivative(1.5), 0.0);
        assert_eq!(c.value(1.5), 0.5);
    }

    #[test]
    fn isotonic_pools_violators() {
        assert_eq!(isotonic(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(isotonic(&[]), Vec::<f64>::new());
    }

    proptest! {
        #[test]
        fn monotone_data_gives_monotone_curve(incs in proptest::collection::vec(0.0f64..1.0, 3..12)) {
            let mut ys = vec![0.0];
            for d in &incs {
                ys.push(ys.last().unwrap() + d);
            }
            let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
            let c = MonotoneCubic::new(&xs, &ys).unwrap();
            let mut last = f64::NEG_INFINITY;
            for i in 0..=400 {
                let x = (ys.len() - 1) as f64 * i as f64 / 400.0;
                let v = c.value(x);
                prop_assert!(v >= last - 1e-12);
                prop_assert!(c.derivative(x) >= -1e-12);
                last = v;
            }
        }

        #[test]
        fn isotonic_output_is_sorted(v in proptest::collection::vec(-5.0f64..5.0, 0..30)) {
            let out = isotonic(&v);
            prop_assert_eq!(out.len(), v.len());
            prop_assert!(out.windows(2).all(|w| w[0] <= w[1] + 1e-12));
            let s1: f64 = v.iter().sum();
            let s2: f64 = out.iter().sum();
            prop_assert!((s1 - s2).abs() < 1e-9);
        }
    }
}
