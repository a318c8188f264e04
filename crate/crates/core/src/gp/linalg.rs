use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

pub(crate) const JITTER_START: f64 = 1e-8;
pub(crate) const JITTER_MAX: f64 = 1e-2;

/// Cholesky factorization, retrying with diagonal jitter `1e-8 · mean(diag)`
/// grown tenfold up to `1e-2 · mean(diag)`. Returns the jitter used.
pub fn cholesky_with_jitter(matrix: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(chol) = matrix.clone().cholesky() {
        return Ok((chol, 0.0));
    }
    let n = matrix.nrows().max(1);
    let mean_diag = (matrix.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut relative = JITTER_START;
    while relative <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = relative * mean_diag;
        let mut m = matrix.clone();
        for i in 0..matrix.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            return Ok((chol, jitter));
        }
        relative *= 10.0;
    }
    Err(Error::NotPositiveDefinite {
        jitter: JITTER_MAX * mean_diag,
    })
}

pub(crate) fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

pub(crate) fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_rescues_semidefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (_, jitter) = cholesky_with_jitter(&m).unwrap();
        assert!(jitter > 0.0 && jitter <= 1e-2);
    }

    #[test]
    fn indefinite_fails() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            cholesky_with_jitter(&m),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
