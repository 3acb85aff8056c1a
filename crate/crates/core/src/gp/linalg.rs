//! Dense Cholesky helpers with deterministic jitter escalation.

use nalgebra::{Cholesky, DMatrix, Dyn};

use super::GpError;
use crate::geometry::Point2;

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;
const COINCIDENT: f64 = 1e-12;

/// Coincident inducing locations make `k0(P, P)` singular; jitter would hide
/// that, so they are rejected up front.
pub(crate) fn check_distinct(locs: &[Point2]) -> Result<(), GpError> {
    for (i, a) in locs.iter().enumerate() {
        if locs[i + 1..].iter().any(|b| a.distance(b) < COINCIDENT) {
            return Err(GpError::NumericalFailure(locs.len(), 0.0));
        }
    }
    Ok(())
}

/// In-place `(A + A^T) / 2`.
pub(crate) fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Symmetrizes and factors `a`. On failure retries with diagonal jitter
/// 1e-10, 1e-9, ..., 1e-4 before giving up.
pub(crate) fn jittered_cholesky(mut a: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, GpError> {
    symmetrize(&mut a);
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok(c);
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * 1.000_001 {
        let mut b = a.clone();
        for i in 0..b.nrows() {
            b[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(b) {
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(GpError::NumericalFailure(a.nrows(), JITTER_MAX))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_semidefinite_with_jitter() {
        // rank one
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(jittered_cholesky(a).is_ok());
    }

    #[test]
    fn reports_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(jittered_cholesky(a).unwrap_err(), GpError::NumericalFailure(2, 1e-4));
    }
}
