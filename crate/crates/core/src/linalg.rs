//! Dense and iterative spectral computations for symmetric matrices.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Above this dimension `spectral_norm` switches from a dense symmetric
/// eigensolve to Lanczos with full reorthogonalization.
pub const DENSE_EIG_LIMIT: usize = 256;

const LANCZOS_MAX_ITER: usize = 200;

/// All eigenvalues of a symmetric matrix (dense solve), ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

fn max_abs_eig(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
}

/// Spectral norm `max_i |lambda_i|` of a symmetric matrix.
///
/// Dense eigensolve up to `DENSE_EIG_LIMIT`; Lanczos with full
/// reorthogonalization beyond, converged to `rel_tol` relative accuracy.
pub fn spectral_norm(m: &DMatrix<f64>, rel_tol: f64) -> Result<f64> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::InvalidDimension("spectral_norm requires a square matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    if n <= DENSE_EIG_LIMIT {
        return Ok(max_abs_eig(m));
    }
    Ok(lanczos_norm(m, rel_tol))
}

/// Extremal-|eigenvalue| estimate by symmetric Lanczos with full
/// reorthogonalization and a deterministic start vector.
fn lanczos_norm(m: &DMatrix<f64>, rel_tol: f64) -> f64 {
    let n = m.nrows();
    let frob = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    if frob == 0.0 {
        return 0.0;
    }

    let mut rng = stream_rng(0x1a2c_3057, 0);
    let mut v = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
    v /= v.norm();

    let mut basis: Vec<DVector<f64>> = vec![v.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut prev_estimate = f64::NAN;

    for j in 0..LANCZOS_MAX_ITER.min(n) {
        let mut w = m * &basis[j];
        if j > 0 {
            w.axpy(-betas[j - 1], &basis[j - 1], 1.0);
        }
        let alpha = basis[j].dot(&w);
        w.axpy(-alpha, &basis[j], 1.0);
        // full reorthogonalization against the whole basis
        for q in &basis {
            let c = q.dot(&w);
            w.axpy(-c, q, 1.0);
        }
        alphas.push(alpha);
        let beta = w.norm();

        let converged_check = j >= 1 && (j % 5 == 4 || beta <= 1e-14 * frob || j + 1 == LANCZOS_MAX_ITER.min(n));
        if converged_check {
            let est = tridiag_max_abs(&alphas, &betas);
            if beta <= 1e-14 * frob {
                return est;
            }
            if (est - prev_estimate).abs() <= rel_tol * est.max(f64::MIN_POSITIVE) {
                return est;
            }
            prev_estimate = est;
        }
        if beta <= 1e-14 * frob {
            return tridiag_max_abs(&alphas, &betas);
        }
        betas.push(beta);
        basis.push(w / beta);
    }
    tridiag_max_abs(&alphas, &betas)
}

fn tridiag_max_abs(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    max_abs_eig(&t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_cases() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_relative_eq!(spectral_norm(&id, 1e-10).unwrap(), 1.0);
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -5.0]);
        assert_relative_eq!(spectral_norm(&d, 1e-10).unwrap(), 5.0);
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_relative_eq!(spectral_norm(&swap, 1e-10).unwrap(), 1.0);
    }

    #[test]
    fn rejects_non_finite() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, f64::NAN, f64::NAN, 0.0]);
        assert!(spectral_norm(&m, 1e-8).is_err());
    }

    #[test]
    fn lanczos_matches_dense() {
        // large enough to take the Lanczos path
        let n = DENSE_EIG_LIMIT + 44;
        let mut rng = stream_rng(99, 0);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.sample(StandardNormal);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let dense = max_abs_eig(&m);
        let lanczos = spectral_norm(&m, 1e-10).unwrap();
        assert_relative_eq!(lanczos, dense, max_relative = 1e-8);
    }

    #[test]
    fn lanczos_zero_matrix() {
        let m = DMatrix::<f64>::zeros(DENSE_EIG_LIMIT + 10, DENSE_EIG_LIMIT + 10);
        assert_eq!(spectral_norm(&m, 1e-8).unwrap(), 0.0);
    }
}
