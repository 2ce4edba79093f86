//! Sample covariance deviation experiments: Monte Carlo estimates of
//! `E ||Z - Sigma||` for the empirical covariance `Z` of `n` Gaussian
//! vectors with covariance `Sigma`, compared against the effective-rank
//! bound.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::eval_kl;
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::model::CovarianceModel;
use crate::rng::stream_rng;
use crate::sampler::{MCEstimate, NORM_REL_TOL};
use crate::structural::effective_rank;

/// Symmetric square root of the covariance; tiny negative eigenvalues
/// from roundoff are clipped to zero.
pub fn sigma_sqrt(cm: &CovarianceModel) -> DMatrix<f64> {
    let d = cm.d();
    let sigma = cm.sigma();
    let diagonal_only = (0..d).all(|i| (0..d).all(|j| i == j || sigma[(i, j)] == 0.0));
    if diagonal_only {
        return DMatrix::from_fn(d, d, |i, j| {
            if i == j { sigma[(i, i)].max(0.0).sqrt() } else { 0.0 }
        });
    }
    let eig = cm.sigma().clone().symmetric_eigen();
    let mut root = DMatrix::zeros(d, d);
    for k in 0..d {
        let lam = eig.eigenvalues[k].max(0.0).sqrt();
        let v = eig.eigenvectors.column(k);
        root += lam * &v * v.transpose();
    }
    root
}

/// One replication: draws `n_samples` vectors `X_k = Sigma^{1/2} g_k`,
/// forms `Z = (1/n) sum_k X_k X_k^T` and returns `||Z - Sigma||`.
pub fn sample_deviation(
    cm: &CovarianceModel,
    root: &DMatrix<f64>,
    rng: &mut impl Rng,
) -> Result<f64> {
    let d = cm.d();
    let n = cm.n_samples();
    let mut z = DMatrix::<f64>::zeros(d, d);
    for _ in 0..n {
        let g = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
        let x = root * g;
        z.syger(1.0 / n as f64, &x, &x, 1.0);
    }
    z.fill_upper_triangle_with_lower_triangle();
    spectral_norm(&(z - cm.sigma()), NORM_REL_TOL)
}

/// Monte Carlo estimate of `E ||Z - Sigma||` over independent
/// replications; replication `t` uses stream `(seed, t)`.
pub fn mc_deviation(cm: &CovarianceModel, reps: usize, seed: u64) -> Result<MCEstimate> {
    if reps < 2 {
        return Err(Error::InvalidArgument("need at least 2 replications".into()));
    }
    let root = sigma_sqrt(cm);
    let values: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|t| sample_deviation(cm, &root, &mut stream_rng(seed, t)))
        .collect::<Result<Vec<f64>>>()?;
    MCEstimate::from_values(values, seed)
}

/// One sweep point: the deviation estimate and the effective-rank bound
/// for a fixed covariance at one sample count.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub d: usize,
    pub n_samples: usize,
    pub r: f64,
    pub kl_value: f64,
    pub mean: f64,
    pub std_error: f64,
    pub ratio: f64,
}

/// Evaluates deviation estimate and bound for each sample count in
/// `n_values`; point `i` uses seed stream `(seed, i)` as its base.
pub fn kl_sweep(
    sigma: &DMatrix<f64>,
    n_values: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if n_values.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one sample count".into()));
    }
    let mut points = Vec::with_capacity(n_values.len());
    for (i, &n) in n_values.iter().enumerate() {
        let cm = CovarianceModel::new(sigma.clone(), n)?;
        let er = effective_rank(&cm)?;
        let kl = eval_kl(&cm)?;
        let est = mc_deviation(&cm, reps, seed.wrapping_add(i as u64).wrapping_mul(0x9e37_79b9))?;
        points.push(SweepPoint {
            d: cm.d(),
            n_samples: n,
            r: er.r,
            kl_value: kl,
            mean: est.mean,
            std_error: est.std_error,
            ratio: est.mean / kl,
        });
    }
    Ok(points)
}

/// Sweep rows as CSV: `d,n,r,kl_value,mean,std_error,ratio`.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("d,n,r,kl_value,mean,std_error,ratio\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.d, p.n_samples, p.r, p.kl_value, p.mean, p.std_error, p.ratio
        ));
    }
    out
}
