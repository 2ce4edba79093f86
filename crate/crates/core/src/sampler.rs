//! Seeded sampling of matrix models and Monte Carlo estimation of
//! spectral-norm statistics.
//!
//! Sample `t` of a run with base seed `s` is drawn from the derived stream
//! `(s, t)`, so estimates are bit-identical regardless of the number of
//! workers.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, sym_eigenvalues};
use crate::model::MatrixModel;
use crate::rng::stream_rng;
use crate::structural;

/// Relative tolerance used for all spectral-norm solves in this module.
pub const NORM_REL_TOL: f64 = 1e-8;

/// Default Monte Carlo budget: 200 samples up to n = 512, 50 beyond.
pub fn default_samples(n: usize) -> usize {
    if n <= 512 {
        200
    } else {
        50
    }
}

/// Monte Carlo estimate with unbiased sample variance and standard error.
#[derive(Debug, Clone, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub variance: f64,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl MCEstimate {
    pub(crate) fn from_values(values: Vec<f64>, seed: u64) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InvalidArgument("need at least 2 samples".into()));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        if !mean.is_finite() {
            return Err(Error::Numeric("non-finite Monte Carlo mean".into()));
        }
        Ok(Self {
            mean,
            std_error: (variance / n as f64).sqrt(),
            variance,
            n_samples: n,
            seed,
            values: Some(values),
        })
    }
}

/// Aggregated empirical spectral distribution over samples; eigenvalues are
/// divided by `scale` before binning on a fixed grid.
#[derive(Debug, Clone, Serialize)]
pub struct ESDHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_samples: usize,
    pub scale: f64,
}

impl ESDHistogram {
    /// Histogram as CSV rows `bin_left,bin_right,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[i], self.edges[i + 1], c));
        }
        out
    }

    /// Per-bin fraction of all aggregated eigenvalues.
    pub fn normalized(&self) -> Vec<f64> {
        let total: u64 = self.counts.iter().sum();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

fn sample_with_rng(model: &MatrixModel, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    match model {
        MatrixModel::Covariance(_) => Err(Error::InvalidArgument(
            "covariance models are sampled via the covariance module".into(),
        )),
        MatrixModel::CoefficientGaussian(ens) => {
            let n = ens.n();
            let mut x = DMatrix::zeros(n, n);
            for a in ens.coeffs() {
                let g: f64 = rng.sample(StandardNormal);
                x += a * g;
            }
            Ok(x)
        }
        _ => {
            let rademacher = model.is_rademacher();
            let vp = model.pattern().expect("entrywise model has a pattern");
            let n = vp.n();
            let mut x = DMatrix::zeros(n, n);
            // One variate per nonzero entry, in the canonical order shared
            // with coefficients_from_pattern; structural zeros consume no
            // randomness, so sparse models sample in O(#nonzeros).
            for (i, j, b) in vp.nonzero_upper() {
                let g: f64 = if rademacher {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    rng.sample(StandardNormal)
                };
                x[(i, j)] = b * g;
                x[(j, i)] = b * g;
            }
            Ok(x)
        }
    }
}

/// Draws one symmetric matrix from the model; deterministic in (model, seed).
pub fn sample_matrix(model: &MatrixModel, seed: u64) -> Result<DMatrix<f64>> {
    sample_with_rng(model, &mut stream_rng(seed, 0))
}

fn per_sample<T: Send>(
    model: &MatrixModel,
    n_samples: usize,
    seed: u64,
    f: impl Fn(&DMatrix<f64>) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..n_samples as u64)
        .into_par_iter()
        .map(|t| {
            let x = sample_with_rng(model, &mut stream_rng(seed, t))?;
            f(&x)
        })
        .collect()
}

/// Per-sample spectral norms for (model, seed); sample `t` uses stream `(seed, t)`.
pub fn norm_samples(model: &MatrixModel, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    per_sample(model, n_samples, seed, |x| spectral_norm(x, NORM_REL_TOL))
}

/// Monte Carlo estimate of `E ||X||`.
pub fn mc_norm(model: &MatrixModel, n_samples: usize, seed: u64) -> Result<MCEstimate> {
    MCEstimate::from_values(norm_samples(model, n_samples, seed)?, seed)
}

/// Monte Carlo estimate of `E[||X||^p]^{1/p}` with delta-method standard
/// error; uses the same per-sample seeds as `mc_norm`.
pub fn mc_norm_moment(
    model: &MatrixModel,
    p: u32,
    n_samples: usize,
    seed: u64,
) -> Result<MCEstimate> {
    if p == 0 {
        return Err(Error::InvalidArgument("moment order p must be >= 1".into()));
    }
    let norms = norm_samples(model, n_samples, seed)?;
    let n = norms.len() as f64;
    let pf = f64::from(p);

    let max_log = norms
        .iter()
        .map(|&v| if v > 0.0 { pf * v.ln() } else { f64::NEG_INFINITY })
        .fold(f64::NEG_INFINITY, f64::max);

    let (mean_y, var_y, values) = if max_log > 300.0 {
        // log-space path guards p * ln||X|| overflow
        let shifted: Vec<f64> = norms
            .iter()
            .map(|&v| if v > 0.0 { (pf * v.ln() - max_log).exp() } else { 0.0 })
            .collect();
        let m = shifted.iter().sum::<f64>() / n;
        let var_s = shifted.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        // moments of y recovered in log space where possible
        let mean_y = max_log + m.ln();
        (mean_y, var_s, shifted) // mean_y in log space; handled below
    } else {
        let y: Vec<f64> = norms.iter().map(|&v| v.powf(pf)).collect();
        let m = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, var, y)
    };

    let (estimate, se) = if max_log > 300.0 {
        // mean_y holds ln E[y]; delta method on the log scale:
        // est = exp(ln E[y] / p), d est / d mean = est / (p * E[y]).
        let est = (mean_y / pf).exp();
        let se_shifted = (var_y / n).sqrt();
        // SE of E[y] relative to its magnitude equals SE of the shifted mean
        // over the shifted mean.
        let shifted_mean = (mean_y - max_log).exp();
        let rel = if shifted_mean > 0.0 { se_shifted / shifted_mean } else { 0.0 };
        (est, est * rel / pf)
    } else {
        let est = if mean_y > 0.0 { mean_y.powf(1.0 / pf) } else { 0.0 };
        let se_y = (var_y / n).sqrt();
        let deriv = if mean_y > 0.0 { est / (pf * mean_y) } else { 0.0 };
        (est, se_y * deriv)
    };

    Ok(MCEstimate {
        mean: estimate,
        std_error: se,
        variance: se * se * n,
        n_samples: norms.len(),
        seed,
        values: Some(values),
    })
}

/// Empirical `Var ||X||` next to `sigma_star^2` (the Gaussian Poincare
/// comparison). Gaussian models only.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceCheck {
    pub var_hat: f64,
    pub sigma_star_sq: f64,
}

pub fn mc_variance_check(model: &MatrixModel, n_samples: usize, seed: u64) -> Result<VarianceCheck> {
    if model.is_rademacher() {
        return Err(Error::InvalidArgument(
            "variance check applies to Gaussian models only".into(),
        ));
    }
    if n_samples < 50 {
        return Err(Error::InvalidArgument("variance check needs at least 50 samples".into()));
    }
    let est = mc_norm(model, n_samples, seed)?;
    let ss = structural::sigma_star(
        model,
        structural::SIGMA_STAR_RESTARTS,
        structural::SIGMA_STAR_MAX_ITER,
    )?;
    Ok(VarianceCheck { var_hat: est.variance, sigma_star_sq: ss * ss })
}

/// Monte Carlo estimate of `E max_ij |X_ij|`.
pub fn mc_max_entry(model: &MatrixModel, n_samples: usize, seed: u64) -> Result<MCEstimate> {
    let values = per_sample(model, n_samples, seed, |x| {
        Ok(x.iter().fold(0.0f64, |m, &v| m.max(v.abs())))
    })?;
    MCEstimate::from_values(values, seed)
}

/// Monte Carlo estimate of `E max_i ||row_i(X)||_2`.
pub fn mc_row_norm_max(model: &MatrixModel, n_samples: usize, seed: u64) -> Result<MCEstimate> {
    let values = per_sample(model, n_samples, seed, |x| Ok(max_row_norm(x)))?;
    MCEstimate::from_values(values, seed)
}

pub fn max_row_norm(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    (0..n)
        .map(|i| (0..x.ncols()).map(|j| x[(i, j)] * x[(i, j)]).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Aggregated eigenvalue histogram on `[-3, 3]` after dividing by the
/// model's sigma (sqrt(n) for Wigner, 1 for diagonal); out-of-range
/// eigenvalues are clamped into the end bins so counts always total
/// `n * n_samples`.
pub fn esd_histogram(
    model: &MatrixModel,
    n_samples: usize,
    bins: usize,
    seed: u64,
) -> Result<ESDHistogram> {
    if bins < 10 {
        return Err(Error::InvalidArgument("histogram needs at least 10 bins".into()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("histogram needs at least 1 sample".into()));
    }
    let sigma = structural::sigma(model)?;
    let scale = if sigma > 0.0 { sigma } else { 1.0 };
    let (lo, hi) = (-3.0f64, 3.0f64);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();

    let all: Vec<Vec<f64>> = per_sample(model, n_samples, seed, |x| Ok(sym_eigenvalues(x)))?;
    let mut counts = vec![0u64; bins];
    for eigs in &all {
        for &lambda in eigs {
            let z = lambda / scale;
            let idx = (((z - lo) / width).floor() as i64).clamp(0, bins as i64 - 1) as usize;
            counts[idx] += 1;
        }
    }
    Ok(ESDHistogram { edges, counts, n_samples, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_diagonal, build_wigner, VariancePattern};
    use nalgebra::DMatrix;

    #[test]
    fn zero_pattern_samples_zero() {
        let vp = VariancePattern::new(DMatrix::zeros(3, 3)).unwrap();
        let m = MatrixModel::IndependentGaussian(vp);
        let x = sample_matrix(&m, 42).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        let est = mc_norm(&m, 10, 1).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.variance, 0.0);
    }

    #[test]
    fn diagonal_structural_zeros() {
        let m = build_diagonal(3).unwrap();
        let x = sample_matrix(&m, 7).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(x[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn sampled_matrices_are_symmetric() {
        let m = build_wigner(5).unwrap();
        let x = sample_matrix(&m, 3).unwrap();
        assert_eq!(x[(0, 1)], x[(1, 0)]);
        assert_eq!(x.transpose(), x);
    }

    #[test]
    fn determinism_across_parallelism() {
        let m = build_wigner(16).unwrap();
        let a = mc_norm(&m, 20, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| mc_norm(&m, 20, 9).unwrap());
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn moment_p1_matches_mc_norm() {
        let m = build_wigner(8).unwrap();
        let a = mc_norm(&m, 25, 5).unwrap();
        let b = mc_norm_moment(&m, 1, 25, 5).unwrap();
        assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn moment_is_monotone_in_p() {
        let m = build_wigner(16).unwrap();
        let p1 = mc_norm(&m, 40, 11).unwrap().mean;
        let p3 = mc_norm_moment(&m, 3, 40, 11).unwrap().mean;
        assert!(p3 >= p1, "Jensen: higher moments dominate ({p3} < {p1})");
    }

    #[test]
    fn row_norm_dominated_by_spectral_norm() {
        let m = build_wigner(12).unwrap();
        for t in 0..10u64 {
            let x = sample_matrix(&m, 1000 + t).unwrap();
            let rn = max_row_norm(&x);
            let sn = spectral_norm(&x, NORM_REL_TOL).unwrap();
            assert!(rn <= sn + 1e-8, "row norm {rn} exceeds spectral norm {sn}");
        }
    }

    #[test]
    fn scaling_equivariance() {
        let vp = build_wigner(6).unwrap().pattern().unwrap();
        let scaled = vp.scaled(2.5).unwrap();
        let x1 = sample_matrix(&MatrixModel::IndependentGaussian(vp), 77).unwrap();
        let x2 = sample_matrix(&MatrixModel::IndependentGaussian(scaled), 77).unwrap();
        assert_eq!(&x1 * 2.5, x2);
    }

    #[test]
    fn esd_counts_total() {
        let m = build_wigner(20).unwrap();
        let h = esd_histogram(&m, 5, 30, 2).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 20 * 5);
        assert!(esd_histogram(&m, 5, 5, 2).is_err());
    }

    #[test]
    fn variance_check_rejects_rademacher() {
        let vp = build_wigner(4).unwrap().pattern().unwrap();
        let m = MatrixModel::IndependentRademacher(vp);
        assert!(mc_variance_check(&m, 60, 1).is_err());
    }
}
