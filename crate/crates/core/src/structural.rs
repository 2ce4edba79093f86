//! Structural parameters of a matrix model: sigma, sigma_star, the
//! second-order sigma-tilde estimate, row moment profiles, and effective
//! rank.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::sym_eigenvalues;
use crate::model::{CoefficientEnsemble, CovarianceModel, MatrixModel, VariancePattern};
use crate::rng::stream_rng;

type CMatrix = DMatrix<Complex<f64>>;

/// Default random restarts for the sigma_star ascent.
pub const SIGMA_STAR_RESTARTS: usize = 32;
/// Default iteration cap for the sigma_star ascent.
pub const SIGMA_STAR_MAX_ITER: usize = 500;
/// Default restarts / evaluation budget for the sigma_tilde optimizer.
pub const SIGMA_TILDE_RESTARTS: usize = 4;
pub const SIGMA_TILDE_MAX_ITER: usize = 24;

/// Structural parameters feeding every bound expression.
#[derive(Debug, Clone, Serialize)]
pub struct StructuralParams {
    /// `||E X^2||^{1/2}`.
    pub sigma: f64,
    /// `sup_{|v|=1} E[<v,Xv>^2]^{1/2}`; closed form for entrywise models,
    /// ascent lower bound for coefficient ensembles.
    pub sigma_star: f64,
    /// Heuristic lower estimate of the second-order parameter sigma-tilde.
    pub sigma_tilde_lb: f64,
    /// Per-row `sqrt(sum_j b_ij^2)`.
    pub row_l2: Vec<f64>,
    /// Per-row `(sum_j b_ij^4)^{1/4}`.
    pub row_l4: Vec<f64>,
    /// `max_ij b_ij`.
    pub max_entry: f64,
}

/// Trace, norm, and effective rank `r = Tr / norm` of a covariance matrix.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveRankResult {
    pub trace: f64,
    pub norm: f64,
    pub r: f64,
}

/// Row moment profiles of a variance pattern.
pub fn row_profiles(vp: &VariancePattern) -> (Vec<f64>, Vec<f64>, f64) {
    let n = vp.n();
    let mut l2 = Vec::with_capacity(n);
    let mut l4 = Vec::with_capacity(n);
    let mut max_entry = 0.0f64;
    for i in 0..n {
        let mut s2 = 0.0;
        let mut s4 = 0.0;
        for j in 0..n {
            let b = vp.entry(i, j);
            s2 += b * b;
            s4 += b * b * b * b;
            max_entry = max_entry.max(b);
        }
        l2.push(s2.sqrt());
        l4.push(s4.sqrt().sqrt());
    }
    (l2, l4, max_entry)
}

/// `sigma = ||E X^2||^{1/2}`: dense eigensolve of `sum_k A_k^2` for
/// coefficient models, `max_i sqrt(sum_j b_ij^2)` for entrywise models.
pub fn sigma(model: &MatrixModel) -> Result<f64> {
    match model {
        MatrixModel::Covariance(_) => Err(Error::InvalidArgument(
            "sigma is undefined for covariance models; use effective_rank".into(),
        )),
        MatrixModel::CoefficientGaussian(ens) => {
            let sq = ens.sum_of_squares();
            let top = sym_eigenvalues(&sq).last().copied().unwrap_or(0.0).max(0.0);
            Ok(top.sqrt())
        }
        _ => {
            let vp = model.pattern().expect("entrywise model has a pattern");
            let (l2, _, _) = row_profiles(&vp);
            Ok(l2.iter().fold(0.0f64, |m, &v| m.max(v)))
        }
    }
}

/// Entry-variance profile of a coefficient ensemble: `sqrt(sum_k (A_k)_ij^2)`,
/// the pattern a matching independent-entry model would have.
fn entry_std_pattern(ens: &CoefficientEnsemble) -> VariancePattern {
    if let Some(vp) = ens.source_pattern() {
        return vp.clone();
    }
    let n = ens.n();
    let mut v = DMatrix::<f64>::zeros(n, n);
    for a in ens.coeffs() {
        for i in 0..n {
            for j in 0..n {
                v[(i, j)] += a[(i, j)] * a[(i, j)];
            }
        }
    }
    let b = v.map(|x| x.sqrt());
    VariancePattern::new(b).expect("entry variance pattern is valid")
}

fn ascent_objective(ens: &CoefficientEnsemble, v: &DVector<f64>) -> f64 {
    ens.coeffs()
        .iter()
        .map(|a| {
            let q = v.dot(&(a * v));
            q * q
        })
        .sum()
}

fn ascent_gradient(ens: &CoefficientEnsemble, v: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(v.len());
    for a in ens.coeffs() {
        let av = a * v;
        let q = v.dot(&av);
        g.axpy(4.0 * q, &av, 1.0);
    }
    g
}

/// Projected gradient ascent of `sum_k <v,A_k v>^2` on the unit sphere.
fn sphere_ascent(ens: &CoefficientEnsemble, restarts: usize, max_iter: usize, seed: u64) -> f64 {
    let n = ens.n();
    let mut best = 0.0f64;
    for r in 0..restarts {
        let mut rng = stream_rng(seed, r as u64);
        let mut v = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
        let nv = v.norm();
        if nv == 0.0 {
            continue;
        }
        v /= nv;
        let mut f = ascent_objective(ens, &v);
        let mut step = 0.1;
        for _ in 0..max_iter {
            let g = ascent_gradient(ens, &v);
            // tangential component on the sphere
            let gt = &g - &v * v.dot(&g);
            if gt.norm() < 1e-9 {
                break;
            }
            // backtracking line search on the retracted iterate
            let mut accepted = false;
            let mut s = step;
            for _ in 0..30 {
                let mut cand = &v + &gt * s;
                let cn = cand.norm();
                if cn > 0.0 {
                    cand /= cn;
                    let fc = ascent_objective(ens, &cand);
                    if fc > f {
                        v = cand;
                        f = fc;
                        step = (s * 1.5).min(1.0);
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        best = best.max(f);
    }
    best.max(0.0).sqrt()
}

/// `sigma_star`: exact `max_ij b_ij` for entrywise models; for coefficient
/// ensembles, the best value found by projected gradient ascent (a certified
/// lower bound on the supremum).
pub fn sigma_star(model: &MatrixModel, restarts: usize, max_iter: usize) -> Result<f64> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("sigma_star requires restarts >= 1".into()));
    }
    match model {
        MatrixModel::Covariance(_) => Err(Error::InvalidArgument(
            "sigma_star is undefined for covariance models".into(),
        )),
        MatrixModel::CoefficientGaussian(ens) => Ok(sphere_ascent(ens, restarts, max_iter, 0x5157)),
        _ => {
            let vp = model.pattern().expect("entrywise model has a pattern");
            let (_, _, max_entry) = row_profiles(&vp);
            Ok(max_entry)
        }
    }
}

// ---------------------------------------------------------------------------
// sigma-tilde: sup over commuting unitary triples of
// || sum_{k,l} A_k U1 A_l U2 A_k U3 A_l ||^{1/4}.
//
// Commuting unitaries are simultaneously diagonalizable, so triples are
// parametrized as U_i = W diag(phases_i) W^*, shared W. The optimizer is
// heuristic; the returned value is a lower estimate only.

fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex::new(x, 0.0))
}

fn complex_spectral_norm(m: &CMatrix) -> f64 {
    m.clone().svd(false, false).singular_values.iter().fold(0.0f64, |a, &b| a.max(b))
}

fn random_unitary(n: usize, rng: &mut impl Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    qr.q()
}

fn triple_from_phases(w: &CMatrix, phases: &[Vec<f64>; 3]) -> [CMatrix; 3] {
    let n = w.nrows();
    let wh = w.adjoint();
    std::array::from_fn(|m| {
        let d = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex::from_polar(1.0, phases[m][i])
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        w * d * &wh
    })
}

/// `sum_{k,l} A_k U1 A_l U2 A_k U3 A_l` for a pattern-derived ensemble,
/// using the entrywise closed form of the channel `B -> sum_l A_l B A_l`:
/// off-diagonal `(i,j) -> b_ij^2 B_ji`, diagonal `(i,i) -> sum_j b_ij^2 B_jj`.
fn pattern_second_order(vp: &VariancePattern, u: &[CMatrix; 3]) -> CMatrix {
    let n = vp.n();
    let mut t = CMatrix::zeros(n, n);
    let zero = Complex::new(0.0, 0.0);

    let channel = |b_mat: &CMatrix| -> CMatrix {
        let mut out = CMatrix::zeros(n, n);
        for i in 0..n {
            let mut diag = zero;
            for j in 0..n {
                let w = vp.entry(i, j) * vp.entry(i, j);
                diag += b_mat[(j, j)].scale(w);
                if i != j {
                    out[(i, j)] = b_mat[(j, i)].scale(w);
                }
            }
            out[(i, i)] = diag;
        }
        out
    };

    let mut add_term = |coef: f64, i: usize, j: usize| {
        // A = coef * e_i e_j^* + (i != j) coef * e_j e_i^*
        // B = U2 A U3
        let mut b_mat = CMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                let mut v = u[1][(r, i)] * u[2][(j, c)];
                if i != j {
                    v += u[1][(r, j)] * u[2][(i, c)];
                }
                b_mat[(r, c)] = v.scale(coef);
            }
        }
        let phi = channel(&b_mat);
        // A U1 phi: rows i and j of U1 * phi, scaled by coef
        for target in [i, j] {
            let source = if target == i { j } else { i };
            for c in 0..n {
                let mut acc = zero;
                for m in 0..n {
                    acc += u[0][(source, m)] * phi[(m, c)];
                }
                t[(target, c)] += acc.scale(coef);
            }
            if i == j {
                break;
            }
        }
    };

    for (i, j, b) in vp.nonzero_upper() {
        add_term(b, i, j);
    }
    t
}

fn general_second_order(ens: &CoefficientEnsemble, u: &[CMatrix; 3]) -> CMatrix {
    let n = ens.n();
    let coeffs: Vec<CMatrix> = ens.coeffs().iter().map(to_complex).collect();
    let mut t = CMatrix::zeros(n, n);
    for ak in &coeffs {
        let inner_kernel = &u[1] * ak * &u[2];
        let mut inner = CMatrix::zeros(n, n);
        for al in &coeffs {
            inner += al * &inner_kernel * al;
        }
        t += ak * &u[0] * inner;
    }
    t
}

fn evaluate_triple(ens: &CoefficientEnsemble, u: &[CMatrix; 3]) -> f64 {
    let t = match ens.source_pattern() {
        Some(vp) => pattern_second_order(vp, u),
        None => general_second_order(ens, u),
    };
    complex_spectral_norm(&t).max(0.0).powf(0.25)
}

/// Heuristic lower estimate of sigma-tilde by random restarts over the
/// shared diagonalizer and phases, with coordinate refinement on the
/// phases. The identity triple is always a candidate, and more restarts
/// never decrease the result for a fixed seed.
pub fn sigma_tilde_estimate(
    ens: &CoefficientEnsemble,
    restarts: usize,
    max_iter: usize,
    seed: u64,
) -> Result<f64> {
    let n = ens.n();
    let identity: [CMatrix; 3] = std::array::from_fn(|_| CMatrix::identity(n, n));
    let mut best = evaluate_triple(ens, &identity);

    for r in 0..restarts {
        let mut rng = stream_rng(seed, r as u64);
        let w = random_unitary(n, &mut rng);
        let mut phases: [Vec<f64>; 3] = std::array::from_fn(|_| {
            (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect()
        });
        let mut val = evaluate_triple(ens, &triple_from_phases(&w, &phases));
        // coordinate refinement; each iteration is one trial evaluation
        const DELTAS: [f64; 4] = {
            use std::f64::consts::PI;
            [PI, PI / 2.0, -PI / 2.0, PI / 4.0]
        };
        for it in 0..max_iter {
            let m = rng.random_range(0..3);
            let i = rng.random_range(0..n);
            let delta = DELTAS[it % DELTAS.len()];
            let old = phases[m][i];
            phases[m][i] = old + delta;
            let cand = evaluate_triple(ens, &triple_from_phases(&w, &phases));
            if cand > val {
                val = cand;
            } else {
                phases[m][i] = old;
            }
        }
        best = best.max(val);
    }
    Ok(best)
}

/// Effective rank `r = Tr / ||Sigma||` of a nonzero covariance matrix.
pub fn effective_rank(cm: &CovarianceModel) -> Result<EffectiveRankResult> {
    let sigma_m = cm.sigma();
    if sigma_m.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateModel("effective rank of the zero covariance".into()));
    }
    let trace = sigma_m.diagonal().iter().sum::<f64>();
    let norm = sym_eigenvalues(sigma_m)
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    Ok(EffectiveRankResult { trace, norm, r: trace / norm })
}

impl StructuralParams {
    /// Computes all structural parameters with default optimizer budgets.
    /// Covariance models get zeroed parameters (only the effective-rank
    /// path applies to them).
    pub fn compute(model: &MatrixModel, seed: u64) -> Result<Self> {
        match model {
            MatrixModel::Covariance(cm) => Ok(Self {
                sigma: 0.0,
                sigma_star: 0.0,
                sigma_tilde_lb: 0.0,
                row_l2: vec![0.0; cm.d()],
                row_l4: vec![0.0; cm.d()],
                max_entry: 0.0,
            }),
            MatrixModel::CoefficientGaussian(ens) => {
                let pseudo = entry_std_pattern(ens);
                let (row_l2, row_l4, max_entry) = row_profiles(&pseudo);
                let sigma = sigma(model)?;
                let sigma_star =
                    sphere_ascent(ens, SIGMA_STAR_RESTARTS, SIGMA_STAR_MAX_ITER, seed ^ 0xa5);
                let sigma_tilde_lb = sigma_tilde_estimate(
                    ens,
                    SIGMA_TILDE_RESTARTS,
                    SIGMA_TILDE_MAX_ITER,
                    seed ^ 0x7e,
                )?;
                Ok(Self { sigma, sigma_star, sigma_tilde_lb, row_l2, row_l4, max_entry })
            }
            _ => {
                let vp = model.pattern().expect("entrywise model has a pattern");
                let (row_l2, row_l4, max_entry) = row_profiles(&vp);
                let sigma = row_l2.iter().fold(0.0f64, |m, &v| m.max(v));
                // entrywise closed forms: sigma_star = max b_ij, and the
                // second-order parameter scales like the row l4 profile
                let sigma_tilde_lb = row_l4.iter().fold(0.0f64, |m, &v| m.max(v));
                Ok(Self { sigma, sigma_star: max_entry, sigma_tilde_lb, row_l2, row_l4, max_entry })
            }
        }
    }
}
