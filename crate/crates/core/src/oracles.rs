//! Independent numerical oracles used by the test suite: quadrature
//! values and reference densities that do not share code paths with the
//! estimators they validate.

use statrs::function::erf::erf;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Standard normal CDF.
pub fn normal_cdf(t: f64) -> f64 {
    0.5 * (1.0 + erf(t / std::f64::consts::SQRT_2))
}

/// `E max_i |g_i|` for `n` iid standard Gaussians, by quadrature of
/// `int_0^inf (1 - (2 Phi(t) - 1)^n) dt`.
pub fn expected_max_abs_gaussian(n: usize) -> f64 {
    let integrand = |t: f64| 1.0 - (2.0 * normal_cdf(t) - 1.0).powi(n as i32);
    simpson(integrand, 0.0, 20.0, 40_000)
}

/// `E |chi2_n / n - 1|` by quadrature against the chi-square density.
pub fn expected_chi_square_deviation(n: usize) -> f64 {
    let k = n as f64;
    let log_norm = -(k / 2.0) * std::f64::consts::LN_2 - statrs::function::gamma::ln_gamma(k / 2.0);
    let pdf = |x: f64| {
        if x <= 0.0 {
            0.0
        } else {
            (log_norm + (k / 2.0 - 1.0) * x.ln() - x / 2.0).exp()
        }
    };
    let upper = k + 40.0 * (2.0 * k).sqrt() + 40.0;
    simpson(|x| (x / k - 1.0).abs() * pdf(x), 0.0, upper, 80_000)
}

/// Per-bin mass of the standard semicircle law, density
/// `sqrt(4 - x^2) / (2 pi)` on `[-2, 2]`.
pub fn semicircle_bin_mass(edges: &[f64]) -> Vec<f64> {
    let density = |x: f64| {
        if x.abs() >= 2.0 {
            0.0
        } else {
            (4.0 - x * x).sqrt() / (2.0 * std::f64::consts::PI)
        }
    };
    edges
        .windows(2)
        .map(|w| {
            let a = w[0].max(-2.0);
            let b = w[1].min(2.0);
            if a >= b {
                0.0
            } else {
                simpson(density, a, b, 512)
            }
        })
        .collect()
}

/// Per-bin mass of the standard normal law.
pub fn normal_bin_mass(edges: &[f64]) -> Vec<f64> {
    edges.windows(2).map(|w| normal_cdf(w[1]) - normal_cdf(w[0])).collect()
}

/// Total variation distance between two finite measures given as bin
/// masses (same length), after normalizing each to a probability vector.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    0.5 * p
        .iter()
        .zip(q)
        .map(|(&a, &b)| (a / sp - b / sq).abs())
        .sum::<f64>()
}
