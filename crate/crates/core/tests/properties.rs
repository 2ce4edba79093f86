use nalgebra::DMatrix;
use proptest::prelude::*;

use randmat_core::bounds::{eval_conjecture1, eval_gine, eval_latala, eval_nck, eval_seginer};
use randmat_core::linalg::spectral_norm;
use randmat_core::model::{
    coefficients_from_pattern, dilate, CovarianceModel, MatrixModel, SparsityGraph,
    VariancePattern,
};
use randmat_core::moments::{direct_trace_moment, shape_trace_moment, EntryLaw};
use randmat_core::sampler::sample_matrix;
use randmat_core::structural::{
    effective_rank, sigma_tilde_estimate, StructuralParams,
};

fn pattern_from_upper(n: usize, upper: &[f64]) -> VariancePattern {
    let mut b = DMatrix::zeros(n, n);
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            b[(i, j)] = upper[idx];
            b[(j, i)] = upper[idx];
            idx += 1;
        }
    }
    VariancePattern::new(b).unwrap()
}

fn pattern_strategy(max_n: usize) -> impl Strategy<Value = VariancePattern> {
    (2..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.0f64..2.0, n * (n + 1) / 2)
            .prop_map(move |upper| pattern_from_upper(n, &upper))
    })
}

fn rect_strategy() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(n, m)| {
        prop::collection::vec(-2.0f64..2.0, n * m)
            .prop_map(move |vals| DMatrix::from_row_slice(n, m, &vals))
    })
}

proptest! {
    #[test]
    fn dilation_preserves_spectral_norm(rect in rect_strategy()) {
        let top_sv = rect
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .fold(0.0f64, |m, &v| m.max(v));
        let dilated = dilate(&rect).unwrap();
        let norm = spectral_norm(&dilated, 1e-10).unwrap();
        prop_assert!((norm - top_sv).abs() <= 1e-9 * (1.0 + top_sv));
    }

    #[test]
    fn coefficient_sampling_is_coupled_to_entrywise(vp in pattern_strategy(5), seed in 0u64..1000) {
        let mut b = vp.matrix().clone();
        b[(0, 0)] += 1.0;
        let vp = VariancePattern::new(b).unwrap();
        let ens = coefficients_from_pattern(&vp).unwrap();
        let entrywise = sample_matrix(&MatrixModel::IndependentGaussian(vp), seed).unwrap();
        let coefficient = sample_matrix(&MatrixModel::CoefficientGaussian(ens), seed).unwrap();
        prop_assert!((&entrywise - &coefficient).iter().all(|&d| d.abs() < 1e-12));
    }

    #[test]
    fn sum_of_squares_matches_brute_force(vp in pattern_strategy(5)) {
        let mut b = vp.matrix().clone();
        b[(0, 1)] += 0.5;
        b[(1, 0)] += 0.5;
        let vp = VariancePattern::new(b).unwrap();
        let ens = coefficients_from_pattern(&vp).unwrap();
        let closed = ens.sum_of_squares();
        let n = ens.n();
        let mut brute = DMatrix::<f64>::zeros(n, n);
        for a in ens.coeffs() {
            brute += a * a;
        }
        prop_assert!((&closed - &brute).iter().all(|&d| d.abs() < 1e-12));
        // E X^2 is diagonal with row variance sums for entrywise models
        for i in 0..n {
            let row_var: f64 = (0..n).map(|j| vp.entry(i, j).powi(2)).sum();
            prop_assert!((closed[(i, i)] - row_var).abs() < 1e-12);
            for j in 0..n {
                if i != j {
                    prop_assert!(closed[(i, j)].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bounds_are_permutation_invariant(vp in pattern_strategy(6), perm_seed in 0u64..100) {
        let n = vp.n();
        let mut order: Vec<usize> = (0..n).collect();
        // Fisher-Yates with a tiny deterministic LCG
        let mut state = perm_seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let j = (state >> 33) as usize % (i + 1);
            order.swap(i, j);
        }
        let permuted = VariancePattern::new(DMatrix::from_fn(n, n, |i, j| {
            vp.entry(order[i], order[j])
        })).unwrap();
        for (a, b) in [
            (eval_latala(&vp), eval_latala(&permuted)),
            (eval_gine(&vp), eval_gine(&permuted)),
            (eval_conjecture1(&vp), eval_conjecture1(&permuted)),
            (eval_seginer(&vp, n), eval_seginer(&permuted, n)),
        ] {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn bounds_are_positively_homogeneous(vp in pattern_strategy(5), c in 0.1f64..4.0) {
        let scaled = vp.scaled(c).unwrap();
        let n = vp.n();
        let model = MatrixModel::IndependentGaussian(vp.clone());
        let smodel = MatrixModel::IndependentGaussian(scaled.clone());
        let p1 = StructuralParams::compute(&model, 0).unwrap();
        let p2 = StructuralParams::compute(&smodel, 0).unwrap();
        let (lo1, hi1) = eval_nck(&p1, n);
        let (lo2, hi2) = eval_nck(&p2, n);
        for (a, b) in [
            (lo1, lo2),
            (hi1, hi2),
            (eval_latala(&vp), eval_latala(&scaled)),
            (eval_gine(&vp), eval_gine(&scaled)),
            (eval_conjecture1(&vp), eval_conjecture1(&scaled)),
        ] {
            prop_assert!((c * a - b).abs() <= 1e-9 * (1.0 + c * a.abs()));
        }
    }

    #[test]
    fn sigma_tilde_is_monotone_in_restarts(
        vp in pattern_strategy(4),
        r1 in 0usize..3,
        extra in 0usize..3,
        seed in 0u64..50,
    ) {
        let mut b = vp.matrix().clone();
        b[(0, 0)] += 1.0;
        let vp = VariancePattern::new(b).unwrap();
        let ens = coefficients_from_pattern(&vp).unwrap();
        let few = sigma_tilde_estimate(&ens, r1, 4, seed).unwrap();
        let more = sigma_tilde_estimate(&ens, r1 + extra, 4, seed).unwrap();
        prop_assert!(more >= few - 1e-12);
    }

    #[test]
    fn effective_rank_is_scale_invariant(diag in prop::collection::vec(0.01f64..4.0, 1..8), c in 0.1f64..10.0) {
        let d = diag.len();
        let sigma = DMatrix::from_fn(d, d, |i, j| if i == j { diag[i] } else { 0.0 });
        let r1 = effective_rank(&CovarianceModel::new(sigma.clone(), 5).unwrap()).unwrap().r;
        let r2 = effective_rank(&CovarianceModel::new(sigma * c, 5).unwrap()).unwrap().r;
        prop_assert!((r1 - r2).abs() <= 1e-9 * r1);
        prop_assert!((1.0..=d as f64 + 1e-9).contains(&r1));
    }

    #[test]
    fn moment_oracles_agree_on_random_graphs(
        n in 2usize..=4,
        edge_mask in 0u32..1024,
        allow_loops in any::<bool>(),
        p in 1usize..=2,
    ) {
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i..n {
                if i == j && !allow_loops {
                    continue;
                }
                pairs.push((i, j));
            }
        }
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(idx, _)| edge_mask & (1 << idx) != 0)
            .map(|(_, &e)| e)
            .collect();
        let g = SparsityGraph::new(n, edges, allow_loops).unwrap();
        let vp = g.induced_pattern();
        for law in [EntryLaw::Gaussian, EntryLaw::Rademacher] {
            let direct = direct_trace_moment(&vp, p, law).unwrap();
            let shaped = shape_trace_moment(&g, p, law).unwrap();
            prop_assert_eq!(direct.value, shaped.value);
        }
    }
}
