//! Exact even trace moments `E Tr X^{2p}` by direct walk enumeration and
//! by shape counting, with rational arithmetic throughout.
//!
//! A closed walk of length `2p` contributes the product of its entry
//! standard deviations times the product of per-edge entry-law moments.
//! Both entry laws here are symmetric, so only walks traversing every
//! undirected edge an even number of times contribute.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::rational::Ratio;
use num::{BigRational, One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{MatrixModel, SparsityGraph, VariancePattern};

/// Hard cap on enumeration work in `direct_trace_moment`.
pub const DIRECT_STEP_BUDGET: u64 = 100_000_000;

/// Largest exponent accepted by `gaussian_moment`.
pub const MAX_GAUSSIAN_EXPONENT: usize = 40;

/// Largest `p` accepted by the shape enumerator.
pub const MAX_SHAPE_P: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryLaw {
    Gaussian,
    Rademacher,
}

impl EntryLaw {
    /// Exact `E[g^m]` for a standard entry of this law.
    pub fn moment(self, m: usize) -> BigRational {
        if m % 2 == 1 {
            return BigRational::zero();
        }
        match self {
            EntryLaw::Gaussian => Ratio::from_integer(double_factorial_odd(m)),
            EntryLaw::Rademacher => BigRational::one(),
        }
    }
}

/// `(m-1)!! = 1 * 3 * ... * (m-1)` for even `m`; `1` when `m = 0`.
fn double_factorial_odd(m: usize) -> BigInt {
    let mut acc = BigInt::one();
    let mut k = 1usize;
    while k < m {
        acc *= BigInt::from(k);
        k += 2;
    }
    acc
}

/// Exact Gaussian moment `E[g^{2p}] = (2p-1)!!` for even exponents up to
/// `MAX_GAUSSIAN_EXPONENT`.
pub fn gaussian_moment(two_p: usize) -> Result<BigInt> {
    if two_p % 2 != 0 {
        return Err(Error::InvalidArgument("gaussian_moment requires an even exponent".into()));
    }
    if two_p > MAX_GAUSSIAN_EXPONENT {
        return Err(Error::InvalidArgument(format!(
            "exponent {two_p} exceeds the supported maximum {MAX_GAUSSIAN_EXPONENT}"
        )));
    }
    Ok(double_factorial_odd(two_p))
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentResult {
    #[serde(serialize_with = "serialize_rational")]
    pub value: BigRational,
    pub p: usize,
    pub method: String,
    pub entry_law: EntryLaw,
}

impl MomentResult {
    pub fn value_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::NAN)
    }
}

fn serialize_rational<S: serde::Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn rational_from(v: f64) -> Result<BigRational> {
    BigRational::from_float(v)
        .ok_or_else(|| Error::Numeric(format!("non-finite value {v} in pattern")))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Exact `E Tr X^{2p}` by enumerating all closed walks of length `2p`
/// through the nonzero entries of the pattern.
pub fn direct_trace_moment(vp: &VariancePattern, p: usize, law: EntryLaw) -> Result<MomentResult> {
    if p == 0 {
        return Err(Error::InvalidArgument("moment order p must be at least 1".into()));
    }
    let n = vp.n();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| vp.entry(i, j) != 0.0).collect())
        .collect();
    let mut total = BigRational::zero();
    let mut steps = 0u64;
    let mut walk = Vec::with_capacity(2 * p);
    for start in 0..n {
        walk.clear();
        walk.push(start);
        walk_sum(vp, &neighbors, law, 2 * p, start, &mut walk, &mut steps, &mut total)?;
    }
    Ok(MomentResult { value: total, p, method: "direct".into(), entry_law: law })
}

fn walk_sum(
    vp: &VariancePattern,
    neighbors: &[Vec<usize>],
    law: EntryLaw,
    len: usize,
    start: usize,
    walk: &mut Vec<usize>,
    steps: &mut u64,
    total: &mut BigRational,
) -> Result<()> {
    *steps += 1;
    if *steps > DIRECT_STEP_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "direct enumeration exceeded {DIRECT_STEP_BUDGET} steps"
        )));
    }
    if walk.len() == len {
        let last = *walk.last().unwrap();
        if vp.entry(last, start) == 0.0 {
            return Ok(());
        }
        let mut mult: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in 0..len {
            let a = walk[t];
            let b = walk[(t + 1) % len];
            *mult.entry(edge_key(a, b)).or_insert(0) += 1;
        }
        if mult.values().any(|&m| m % 2 == 1) {
            return Ok(());
        }
        let mut term = BigRational::one();
        for (&(a, b), &m) in &mult {
            let sd = rational_from(vp.entry(a, b))?;
            term *= num::pow::pow(sd, m) * law.moment(m);
        }
        *total += term;
        return Ok(());
    }
    let here = *walk.last().unwrap();
    for &next in &neighbors[here] {
        walk.push(next);
        walk_sum(vp, neighbors, law, len, start, walk, steps, total)?;
        walk.pop();
    }
    Ok(())
}

/// A canonical closed-walk shape: the vertex sequence relabeled in order
/// of first occurrence, with its edge-multiplicity profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShapeStats {
    /// The walk `v_1, ..., v_{2p}` with 1-based first-occurrence labels;
    /// the closing step returns to `v_1`.
    pub walk: Vec<usize>,
    /// `multiplicity -> number of distinct edges with that multiplicity`.
    pub multiplicities: BTreeMap<usize, usize>,
    pub distinct_vertices: usize,
    pub distinct_edges: usize,
    pub has_loop: bool,
}

impl ShapeStats {
    fn from_walk(walk: &[usize]) -> Self {
        let len = walk.len();
        let mut by_edge: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in 0..len {
            let a = walk[t];
            let b = walk[(t + 1) % len];
            *by_edge.entry(edge_key(a, b)).or_insert(0) += 1;
        }
        let mut multiplicities: BTreeMap<usize, usize> = BTreeMap::new();
        for &m in by_edge.values() {
            *multiplicities.entry(m).or_insert(0) += 1;
        }
        ShapeStats {
            walk: walk.to_vec(),
            distinct_vertices: *walk.iter().max().unwrap(),
            distinct_edges: by_edge.len(),
            has_loop: by_edge.keys().any(|&(a, b)| a == b),
            multiplicities,
        }
    }

    /// Edges of the shape as canonical 1-based vertex pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let len = self.walk.len();
        let mut edges: Vec<(usize, usize)> = (0..len)
            .map(|t| edge_key(self.walk[t], self.walk[(t + 1) % len]))
            .collect();
        edges.sort();
        edges.dedup();
        edges
    }

    /// Entry-law weight `c(s) = prod_l E[g^l]^{m_l}`.
    pub fn weight(&self, law: EntryLaw) -> BigRational {
        let mut w = BigRational::one();
        for (&l, &m) in &self.multiplicities {
            w *= num::pow::pow(law.moment(l), m);
        }
        w
    }
}

/// All canonical even shapes of closed walks of length `2p`, for
/// `p <= MAX_SHAPE_P`. Every undirected edge of a listed shape is
/// traversed an even number of times.
pub fn enumerate_even_shapes(p: usize, allow_loops: bool) -> Result<Vec<ShapeStats>> {
    if p == 0 || p > MAX_SHAPE_P {
        return Err(Error::InvalidArgument(format!(
            "shape enumeration supports 1 <= p <= {MAX_SHAPE_P}"
        )));
    }
    let len = 2 * p;
    let mut shapes = Vec::new();
    let mut walk = vec![1usize];
    extend_shape(len, allow_loops, &mut walk, &mut shapes);
    Ok(shapes)
}

fn extend_shape(len: usize, allow_loops: bool, walk: &mut Vec<usize>, out: &mut Vec<ShapeStats>) {
    if walk.len() == len {
        if !allow_loops && *walk.last().unwrap() == walk[0] {
            return;
        }
        let stats = ShapeStats::from_walk(walk);
        if stats.multiplicities.keys().all(|&m| m % 2 == 0) {
            debug_assert!(stats.distinct_vertices <= len / 2 + 1);
            out.push(stats);
        }
        return;
    }
    let here = *walk.last().unwrap();
    let max_label = *walk.iter().max().unwrap();
    for next in 1..=max_label + 1 {
        if next == here && !allow_loops {
            continue;
        }
        walk.push(next);
        extend_shape(len, allow_loops, walk, out);
        walk.pop();
    }
}

/// Number of injective maps from the shape's vertices into the graph that
/// send every shape edge to a graph edge.
pub fn count_embeddings(shape: &ShapeStats, g: &SparsityGraph) -> BigInt {
    let v = shape.distinct_vertices;
    let edges = shape.edges();
    let mut assignment = vec![usize::MAX; v + 1];
    let mut used = vec![false; g.n()];
    embed(g, &edges, 1, v, &mut assignment, &mut used)
}

fn embed(
    g: &SparsityGraph,
    edges: &[(usize, usize)],
    next: usize,
    v: usize,
    assignment: &mut Vec<usize>,
    used: &mut Vec<bool>,
) -> BigInt {
    if next > v {
        return BigInt::one();
    }
    let mut count = BigInt::zero();
    'candidates: for cand in 0..g.n() {
        if used[cand] {
            continue;
        }
        assignment[next] = cand;
        for &(a, b) in edges {
            if a > next || b > next {
                continue;
            }
            if !g.has_edge(assignment[a], assignment[b]) {
                assignment[next] = usize::MAX;
                continue 'candidates;
            }
        }
        used[cand] = true;
        count += embed(g, edges, next + 1, v, assignment, used);
        used[cand] = false;
        assignment[next] = usize::MAX;
    }
    count
}

/// `E Tr X^{2p}` for the unit pattern induced by a sparsity graph, as a
/// weighted sum of shape embedding counts.
pub fn shape_trace_moment(g: &SparsityGraph, p: usize, law: EntryLaw) -> Result<MomentResult> {
    let shapes = enumerate_even_shapes(p, true)?;
    let mut total = BigRational::zero();
    for s in &shapes {
        let emb = count_embeddings(s, g);
        if emb.is_zero() {
            continue;
        }
        total += s.weight(law) * Ratio::from_integer(emb);
    }
    Ok(MomentResult { value: total, p, method: "shapes".into(), entry_law: law })
}

#[derive(Debug, Clone, Serialize)]
pub struct CompressionCheck {
    pub p: usize,
    pub k: usize,
    #[serde(serialize_with = "serialize_rational")]
    pub lhs: BigRational,
    #[serde(serialize_with = "serialize_rational")]
    pub rhs: BigRational,
    pub holds: bool,
}

/// Verifies `E Tr X^{2p} <= (n / (k+p)) E Tr Y^{2p}` where `k` is the
/// maximum degree of the graph and `Y` is the Gaussian Wigner matrix with
/// loops on `k + p` vertices.
pub fn compression_check(g: &SparsityGraph, p: usize) -> Result<CompressionCheck> {
    let k = g.max_degree();
    let lhs = shape_trace_moment(g, p, EntryLaw::Gaussian)?.value;
    let small = SparsityGraph::complete(k + p, true)?;
    let small_moment = shape_trace_moment(&small, p, EntryLaw::Gaussian)?.value;
    let rhs = Ratio::new(BigInt::from(g.n()), BigInt::from(k + p)) * small_moment;
    let holds = lhs <= rhs;
    Ok(CompressionCheck { p, k, lhs, rhs, holds })
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentInequalityCheck {
    pub p: usize,
    #[serde(serialize_with = "serialize_rational")]
    pub lhs: BigRational,
    #[serde(serialize_with = "serialize_rational")]
    pub rhs: BigRational,
    pub holds: bool,
}

/// Exact check of `E Tr X^{2p} <= (2p-1)^p Tr[(E X^2)^p]` for an
/// entrywise Gaussian model; `E X^2` is diagonal so the right-hand side
/// is `(2p-1)^p sum_i (sum_j b_ij^2)^p`.
pub fn nck_moment_check(model: &MatrixModel, p: usize) -> Result<MomentInequalityCheck> {
    let vp = model.pattern().ok_or_else(|| {
        Error::InvalidArgument("moment check requires an entrywise variance pattern".into())
    })?;
    let law = if model.is_rademacher() { EntryLaw::Rademacher } else { EntryLaw::Gaussian };
    let lhs = direct_trace_moment(&vp, p, law)?.value;
    let n = vp.n();
    let mut trace_pow = BigRational::zero();
    for i in 0..n {
        let mut row = BigRational::zero();
        for j in 0..n {
            let sd = rational_from(vp.entry(i, j))?;
            row += num::pow::pow(sd, 2);
        }
        trace_pow += num::pow::pow(row, p);
    }
    let rhs = Ratio::from_integer(num::pow::pow(BigInt::from(2 * p - 1), p)) * trace_pow;
    let slack = Ratio::new(BigInt::from(1), BigInt::from(1_000_000_000u64)) * &rhs;
    let holds = lhs <= &rhs + slack;
    Ok(MomentInequalityCheck { p, lhs, rhs, holds })
}

/// Exact check that Rademacher trace moments never exceed the Gaussian
/// moments of the same pattern.
pub fn subgaussian_comparison_check(vp: &VariancePattern, p: usize) -> Result<MomentInequalityCheck> {
    let lhs = direct_trace_moment(vp, p, EntryLaw::Rademacher)?.value;
    let rhs = direct_trace_moment(vp, p, EntryLaw::Gaussian)?.value;
    let holds = lhs <= rhs;
    Ok(MomentInequalityCheck { p, lhs, rhs, holds })
}

/// One row per shape: walk, vertex/edge counts, multiplicity profile and
/// both law weights.
pub fn shapes_csv(p: usize, allow_loops: bool) -> Result<String> {
    let shapes = enumerate_even_shapes(p, allow_loops)?;
    let mut out = String::from(
        "walk,distinct_vertices,distinct_edges,has_loop,multiplicities,gaussian_weight,rademacher_weight\n",
    );
    for s in &shapes {
        let walk: Vec<String> = s.walk.iter().map(|v| v.to_string()).collect();
        let mults: Vec<String> = s
            .multiplicities
            .iter()
            .map(|(l, m)| format!("{l}^{m}"))
            .collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            walk.join("-"),
            s.distinct_vertices,
            s.distinct_edges,
            s.has_loop,
            mults.join(" "),
            s.weight(EntryLaw::Gaussian),
            s.weight(EntryLaw::Rademacher),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_diagonal, build_wigner};

    fn big(v: i64) -> BigRational {
        Ratio::from_integer(BigInt::from(v))
    }

    #[test]
    fn gaussian_moments() {
        assert_eq!(gaussian_moment(0).unwrap(), BigInt::from(1));
        assert_eq!(gaussian_moment(2).unwrap(), BigInt::from(1));
        assert_eq!(gaussian_moment(4).unwrap(), BigInt::from(3));
        assert_eq!(gaussian_moment(6).unwrap(), BigInt::from(15));
        assert_eq!(gaussian_moment(8).unwrap(), BigInt::from(105));
        assert!(gaussian_moment(3).is_err());
        assert!(gaussian_moment(42).is_err());
    }

    #[test]
    fn diagonal_moments_are_scalar_moments() {
        let vp = build_diagonal(5).unwrap().pattern().unwrap();
        for p in 1..=3 {
            let g = direct_trace_moment(&vp, p, EntryLaw::Gaussian).unwrap();
            let expected = Ratio::from_integer(BigInt::from(5) * gaussian_moment(2 * p).unwrap());
            assert_eq!(g.value, expected);
            let r = direct_trace_moment(&vp, p, EntryLaw::Rademacher).unwrap();
            assert_eq!(r.value, big(5));
        }
    }

    #[test]
    fn wigner_second_moment() {
        let vp = build_wigner(4).unwrap().pattern().unwrap();
        let m = direct_trace_moment(&vp, 1, EntryLaw::Gaussian).unwrap();
        assert_eq!(m.value, big(16));
    }

    #[test]
    fn shape_enumeration_small_cases() {
        let s1 = enumerate_even_shapes(1, false).unwrap();
        assert_eq!(s1.len(), 1);
        assert_eq!(s1[0].walk, vec![1, 2]);

        let s1l = enumerate_even_shapes(1, true).unwrap();
        let walks: Vec<Vec<usize>> = s1l.iter().map(|s| s.walk.clone()).collect();
        assert_eq!(walks, vec![vec![1, 1], vec![1, 2]]);

        let s2 = enumerate_even_shapes(2, false).unwrap();
        let walks: Vec<Vec<usize>> = s2.iter().map(|s| s.walk.clone()).collect();
        assert_eq!(walks, vec![vec![1, 2, 1, 2], vec![1, 2, 1, 3], vec![1, 2, 3, 2]]);
        for s in &s2 {
            assert!(s.distinct_vertices <= 3);
        }
        assert!(enumerate_even_shapes(0, true).is_err());
        assert!(enumerate_even_shapes(6, true).is_err());
    }

    #[test]
    fn embeddings_are_falling_factorials_on_complete_graphs() {
        let g = SparsityGraph::complete(6, true).unwrap();
        let pair = &enumerate_even_shapes(1, false).unwrap()[0];
        assert_eq!(count_embeddings(pair, &g), BigInt::from(30));
        let loop_shape = ShapeStats::from_walk(&[1, 1]);
        assert_eq!(count_embeddings(&loop_shape, &g), BigInt::from(6));
        let three = ShapeStats::from_walk(&[1, 2, 1, 3]);
        assert_eq!(count_embeddings(&three, &g), BigInt::from(120));
    }

    #[test]
    fn shape_and_direct_moments_agree() {
        let graphs = vec![
            SparsityGraph::complete(3, true).unwrap(),
            SparsityGraph::complete(4, false).unwrap(),
            SparsityGraph::new(4, [(0, 1), (1, 2), (2, 3)], false).unwrap(),
            SparsityGraph::new(3, [(0, 0), (0, 1)], true).unwrap(),
        ];
        for g in &graphs {
            let vp = g.induced_pattern();
            for p in 1..=3 {
                for law in [EntryLaw::Gaussian, EntryLaw::Rademacher] {
                    let direct = direct_trace_moment(&vp, p, law).unwrap();
                    let shaped = shape_trace_moment(g, p, law).unwrap();
                    assert_eq!(direct.value, shaped.value, "p={p} law={law:?}");
                }
            }
        }
    }

    #[test]
    fn compression_path_example() {
        let path = SparsityGraph::new(3, [(0, 1), (1, 2)], false).unwrap();
        let check = compression_check(&path, 1).unwrap();
        assert_eq!(check.k, 2);
        assert_eq!(check.lhs, big(4));
        assert_eq!(check.rhs, big(9));
        assert!(check.holds);
    }

    #[test]
    fn compression_holds_on_samples() {
        let graphs = vec![
            SparsityGraph::complete(4, true).unwrap(),
            SparsityGraph::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], false).unwrap(),
            SparsityGraph::new(6, [(0, 1), (2, 3), (4, 5)], false).unwrap(),
        ];
        for g in &graphs {
            for p in 1..=2 {
                assert!(compression_check(g, p).unwrap().holds);
            }
        }
    }

    #[test]
    fn nck_moment_inequality() {
        let w = build_wigner(3).unwrap();
        for p in 1..=3 {
            assert!(nck_moment_check(&w, p).unwrap().holds);
        }
        let d = build_diagonal(4).unwrap();
        assert!(nck_moment_check(&d, 2).unwrap().holds);
    }

    #[test]
    fn rademacher_below_gaussian() {
        let vp = build_wigner(3).unwrap().pattern().unwrap();
        for p in 1..=3 {
            let check = subgaussian_comparison_check(&vp, p).unwrap();
            assert!(check.holds);
            if p > 1 {
                assert!(check.lhs < check.rhs);
            }
        }
    }

    #[test]
    fn shapes_csv_has_header_and_rows() {
        let csv = shapes_csv(2, false).unwrap();
        let lines: Vec<&str> = csv.trim().lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("walk,"));
        assert!(lines[1].starts_with("1-2-1-2,"));
    }
}
