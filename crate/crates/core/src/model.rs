//! Matrix-structure models: variance patterns, coefficient ensembles,
//! sparsity graphs, and covariance models, plus builders for the named
//! benchmark ensembles.
//!
//! All indices are 0-based in storage and in serialized form.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Symmetric pattern of entry standard deviations for an
/// independent-entry model `X_ij = b_ij g_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariancePattern {
    n: usize,
    b: DMatrix<f64>,
}

impl VariancePattern {
    pub fn new(b: DMatrix<f64>) -> Result<Self> {
        let n = b.nrows();
        if n == 0 {
            return Err(Error::InvalidDimension("pattern must be nonempty".into()));
        }
        if b.ncols() != n {
            return Err(Error::InvalidDimension(format!(
                "pattern must be square, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = b[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "pattern entry ({i},{j}) = {v} must be finite and >= 0"
                    )));
                }
                if b[(i, j)] != b[(j, i)] {
                    return Err(Error::InvalidArgument(format!(
                        "pattern must be symmetric, mismatch at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { n, b })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.b[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Nonzero upper-triangle entries in sampling order: diagonal entries
    /// first (ascending i), then off-diagonal i < j in row-major order.
    /// This order is the coupling contract with `coefficients_from_pattern`.
    pub fn nonzero_upper(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            if self.b[(i, i)] > 0.0 {
                out.push((i, i, self.b[(i, i)]));
            }
        }
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.b[(i, j)] > 0.0 {
                    out.push((i, j, self.b[(i, j)]));
                }
            }
        }
        out
    }

    /// Fraction of nonzero entries in the full matrix.
    pub fn fill(&self) -> f64 {
        let nz = self.b.iter().filter(|&&v| v > 0.0).count();
        nz as f64 / (self.n * self.n) as f64
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.b * c)
    }
}

/// Representation `X = sum_k g_k A_k` with fixed symmetric coefficients.
#[derive(Debug, Clone)]
pub struct CoefficientEnsemble {
    n: usize,
    coeffs: Vec<DMatrix<f64>>,
    // Set when the ensemble was derived from an entrywise pattern; enables
    // closed-form paths (sum of squares, channel evaluation).
    source_pattern: Option<VariancePattern>,
}

impl CoefficientEnsemble {
    pub fn new(coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::DegenerateModel(
                "coefficient ensemble must contain at least one matrix".into(),
            ));
        }
        let n = coeffs[0].nrows();
        if n == 0 {
            return Err(Error::InvalidDimension("coefficients must be nonempty".into()));
        }
        for (k, a) in coeffs.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::InvalidDimension(format!(
                    "coefficient {k} has shape {}x{}, expected {n}x{n}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            for i in 0..n {
                for j in 0..i {
                    if a[(i, j)] != a[(j, i)] {
                        return Err(Error::InvalidArgument(format!(
                            "coefficient {k} is not symmetric at ({i},{j})"
                        )));
                    }
                }
            }
        }
        Ok(Self { n, coeffs, source_pattern: None })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn source_pattern(&self) -> Option<&VariancePattern> {
        self.source_pattern.as_ref()
    }

    /// `sum_k A_k^2`, exact closed form when pattern-derived.
    pub fn sum_of_squares(&self) -> DMatrix<f64> {
        if let Some(vp) = &self.source_pattern {
            let n = self.n;
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                let row_sq: f64 = (0..n).map(|j| vp.entry(i, j).powi(2)).sum();
                m[(i, i)] = row_sq;
            }
            return m;
        }
        let mut m = DMatrix::zeros(self.n, self.n);
        for a in &self.coeffs {
            m += a * a;
        }
        m
    }
}

/// Undirected sparsity graph on `[0, n)`; self-loops permitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    allow_loops: bool,
}

impl SparsityGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, allow_loops: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("graph must have at least one vertex".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a},{b}) out of range for n={n}"
                )));
            }
            if a == b && !allow_loops {
                return Err(Error::InvalidArgument(format!(
                    "loop at vertex {a} but loops are not allowed"
                )));
            }
            let e = (a.min(b), a.max(b));
            if !set.insert(e) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({},{})", e.0, e.1)));
            }
        }
        Ok(Self { n, edges: set, allow_loops })
    }

    /// Complete graph on `n` vertices, with a loop at every vertex when
    /// `loops` is set. With loops this induces the Wigner pattern.
    pub fn complete(n: usize, loops: bool) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            if loops {
                edges.push((i, i));
            }
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        Self::new(n, edges, loops)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn allow_loops(&self) -> bool {
        self.allow_loops
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Number of neighbors of `v`; a loop counts once (v is its own neighbor).
    pub fn degree(&self, v: usize) -> usize {
        let mut d = 0;
        for &(a, b) in &self.edges {
            if a == v || b == v {
                d += 1;
            }
        }
        d
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// 0/1 variance pattern with `b_ij = 1` iff `{i,j}` is an edge.
    pub fn induced_pattern(&self) -> VariancePattern {
        let mut b = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            b[(i, j)] = 1.0;
            b[(j, i)] = 1.0;
        }
        VariancePattern::new(b).expect("adjacency pattern is valid by construction")
    }
}

/// Gaussian sample-covariance model: `n` i.i.d. centered samples in R^d
/// with covariance `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    d: usize,
    sigma: DMatrix<f64>,
    n_samples: usize,
}

impl CovarianceModel {
    pub fn new(sigma: DMatrix<f64>, n_samples: usize) -> Result<Self> {
        let d = sigma.nrows();
        if d == 0 || sigma.ncols() != d {
            return Err(Error::InvalidDimension(format!(
                "covariance must be square and nonempty, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if n_samples == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        for i in 0..d {
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "covariance must be symmetric, mismatch at ({i},{j})"
                    )));
                }
            }
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("covariance has non-finite entries".into()));
        }
        // PSD up to numerical tolerance; slightly negative eigenvalues are
        // clipped at sampling time.
        let eig = sigma.clone().symmetric_eigen();
        let max_abs = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if min < -1e-10 * max_abs {
            return Err(Error::InvalidArgument(format!(
                "covariance is not positive semidefinite (lambda_min = {min})"
            )));
        }
        Ok(Self { d, sigma, n_samples })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }
}

/// Umbrella over the supported random-matrix laws.
#[derive(Debug, Clone)]
pub enum MatrixModel {
    IndependentGaussian(VariancePattern),
    CoefficientGaussian(CoefficientEnsemble),
    SparseWigner(SparsityGraph),
    IndependentRademacher(VariancePattern),
    Covariance(CovarianceModel),
}

impl MatrixModel {
    /// Matrix dimension (d for covariance models).
    pub fn dim(&self) -> usize {
        match self {
            MatrixModel::IndependentGaussian(vp) | MatrixModel::IndependentRademacher(vp) => vp.n(),
            MatrixModel::CoefficientGaussian(e) => e.n(),
            MatrixModel::SparseWigner(g) => g.n(),
            MatrixModel::Covariance(cm) => cm.d(),
        }
    }

    /// Entrywise variance pattern, when the model has one.
    pub fn pattern(&self) -> Option<VariancePattern> {
        match self {
            MatrixModel::IndependentGaussian(vp) | MatrixModel::IndependentRademacher(vp) => {
                Some(vp.clone())
            }
            MatrixModel::SparseWigner(g) => Some(g.induced_pattern()),
            _ => None,
        }
    }

    pub fn is_rademacher(&self) -> bool {
        matches!(self, MatrixModel::IndependentRademacher(_))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            MatrixModel::IndependentGaussian(_) => "independent_gaussian",
            MatrixModel::CoefficientGaussian(_) => "coefficient_gaussian",
            MatrixModel::SparseWigner(_) => "sparse_wigner",
            MatrixModel::IndependentRademacher(_) => "independent_rademacher",
            MatrixModel::Covariance(_) => "covariance",
        }
    }
}

/// Wigner model: `b_ij = 1` everywhere, diagonal included.
pub fn build_wigner(n: usize) -> Result<MatrixModel> {
    if n == 0 {
        return Err(Error::InvalidDimension("wigner requires n >= 1".into()));
    }
    let b = DMatrix::from_element(n, n, 1.0);
    Ok(MatrixModel::IndependentGaussian(VariancePattern::new(b)?))
}

/// Diagonal model: independent standard Gaussians on the diagonal.
pub fn build_diagonal(n: usize) -> Result<MatrixModel> {
    if n == 0 {
        return Err(Error::InvalidDimension("diagonal requires n >= 1".into()));
    }
    Ok(MatrixModel::IndependentGaussian(VariancePattern::new(
        DMatrix::identity(n, n),
    )?))
}

/// Block-diagonal model: `n/k` independent k x k Wigner blocks.
pub fn build_block(n: usize, k: usize) -> Result<MatrixModel> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidDimension("block requires n, k >= 1".into()));
    }
    if k > n {
        return Err(Error::InvalidDimension(format!("block size k={k} exceeds n={n}")));
    }
    if n % k != 0 {
        return Err(Error::Divisibility(format!("k={k} does not divide n={n}")));
    }
    let mut b = DMatrix::zeros(n, n);
    for blk in 0..n / k {
        for i in 0..k {
            for j in 0..k {
                b[(blk * k + i, blk * k + j)] = 1.0;
            }
        }
    }
    Ok(MatrixModel::IndependentGaussian(VariancePattern::new(b)?))
}

/// Sparse Wigner model on a sparsity graph.
pub fn build_sparse_wigner(g: SparsityGraph) -> MatrixModel {
    MatrixModel::SparseWigner(g)
}

/// Decomposes an entrywise pattern into rank-one/rank-two coefficients:
/// `b_ii e_i e_i^*` for positive diagonal entries, then
/// `b_ij (e_i e_j^* + e_j e_i^*)` for positive off-diagonal entries i < j.
/// The coefficient order matches the entrywise sampling order, so coupled
/// Gaussian draws reconstruct the same matrix.
pub fn coefficients_from_pattern(vp: &VariancePattern) -> Result<CoefficientEnsemble> {
    let n = vp.n();
    let mut coeffs = Vec::new();
    for (i, j, b) in vp.nonzero_upper() {
        let mut a = DMatrix::zeros(n, n);
        if i == j {
            a[(i, i)] = b;
        } else {
            a[(i, j)] = b;
            a[(j, i)] = b;
        }
        coeffs.push(a);
    }
    if coeffs.is_empty() {
        return Err(Error::DegenerateModel(
            "all-zero pattern yields an empty coefficient ensemble".into(),
        ));
    }
    let mut ens = CoefficientEnsemble::new(coeffs)?;
    ens.source_pattern = Some(vp.clone());
    Ok(ens)
}

/// Symmetric dilation `[[0, X], [X^T, 0]]` of a rectangular matrix; the
/// spectral norm is preserved.
pub fn dilate(rect: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if rect.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("dilation input has non-finite entries".into()));
    }
    let (n, m) = rect.shape();
    let mut out = DMatrix::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..m {
            out[(i, n + j)] = rect[(i, j)];
            out[(n + j, i)] = rect[(i, j)];
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Model file format (strict JSON).

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ModelFile {
    Wigner { n: usize },
    Diagonal { n: usize },
    Block { n: usize, k: usize },
    Pattern { b: Vec<Vec<f64>> },
    RademacherPattern { b: Vec<Vec<f64>> },
    Graph {
        n: usize,
        edges: Vec<(usize, usize)>,
        #[serde(default)]
        allow_loops: bool,
    },
    Covariance { sigma: Vec<Vec<f64>>, samples: usize },
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse(format!("{what} must have at least one row")));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("{what} rows must all have length {n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Parses the strict model JSON format. Unknown keys are errors.
pub fn model_from_json(text: &str) -> Result<MatrixModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    match file {
        ModelFile::Wigner { n } => build_wigner(n),
        ModelFile::Diagonal { n } => build_diagonal(n),
        ModelFile::Block { n, k } => build_block(n, k),
        ModelFile::Pattern { b } => {
            let m = rows_to_matrix(&b, "pattern b")?;
            Ok(MatrixModel::IndependentGaussian(VariancePattern::new(m)?))
        }
        ModelFile::RademacherPattern { b } => {
            let m = rows_to_matrix(&b, "pattern b")?;
            Ok(MatrixModel::IndependentRademacher(VariancePattern::new(m)?))
        }
        ModelFile::Graph { n, edges, allow_loops } => {
            Ok(MatrixModel::SparseWigner(SparsityGraph::new(n, edges, allow_loops)?))
        }
        ModelFile::Covariance { sigma, samples } => {
            let m = rows_to_matrix(&sigma, "covariance sigma")?;
            Ok(MatrixModel::Covariance(CovarianceModel::new(m, samples)?))
        }
    }
}
