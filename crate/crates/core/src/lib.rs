//! Structured Gaussian random matrices: structural parameters, constant-free
//! spectral-norm bound expressions, reproducible Monte Carlo estimation, and
//! an exact combinatorial trace-moment oracle.

pub mod bounds;
pub mod covariance;
pub mod error;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod oracles;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod structural;

pub use error::{Error, Result};
pub use model::{
    build_block, build_diagonal, build_sparse_wigner, build_wigner, coefficients_from_pattern,
    dilate, model_from_json, CoefficientEnsemble, CovarianceModel, MatrixModel, SparsityGraph,
    VariancePattern,
};
