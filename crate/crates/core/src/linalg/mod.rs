//! Sparse matrices, factorizations and eigensolvers used by the discretizations.

mod dense;
mod eigen;
mod quadrature;
mod sparse;

pub use dense::{symmetric_generalized_eigen, DenseEigen};
pub use eigen::{lowest_eigenpairs, EigenOptions, EigenPairs, Target};
pub use quadrature::gauss_legendre;
pub use sparse::{CholeskySolver, ComplexLuSolver, CsrMatrix, Scalar};

#[derive(Debug, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("sparse backend error: {0}")]
    Backend(String),
}
