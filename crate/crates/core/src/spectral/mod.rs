//! Eigenvalues of compact quantum graphs with free vertex conditions.

mod oracle;
mod secular;

#[allow(unused_imports)]
pub(crate) use oracle::romberg_from;
pub use oracle::{fd_oracle_eigenvalues, OracleOptions};
pub use secular::{
    eigenfunction, eigenfunction_on, eigenspace, eigenvalues, eigenvalues_with, secular_matrix,
    SecularOptions,
};
#[allow(unused_imports)]
pub(crate) use secular::{secular_system, singular_values};

use crate::graph::{GraphError, GraphFunction};
use crate::linalg::{CsrMatrix, LinalgError};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Secular,
    FdOracle,
    Fem,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Secular => "secular",
            Method::FdOracle => "fd-oracle",
            Method::Fem => "fem",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub value: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug)]
pub struct SpectralResult {
    /// Distinct eigenvalues, ascending.
    pub eigenvalues: Vec<Eigenvalue>,
    pub eigenfunctions: Option<Vec<GraphFunction>>,
    /// Discrete eigenvectors, one per eigenvalue counted with multiplicity.
    pub vectors: Option<Vec<Vec<f64>>>,
    /// Mass matrix defining the inner product of `vectors`.
    pub mass: Option<CsrMatrix<f64>>,
    pub method: Method,
    pub warnings: Vec<String>,
}

impl SpectralResult {
    pub fn new(eigenvalues: Vec<Eigenvalue>, method: Method) -> Self {
        Self {
            eigenvalues,
            eigenfunctions: None,
            vectors: None,
            mass: None,
            method,
            warnings: Vec::new(),
        }
    }

    /// Eigenvalues repeated according to multiplicity.
    pub fn flat(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.value, e.multiplicity))
            .collect()
    }

    /// Number of eigenvalues counted with multiplicity.
    pub fn count(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }

    pub fn distinct(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|e| e.value).collect()
    }

    /// Groups an ascending list into distinct values: neighbours closer than
    /// `rel·(1 + |λ|)` are merged and their mean is reported.
    pub fn group(values: &[f64], rel: f64) -> Vec<Eigenvalue> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        let mut last = f64::NEG_INFINITY;
        for &v in values {
            match out.last_mut() {
                Some((sum, m)) if (v - last).abs() <= rel * (1.0 + v.abs()) => {
                    *sum += v;
                    *m += 1;
                }
                _ => out.push((v, 1)),
            }
            last = v;
        }
        out.into_iter()
            .map(|(s, m)| Eigenvalue {
                value: s / m as f64,
                multiplicity: m,
            })
            .collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("k = 0 is handled analytically; the trigonometric ansatz is degenerate there")]
    ZeroMomentum,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("kernel index {index} exceeds multiplicity {multiplicity}")]
    IndexExceedsMultiplicity { index: usize, multiplicity: usize },
    #[error("k = {k} is not a root (σ_min/σ_max = {ratio:e})")]
    NotARoot { k: f64, ratio: f64 },
    #[error("bound not applicable at this λ (denominator {denominator} ≤ 0)")]
    BoundNotApplicable { denominator: f64 },
    #[error("oracle levels disagree: {0}")]
    OracleInconsistent(String),
}

/// Bracket `[lower, upper]` for `λ_k(ε) − λ_k(0)` from the defects `δ1`, `δ2`
/// of an identification pair.
pub fn comparison_bounds(
    lambda_k0: f64,
    delta1: f64,
    delta2: f64,
) -> Result<(f64, f64), SpectralError> {
    if !(delta1 >= 0.0 && delta2 >= 0.0 && lambda_k0 >= 0.0) {
        return Err(SpectralError::InvalidParameter(
            "δ1, δ2 and λ must be nonnegative".into(),
        ));
    }
    let s = 1.0 + lambda_k0;
    let du = 1.0 - delta1 * s;
    let dl = 1.0 - (delta1 + delta2 * (1.0 + delta1)) * s;
    for d in [du, dl] {
        if d <= 0.0 {
            return Err(SpectralError::BoundNotApplicable { denominator: d });
        }
    }
    let lower = -2.0 * s * (1.0 + delta1) * delta2 / dl;
    let upper = 2.0 * s * delta1 / du;
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_identity_case() {
        assert_eq!(comparison_bounds(3.0, 0.0, 0.0).unwrap(), (0.0, 0.0));
        let (_, up) = comparison_bounds(10.0, 0.0, 0.05).unwrap();
        assert_eq!(up, 0.0);
    }

    #[test]
    fn bounds_direct_formula() {
        // λ = 0, δ1 = δ2 = 0.1: lower = −2·1.1·0.1/(1 − 0.21), upper = 0.2/0.9
        let (lo, up) = comparison_bounds(0.0, 0.1, 0.1).unwrap();
        assert!((lo - (-0.22 / 0.79)).abs() < 1e-15);
        assert!((up - 0.2 / 0.9).abs() < 1e-15);
    }

    #[test]
    fn bounds_not_applicable() {
        assert!(matches!(
            comparison_bounds(20.0, 0.1, 0.0),
            Err(SpectralError::BoundNotApplicable { .. })
        ));
        assert!(comparison_bounds(1.0, -0.1, 0.0).is_err());
    }

    #[test]
    fn grouping() {
        let g = SpectralResult::group(&[0.0, 1.0, 1.0 + 1e-12, 2.0], 1e-9);
        assert_eq!(g.len(), 3);
        assert_eq!(g[1].multiplicity, 2);
    }
}
