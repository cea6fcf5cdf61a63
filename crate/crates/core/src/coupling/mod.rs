//! Identification operators between a compact graph and its fat graph, and
//! the defect functionals measuring how close the two Laplacians are.
//!
//! Manifold functions are passed around in the region-wise ("broken")
//! representation of [`FatGraphMesh`](crate::manifold::FatGraphMesh): one value
//! per stored node. This represents `Jf`, which vanishes on vertex regions
//! and is therefore discontinuous at the interfaces, without error. Conforming
//! vectors are converted with `FatGraphMesh::lift`.

mod checks;
mod defects;
mod maps;
mod study;

pub use checks::{
    inequality_checks, random_inequality_suite, trace_margin, CheckMode, InequalityConstants,
    Margin, MarginReport, SuiteReport, MARGIN_TOL,
};
pub use defects::{
    eigenfunction_defect, hausdorff_distance, projection_and_eigenfunction_defect,
    quasi_unitarity_defect, sandwich_defect, SandwichOptions,
};
pub use maps::Identification;
pub use study::{
    convergence_study, fmt12, loglog_slope, GateRecord, StudyOptions, StudyResult, StudyRow,
};

use crate::graph::GraphError;
use crate::linalg::LinalgError;
use crate::manifold::ManifoldError;
use crate::spectral::SpectralError;
use serde::Serialize;

/// Cubic smoothstep cutoff `ρ(r) = 1 − 3s² + 2s³`, `s = clamp(2r/l0, 0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub l0: f64,
}

impl Cutoff {
    pub fn new(l0: f64) -> Result<Self, CouplingError> {
        if !(l0 > 0.0 && l0.is_finite()) {
            return Err(CouplingError::InvalidParameter(format!(
                "cutoff length {l0} must be positive"
            )));
        }
        Ok(Self { l0 })
    }

    fn s(&self, r: f64) -> f64 {
        (2.0 * r / self.l0).clamp(0.0, 1.0)
    }

    pub fn rho(&self, r: f64) -> f64 {
        let s = self.s(r);
        1.0 - s * s * (3.0 - 2.0 * s)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let s = self.s(r);
        if r < 0.0 || s >= 1.0 {
            return 0.0;
        }
        -6.0 * s * (1.0 - s) * 2.0 / self.l0
    }
}

/// Defect functionals at one `ε`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectReport {
    pub eps: f64,
    pub h_mesh: f64,
    pub quasi_unitarity: f64,
    pub sandwich: f64,
    pub projection: Option<f64>,
    pub eigenfunction: Option<f64>,
    /// Hausdorff distance of the spectra below the study's cutoff.
    pub hausdorff: Option<f64>,
    pub modes_used: usize,
    /// How the norms are realized on the discretization.
    pub norms: String,
}

pub(crate) const NORMS: &str = "H0: mass-weighted; H1: (stiffness + mass)-weighted";

#[derive(Debug, thiserror::Error)]
pub enum CouplingError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("x = {x} outside [0, {length}] on edge {edge}")]
    OutOfRange { edge: usize, x: f64, length: f64 },
    #[error("need at least {needed} modes, have {available}")]
    InsufficientModes { needed: usize, available: usize },
    #[error("power iteration did not converge in {iterations} steps")]
    NoConvergence { iterations: usize },
    #[error("interval endpoint {endpoint} within {distance:e} of the graph spectrum")]
    EndpointNearSpectrum { endpoint: f64, distance: f64 },
    #[error("interval holds {graph} graph and {manifold} manifold eigenvalues; one eigenvalue with equal counts required")]
    Multiplicity { graph: usize, manifold: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("study aborted at ε = {eps}: {source}")]
    StudyAborted {
        eps: f64,
        source: Box<CouplingError>,
        partial: Box<StudyResult>,
    },
}
