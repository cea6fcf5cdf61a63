//! Resonances and embedded eigenvalues of graphs with half-line leads.
//!
//! Two independent routes: roots of the outgoing-wave secular matrix located by
//! the argument principle, and eigenvalues of the exterior complex-scaled
//! operator truncated to a finite box.

mod contour;
mod dilated;

pub use contour::{
    find_resonances, find_resonances_with, log_derivative, outgoing_secular, ContourOptions, Window,
};
pub use dilated::{
    dilated_fd_matrix, dilated_resonances, essential_ray, theta_independence, tracked_eigenvalue,
    DilatedPencil, EssentialRay, RevealOptions, ThetaStudy, TrackOptions,
};

use crate::graph::GraphError;
use crate::linalg::LinalgError;
use num_complex::Complex64;
use serde::Serialize;

type C = Complex64;

/// Below this |Im λ| a root is reported as an embedded eigenvalue.
pub const EMBEDDED_TOL: f64 = 1e-7;
/// Roots with `EMBEDDED_TOL < |Im λ| ≤ BORDERLINE_TOL` are flagged rather than classified.
pub const BORDERLINE_TOL: f64 = 1e-5;

/// Complex dilation parameter θ inside the strip `|Im θ| < ϑ/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DilationParams {
    theta: C,
    sector: f64,
}

impl DilationParams {
    pub fn new(theta: C, sector: f64) -> Result<Self, ResonanceError> {
        if !(0.0..std::f64::consts::PI).contains(&sector) {
            return Err(ResonanceError::InvalidTheta(format!(
                "sector half-width {sector} outside [0, π)"
            )));
        }
        if theta.im.abs() >= sector / 2.0 || !theta.re.is_finite() {
            return Err(ResonanceError::InvalidTheta(format!(
                "θ = {theta} outside the strip |Im θ| < {}",
                sector / 2.0
            )));
        }
        Ok(Self { theta, sector })
    }

    pub fn theta(&self) -> C {
        self.theta
    }

    pub fn sector(&self) -> f64 {
        self.sector
    }

    /// Membership in the sector `|arg z| ≤ ϑ`.
    pub fn in_sector(&self, z: C) -> bool {
        z == C::new(0.0, 0.0) || z.arg().abs() <= self.sector
    }

    pub fn ray(&self, lambda_max: f64) -> EssentialRay {
        essential_ray(self.theta, lambda_max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResonanceKind {
    Embedded,
    Resonance,
    /// |Im λ| too small to call a resonance, too large to call embedded.
    Borderline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResonanceMethod {
    Secular,
    DilatedFd,
}

impl std::fmt::Display for ResonanceMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ResonanceMethod::Secular => "secular",
            ResonanceMethod::DilatedFd => "dilated-fd",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resonance {
    pub k: C,
    pub lambda: C,
    pub multiplicity: usize,
    pub residual: f64,
    /// Zero for the secular method, which does not dilate.
    pub theta_used: C,
    pub method: ResonanceMethod,
    pub kind: ResonanceKind,
}

impl Resonance {
    pub fn new(
        k: C,
        multiplicity: usize,
        residual: f64,
        theta_used: C,
        method: ResonanceMethod,
    ) -> Self {
        let lambda = k * k;
        let kind = match lambda.im.abs() {
            x if x <= EMBEDDED_TOL => ResonanceKind::Embedded,
            x if x <= BORDERLINE_TOL => ResonanceKind::Borderline,
            _ => ResonanceKind::Resonance,
        };
        Self {
            k,
            lambda,
            multiplicity,
            residual,
            theta_used,
            method,
            kind,
        }
    }

    /// Momentum with `Re k ≥ 0` for a given energy.
    pub fn momentum(lambda: C) -> C {
        let k = lambda.sqrt();
        if k.re < 0.0 {
            -k
        } else {
            k
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ResonanceError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("graph has no external edges; use the compact eigenvalue solver")]
    NoLeads,
    #[error("k = 0 is excluded from the outgoing ansatz")]
    ZeroMomentum,
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("invalid dilation: {0}")]
    InvalidTheta(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("a root lies on or near the contour after {retries} perturbations")]
    ContourHitsRoot { retries: usize },
    #[error("argument-principle count {expected} but {found} roots refined")]
    CountMismatch { expected: usize, found: usize },
    #[error("Newton refinement did not converge near k = {k}")]
    NoConvergence { k: C },
    #[error("eigenvalue tracking near λ = {lambda} did not converge")]
    TrackingFailed { lambda: C },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilation_strip() {
        assert!(DilationParams::new(C::new(0.0, 0.4), 1.0).is_ok());
        assert!(DilationParams::new(C::new(0.0, 0.6), 1.0).is_err());
        assert!(DilationParams::new(C::new(0.0, 0.1), 3.2).is_err());
        let d = DilationParams::new(C::new(0.0, 0.3), 1.0).unwrap();
        assert!(d.in_sector(C::from_polar(2.0, -0.9)));
        assert!(!d.in_sector(C::from_polar(2.0, 1.1)));
    }

    #[test]
    fn classification() {
        assert_eq!(
            Resonance::new(
                C::new(2.0, 0.0),
                1,
                0.0,
                C::default(),
                ResonanceMethod::Secular
            )
            .kind,
            ResonanceKind::Embedded
        );
        assert_eq!(
            Resonance::new(
                C::new(2.0, -1e-7),
                1,
                0.0,
                C::default(),
                ResonanceMethod::Secular
            )
            .kind,
            ResonanceKind::Borderline
        );
        assert_eq!(
            Resonance::new(
                C::new(2.0, -0.5),
                1,
                0.0,
                C::default(),
                ResonanceMethod::Secular
            )
            .kind,
            ResonanceKind::Resonance
        );
        assert_eq!(Resonance::momentum(C::new(4.0, -1e-3)).re.signum(), 1.0);
    }
}
