//! Two-dimensional fat graphs: strips of width ε glued to ε-scaled vertex
//! regions, and their Neumann Laplacian by P1 finite elements.

mod fem;
mod mesh;
mod template;

pub(crate) use fem::p1_element;
pub use fem::{neumann_eigs, neumann_eigs_with, TRANSVERSE_GUARD};
pub use mesh::{build_mesh, FatGraphMesh, Interface, RegionTag, StripGrid, VertexRegion};
pub use template::{
    build_vertex_template, template_constants, NeumannRegion, PlanarMesh, Rectangle,
    VertexTemplate, TEMPLATE_STEP,
};

use crate::graph::GraphError;
use crate::linalg::LinalgError;
use std::f64::consts::PI;

/// Cross-section `F = [0, 1]` with the flat metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossSection;

impl CrossSection {
    /// Dimension of the fat graph.
    pub const D: usize = 2;
    /// Dimension of `F`.
    pub const M: usize = 1;

    pub fn volume(&self) -> f64 {
        1.0
    }

    /// First nonzero Neumann eigenvalue of `F`.
    pub fn lambda2(&self) -> f64 {
        PI * PI
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ManifoldError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("fat graphs are built on compact graphs only")]
    NotCompact,
    #[error("ε = {eps} exceeds l0/2 = {max}")]
    EpsilonTooLarge { eps: f64, max: f64 },
    #[error("mesh size {h} exceeds ε/4 = {max}")]
    MeshTooCoarse { h: f64, max: f64 },
    #[error("non-conforming interface: {0}")]
    NonConforming(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
