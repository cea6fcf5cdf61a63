#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coupling;
pub mod graph;
pub mod linalg;
pub mod manifold;
pub mod resonance;
pub mod spectral;
