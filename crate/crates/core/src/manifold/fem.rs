use rayon::prelude::*;
use std::f64::consts::PI;

use super::template::{triangle_area, PlanarMesh};
use super::{FatGraphMesh, ManifoldError};
use crate::linalg::{lowest_eigenpairs, CsrMatrix, EigenOptions, Target};
use crate::spectral::{Method, SpectralResult};

type Local = [[f64; 3]; 3];

/// P1 stiffness and mass of one triangle.
pub(crate) fn p1_element(p: [[f64; 2]; 3]) -> (Local, Local) {
    let area = triangle_area(p[0], p[1], p[2]).abs();
    // gradients of the barycentric coordinates times 2·area
    let g = [
        [p[1][1] - p[2][1], p[2][0] - p[1][0]],
        [p[2][1] - p[0][1], p[0][0] - p[2][0]],
        [p[0][1] - p[1][1], p[1][0] - p[0][0]],
    ];
    let mut k = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (g[i][0] * g[j][0] + g[i][1] * g[j][1]) / (4.0 * area);
            m[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    (k, m)
}

/// Assembles over elements given as `(dofs, coordinates)`. Element matrices are
/// computed in parallel and accumulated in element order.
pub(crate) fn assemble(
    n: usize,
    elements: &[([usize; 3], [[f64; 2]; 3])],
) -> (CsrMatrix<f64>, CsrMatrix<f64>) {
    let locals: Vec<(Local, Local)> = elements.par_iter().map(|(_, p)| p1_element(*p)).collect();
    let mut ta = Vec::with_capacity(9 * elements.len());
    let mut tm = Vec::with_capacity(9 * elements.len());
    for ((dofs, _), (k, m)) in elements.iter().zip(&locals) {
        for i in 0..3 {
            for j in 0..3 {
                ta.push((dofs[i], dofs[j], k[i][j]));
                tm.push((dofs[i], dofs[j], m[i][j]));
            }
        }
    }
    (
        CsrMatrix::from_triplets(n, n, &ta),
        CsrMatrix::from_triplets(n, n, &tm),
    )
}

pub(crate) fn assemble_planar(mesh: &PlanarMesh) -> (CsrMatrix<f64>, CsrMatrix<f64>) {
    let elements: Vec<_> = mesh
        .triangles
        .iter()
        .map(|t| (*t, [mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]]))
        .collect();
    assemble(mesh.nodes.len(), &elements)
}

pub(crate) fn p1_neumann_lowest(
    a: &CsrMatrix<f64>,
    m: &CsrMatrix<f64>,
    count: usize,
) -> Result<Vec<f64>, ManifoldError> {
    Ok(lowest_eigenpairs(a, m, Target::Count(count), &EigenOptions::default())?.values)
}

/// Eigenvalues above this fraction of `π²/ε²` are flagged.
pub const TRANSVERSE_GUARD: f64 = 0.5;

/// Relative gap below which FEM eigenvalues are reported as one multiple value.
const GROUP_REL: f64 = 1e-9;

/// All Neumann eigenvalues `≤ lambda_max` of the fat graph, with `M`-orthonormal
/// eigenvectors on the conforming degrees of freedom.
pub fn neumann_eigs(mesh: &FatGraphMesh, lambda_max: f64) -> Result<SpectralResult, ManifoldError> {
    if !(lambda_max >= 0.0 && lambda_max.is_finite()) {
        return Err(ManifoldError::InvalidParameter(format!(
            "Λ = {lambda_max} must be finite and nonnegative"
        )));
    }
    neumann_eigs_with(mesh, Target::Below(lambda_max), &EigenOptions::default())
}

pub fn neumann_eigs_with(
    mesh: &FatGraphMesh,
    target: Target,
    opts: &EigenOptions,
) -> Result<SpectralResult, ManifoldError> {
    let pairs = lowest_eigenpairs(mesh.stiffness(), mesh.mass(), target, opts)?;
    let mut result =
        SpectralResult::new(SpectralResult::group(&pairs.values, GROUP_REL), Method::Fem);
    let guard = TRANSVERSE_GUARD * PI * PI / (mesh.eps() * mesh.eps());
    let flagged = pairs.values.iter().filter(|&&l| l > guard).count();
    if flagged > 0 {
        result.warnings.push(format!(
            "{flagged} eigenvalue(s) above {guard:.6} = 0.5·π²/ε² may mix with transverse modes"
        ));
    }
    result.vectors = Some(pairs.vectors);
    result.mass = Some(mesh.mass().clone());
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_rows_sum_to_zero() {
        let (k, m) = p1_element([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]]);
        for row in k {
            assert!(row.iter().sum::<f64>().abs() < 1e-14);
        }
        let total: f64 = m.iter().flatten().sum();
        assert!((total - triangle_area([0.0, 0.0], [1.0, 0.2], [0.3, 0.9])).abs() < 1e-15);
    }
}
