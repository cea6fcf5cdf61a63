use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CouplingError, Identification};
use crate::graph::MetricGraph;
use crate::linalg::{lowest_eigenpairs, CholeskySolver, EigenOptions, EigenPairs, Target};
use crate::manifold::{neumann_eigs_with, FatGraphMesh};
use crate::spectral::{eigenvalues, SpectralResult};

/// Minimum number of manifold modes for the quasi-unitarity defect.
pub const MIN_MODES: usize = 5;

/// `max_u ‖(JJ* − id)u‖ / ‖u‖₁` over the lowest `n_modes` manifold eigenvectors.
pub fn quasi_unitarity_defect(
    graph: &MetricGraph,
    mesh: &FatGraphMesh,
    n_modes: usize,
) -> Result<f64, CouplingError> {
    if n_modes < MIN_MODES {
        return Err(CouplingError::InsufficientModes {
            needed: MIN_MODES,
            available: n_modes,
        });
    }
    let maps = Identification::new(graph, mesh)?;
    let spec = neumann_eigs_with(mesh, Target::Count(n_modes), &EigenOptions::default())?;
    let vectors = spec.vectors.unwrap_or_default();
    maps.quasi_unitarity(&vectors[..n_modes.min(vectors.len())])
}

impl Identification<'_> {
    /// `‖(JJ* − id)w‖` for a broken vector `w`.
    pub fn range_defect(&self, w: &[f64]) -> f64 {
        let p = self.apply_j_dofs(&self.apply_j_star_dofs(w));
        let d: Vec<f64> = p.iter().zip(w).map(|(a, b)| a - b).collect();
        self.inner(&d, &d).max(0.0).sqrt()
    }

    /// Quasi-unitarity defect over the given conforming vectors.
    pub fn quasi_unitarity(&self, vectors: &[Vec<f64>]) -> Result<f64, CouplingError> {
        if vectors.len() < MIN_MODES {
            return Err(CouplingError::InsufficientModes {
                needed: MIN_MODES,
                available: vectors.len(),
            });
        }
        let mesh = self.mesh();
        let worst = vectors
            .iter()
            .map(|u| {
                let h1 = (mesh.stiffness().bilinear(u, u) + mesh.mass().bilinear(u, u)).sqrt();
                self.range_defect(&mesh.lift(u)) / h1
            })
            .fold(0.0, f64::max);
        Ok(worst)
    }
}

#[derive(Clone, Debug)]
pub struct SandwichOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SandwichOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
            seed: 0x5eed,
        }
    }
}

/// `‖(Δ_ε + 1)⁻¹ − J(Δ₀ + 1)⁻¹J*‖` in the mass norm of the broken space.
pub fn sandwich_defect(graph: &MetricGraph, mesh: &FatGraphMesh) -> Result<f64, CouplingError> {
    Identification::new(graph, mesh)?.sandwich(&SandwichOptions::default())
}

impl Identification<'_> {
    /// Power iteration for the sandwich defect. The operator is self-adjoint in
    /// the broken mass inner product, so `‖Xx‖/‖x‖` increases to its norm.
    pub fn sandwich(&self, opts: &SandwichOptions) -> Result<f64, CouplingError> {
        let mesh = self.mesh();
        let sys = self.graph_system();
        let k = CholeskySolver::new(&mesh.stiffness().add_scaled(mesh.mass(), 1.0))?;
        let k0 = CholeskySolver::new(&sys.stiffness.add_scaled(&sys.mass, 1.0))?;
        let n = mesh.n_nodes();
        let mb = mesh.broken_mass();
        let ndof = mesh.n_dofs();
        let apply = |x: &[f64]| -> Vec<f64> {
            let load = mb.matvec(x);
            let mut glued = vec![0.0; ndof];
            for (i, l) in load.iter().enumerate() {
                glued[mesh.dof(i)] += l;
            }
            let r = mesh.lift(&k.solve(&glued));
            let jt = self.j_matrix().transpose().matvec(&load);
            let r0 = self.apply_j_dofs(&k0.solve(&jt));
            r.iter().zip(&r0).map(|(a, b)| a - b).collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nx = self.inner(&x, &x).sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
        let mut sigma = 0.0;
        for _ in 0..opts.max_iter {
            let y = apply(&x);
            let ny = self.inner(&y, &y).sqrt();
            if ny == 0.0 {
                return Ok(0.0);
            }
            if (ny - sigma).abs() <= opts.tol * ny {
                return Ok(ny);
            }
            sigma = ny;
            x = y.into_iter().map(|v| v / ny).collect();
        }
        Err(CouplingError::NoConvergence {
            iterations: opts.max_iter,
        })
    }
}

/// Minimum distance of an interval endpoint from the graph spectrum.
pub const ENDPOINT_GAP: f64 = 1e-3;

/// `(‖1_I(Δ_ε)J − J1_I(Δ₀)‖, eigenfunction defect)` from discrete eigenpairs.
///
/// The eigenfunction defect is `max_f min_u ‖Jf − u‖` over unit vectors `f` of
/// the graph eigenspace and `u` of the manifold eigenspace in `I`; for a simple
/// eigenvalue this is `min_± ‖Ju(0) ∓ u(ε)‖`. It is `None` unless both sides
/// hold the same number of eigenvectors in `I`.
pub fn projection_and_eigenfunction_defect(
    graph: &MetricGraph,
    mesh: &FatGraphMesh,
    interval: (f64, f64),
) -> Result<(f64, Option<f64>), CouplingError> {
    let maps = Identification::new(graph, mesh)?;
    let (lo, hi) = interval;
    if !(lo < hi && hi.is_finite()) {
        return Err(CouplingError::InvalidParameter(format!(
            "interval [{lo}, {hi}] is empty"
        )));
    }
    let exact = eigenvalues(graph, hi.max(0.0) + 1.0)?;
    for endpoint in [lo, hi] {
        let distance = exact
            .distinct()
            .iter()
            .map(|l| (l - endpoint).abs())
            .fold(f64::INFINITY, f64::min);
        if distance < ENDPOINT_GAP {
            return Err(CouplingError::EndpointNearSpectrum { endpoint, distance });
        }
    }
    let manifold = neumann_eigs_with(mesh, Target::Below(hi), &EigenOptions::default())?;
    let sys = maps.graph_system();
    let graph_pairs = lowest_eigenpairs(
        &sys.stiffness,
        &sys.mass,
        Target::Below(hi),
        &EigenOptions::default(),
    )?;
    maps.projection_defects(&manifold, &graph_pairs, interval)
}

/// Eigenfunction defect for the single (possibly multiple) graph eigenvalue in `interval`.
pub fn eigenfunction_defect(
    graph: &MetricGraph,
    mesh: &FatGraphMesh,
    interval: (f64, f64),
) -> Result<f64, CouplingError> {
    let exact = eigenvalues(graph, interval.1.max(0.0) + 1.0)?;
    let inside: Vec<_> = exact
        .eigenvalues
        .iter()
        .filter(|e| (interval.0..=interval.1).contains(&e.value))
        .collect();
    let graph_count: usize = inside.iter().map(|e| e.multiplicity).sum();
    if inside.len() != 1 {
        return Err(CouplingError::Multiplicity {
            graph: graph_count,
            manifold: 0,
        });
    }
    let manifold = neumann_eigs_with(mesh, Target::Below(interval.1), &EigenOptions::default())?;
    let manifold_count = manifold
        .flat()
        .iter()
        .filter(|l| (interval.0..=interval.1).contains(*l))
        .count();
    match projection_and_eigenfunction_defect(graph, mesh, interval)? {
        (_, Some(d)) if manifold_count == graph_count => Ok(d),
        _ => Err(CouplingError::Multiplicity {
            graph: graph_count,
            manifold: manifold_count,
        }),
    }
}

impl Identification<'_> {
    /// Projection and eigenfunction defects from precomputed eigenpairs.
    pub fn projection_defects(
        &self,
        manifold: &SpectralResult,
        graph_pairs: &EigenPairs,
        (lo, hi): (f64, f64),
    ) -> Result<(f64, Option<f64>), CouplingError> {
        let mesh = self.mesh();
        let flat = manifold.flat();
        let vectors = manifold.vectors.as_deref().unwrap_or(&[]);
        let u: Vec<Vec<f64>> = flat
            .iter()
            .zip(vectors)
            .filter(|(l, _)| (lo..=hi).contains(*l))
            .map(|(_, v)| mesh.lift(v))
            .collect();
        let g: Vec<Vec<f64>> = graph_pairs
            .values
            .iter()
            .zip(&graph_pairs.vectors)
            .filter(|(l, _)| (lo..=hi).contains(*l))
            .map(|(_, v)| v.clone())
            .collect();
        let proj = self.projection_norm(&u, &g);
        let eig = (!g.is_empty() && u.len() == g.len()).then(|| {
            let jg: Vec<Vec<f64>> = g.iter().map(|gi| self.apply_j_dofs(gi)).collect();
            let overlap = DMatrix::from_fn(g.len(), u.len(), |i, j| self.inner(&jg[i], &u[j]));
            let smallest = overlap
                .singular_values()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            (2.0 - 2.0 * smallest).max(0.0).sqrt()
        });
        Ok((proj, eig))
    }

    /// Norm of `D = P_ε J − J P₀` for `M`-orthonormal eigenvectors `u` (broken) and `g` (graph).
    fn projection_norm(&self, u: &[Vec<f64>], g: &[Vec<f64>]) -> f64 {
        // D vanishes on the mass-orthogonal complement of these graph vectors
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let candidates = u
            .iter()
            .map(|w| self.apply_j_star_dofs(w))
            .chain(g.iter().cloned());
        for mut z in candidates {
            let scale = self.graph_inner(&z, &z).sqrt();
            for _ in 0..2 {
                for b in &basis {
                    let c = self.graph_inner(&z, b);
                    z.iter_mut().zip(b).for_each(|(zi, bi)| *zi -= c * bi);
                }
            }
            let nz = self.graph_inner(&z, &z).sqrt();
            if nz > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                z.iter_mut().for_each(|zi| *zi /= nz);
                basis.push(z);
            }
        }
        if basis.is_empty() {
            return 0.0;
        }
        let images: Vec<Vec<f64>> = basis
            .iter()
            .map(|z| {
                let jz = self.apply_j_dofs(z);
                let mut out = vec![0.0; jz.len()];
                for w in u {
                    let c = self.inner(w, &jz);
                    out.iter_mut().zip(w).for_each(|(o, wi)| *o += c * wi);
                }
                for gj in g {
                    let c = self.graph_inner(gj, z);
                    let jg = self.apply_j_dofs(gj);
                    out.iter_mut().zip(&jg).for_each(|(o, v)| *o -= c * v);
                }
                out
            })
            .collect();
        let p = basis.len();
        let gram = DMatrix::from_fn(p, p, |i, j| self.inner(&images[i], &images[j]));
        let top = gram
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        top.max(0.0).sqrt()
    }
}

/// Eigenvalues in `[-ZERO_TOL, 0)` count as zero in [`hausdorff_distance`].
pub const ZERO_TOL: f64 = 1e-8;

/// Two-sided Hausdorff distance of the distinct eigenvalues in `[0, Λ]`.
/// Returns `Λ` (with a logged warning) when either set is empty.
pub fn hausdorff_distance(a: &SpectralResult, b: &SpectralResult, lambda_max: f64) -> f64 {
    let pick = |s: &SpectralResult| -> Vec<f64> {
        // discrete ground states can come out a rounding error below zero
        s.distinct()
            .into_iter()
            .filter(|l| (-ZERO_TOL..=lambda_max).contains(l))
            .map(|l| l.max(0.0))
            .collect()
    };
    let (x, y) = (pick(a), pick(b));
    if x.is_empty() || y.is_empty() {
        log::warn!("Hausdorff distance on [0, {lambda_max}] with an empty spectrum");
        return lambda_max;
    }
    let one_sided = |p: &[f64], q: &[f64]| {
        p.iter()
            .map(|s| {
                q.iter()
                    .map(|t| (s - t).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_sided(&x, &y).max(one_sided(&y, &x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Eigenvalue, Method};
    use std::f64::consts::PI;

    fn spec(values: &[f64]) -> SpectralResult {
        SpectralResult::new(
            values
                .iter()
                .map(|&value| Eigenvalue {
                    value,
                    multiplicity: 1,
                })
                .collect(),
            Method::Secular,
        )
    }

    #[test]
    fn hausdorff_examples() {
        let a = spec(&[0.0, 4.0 * PI * PI]);
        assert_eq!(hausdorff_distance(&a, &a, 50.0), 0.0);
        let b = spec(&[0.0, 4.0 * PI * PI + 0.1]);
        assert!((hausdorff_distance(&a, &b, 50.0) - 0.1).abs() < 1e-12);
        assert_eq!(hausdorff_distance(&a, &spec(&[60.0]), 50.0), 50.0);
        assert_eq!(
            hausdorff_distance(&a, &spec(&[-1e-13, 4.0 * PI * PI]), 50.0),
            0.0
        );
    }
}
