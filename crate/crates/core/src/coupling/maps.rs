use super::{CouplingError, Cutoff};
use crate::graph::{fd_discretize_counts, FdSystem, GraphFunction, MetricGraph};
use crate::linalg::{CholeskySolver, CsrMatrix};
use crate::manifold::{p1_element, FatGraphMesh, RegionTag};

/// `J`, `J*`, `J¹`, `J¹′` and the averages `N_e`, `C_v` for one graph and mesh.
///
/// The graph side is the P1 discretization on the strip grids, so `J` maps
/// graph dofs to the strip nodes exactly and `J*J = id` holds to rounding.
pub struct Identification<'a> {
    graph: MetricGraph,
    mesh: &'a FatGraphMesh,
    system: FdSystem,
    j: CsrMatrix<f64>,
    jt_mb: CsrMatrix<f64>,
    m0: CholeskySolver,
}

impl<'a> Identification<'a> {
    pub fn new(graph: &MetricGraph, mesh: &'a FatGraphMesh) -> Result<Self, CouplingError> {
        if graph.n_edges() != mesh.strips().len()
            || graph.n_vertices() != mesh.vertex_regions().len()
        {
            return Err(CouplingError::GridMismatch(
                "mesh was built from a different graph".into(),
            ));
        }
        for (e, s) in mesh.strips().iter().enumerate() {
            if (s.length - graph.edge(e).length).abs() > 1e-12 * s.length {
                return Err(CouplingError::GridMismatch(format!(
                    "edge {e} has length {} but its strip {}",
                    graph.edge(e).length,
                    s.length
                )));
            }
        }
        let counts: Vec<usize> = mesh.strips().iter().map(|s| s.n_x).collect();
        let system = fd_discretize_counts(graph, &counts)?;
        let scale = mesh.eps().powf(-0.5);
        let mut t = Vec::new();
        for (e, s) in mesh.strips().iter().enumerate() {
            let dofs = system.dofs.edge_nodes(e);
            for (i, &d) in dofs.iter().enumerate() {
                for j in 0..=s.n_y {
                    t.push((s.node(i, j), d, scale));
                }
            }
        }
        let j = CsrMatrix::from_triplets(mesh.n_nodes(), system.dofs.n_dofs(), &t);
        let jt_mb = mul(&j.transpose(), mesh.broken_mass());
        let m0 = CholeskySolver::new(&system.mass)?;
        Ok(Self {
            graph: graph.clone(),
            mesh,
            system,
            j,
            jt_mb,
            m0,
        })
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn mesh(&self) -> &FatGraphMesh {
        self.mesh
    }

    /// Graph-side P1 system on the strip grids.
    pub fn graph_system(&self) -> &FdSystem {
        &self.system
    }

    pub fn counts(&self) -> Vec<usize> {
        self.system.dofs.counts()
    }

    /// `J` as a matrix from graph dofs to broken manifold vectors.
    pub fn j_matrix(&self) -> &CsrMatrix<f64> {
        &self.j
    }

    fn dofs_of(&self, f: &GraphFunction) -> Result<Vec<f64>, CouplingError> {
        let counts = self.counts();
        let fc = f.counts();
        if fc.len() != counts.len() {
            return Err(CouplingError::GridMismatch(format!(
                "function on {} edges, graph has {}",
                fc.len(),
                counts.len()
            )));
        }
        if fc == counts {
            return Ok(self.system.dofs.from_function(f)?);
        }
        // a coarser function grid is fine when the strip grid refines it
        if let Some(e) = (0..counts.len()).find(|&e| !counts[e].is_multiple_of(fc[e])) {
            return Err(CouplingError::GridMismatch(format!(
                "edge {e}: strip grid of {} cells does not refine {} cells",
                counts[e], fc[e]
            )));
        }
        let resampled = GraphFunction::sample(&self.graph, &counts, |e, x| f.eval(e, x))?;
        Ok(self.system.dofs.from_function(&resampled)?)
    }

    fn to_function(&self, x: &[f64]) -> Result<GraphFunction, CouplingError> {
        Ok(self.system.dofs.to_function(&self.graph, x)?)
    }

    /// `Jf`: `ε^{-1/2} f_e(x)` on strip `e`, zero on vertex regions.
    pub fn apply_j(&self, f: &GraphFunction) -> Result<Vec<f64>, CouplingError> {
        Ok(self.j.matvec(&self.dofs_of(f)?))
    }

    pub fn apply_j_dofs(&self, x: &[f64]) -> Vec<f64> {
        self.j.matvec(x)
    }

    /// Adjoint of `J` with respect to the two mass inner products, as graph dofs.
    pub fn apply_j_star_dofs(&self, w: &[f64]) -> Vec<f64> {
        self.m0.solve(&self.jt_mb.matvec(w))
    }

    pub fn apply_j_star(&self, w: &[f64]) -> Result<GraphFunction, CouplingError> {
        self.to_function(&self.apply_j_star_dofs(w))
    }

    /// `J¹f`: like `J` but `ε^{-1/2} f(v)` on vertex region `v`. Conforming.
    pub fn apply_j1(&self, f: &GraphFunction) -> Result<Vec<f64>, CouplingError> {
        let mut w = self.apply_j(f)?;
        let scale = self.mesh.eps().powf(-0.5);
        for v in 0..self.graph.n_vertices() {
            for i in self.mesh.vertex_nodes(v) {
                w[i] = scale * f.vertex_value(v);
            }
        }
        Ok(self.mesh.restrict(&w, 1e-12)?)
    }

    /// Graph-dof form of [`apply_j1`](Self::apply_j1).
    pub fn apply_j1_dofs(&self, x: &[f64]) -> Result<Vec<f64>, CouplingError> {
        self.apply_j1(&self.to_function(x)?)
    }

    /// Mass inner product of two broken vectors.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.mesh.broken_mass().bilinear(a, b)
    }

    /// Mass inner product of two graph dof vectors.
    pub fn graph_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.system.mass.bilinear(a, b)
    }

    /// Transverse mean `N_e u(x)` of a broken vector, exact for P1 on the strip triangles.
    pub fn transverse_average(&self, w: &[f64], e: usize, x: f64) -> Result<f64, CouplingError> {
        let s = self.mesh.strip(e);
        if !(0.0..=s.length).contains(&x) {
            return Err(CouplingError::OutOfRange {
                edge: e,
                x,
                length: s.length,
            });
        }
        let t = (x / s.hx()).min(s.n_x as f64);
        let i = (t.floor() as usize).min(s.n_x - 1);
        let f = t - i as f64;
        let mut sum = 0.0;
        for j in 0..s.n_y {
            let u00 = w[s.node(i, j)];
            let u10 = w[s.node(i + 1, j)];
            let u01 = w[s.node(i, j + 1)];
            let u11 = w[s.node(i + 1, j + 1)];
            // the vertical line meets the lower triangle for t < f, the upper one above
            let bottom = (1.0 - f) * u00 + f * u10;
            let diag = (1.0 - f) * u00 + f * u11;
            let top = (1.0 - f) * u01 + f * u11;
            sum += f * (bottom + diag) / 2.0 + (1.0 - f) * (diag + top) / 2.0;
        }
        Ok(sum / s.n_y as f64)
    }

    /// Transverse mean along grid column `i` of strip `e`.
    pub(crate) fn column_average(&self, w: &[f64], e: usize, i: usize) -> f64 {
        column_average(self.mesh, w, e, i)
    }

    /// Mean of a broken vector over vertex region `v`.
    pub fn vertex_average(&self, w: &[f64], v: usize) -> f64 {
        let ints = region_integrals(self.mesh, w, RegionTag::Vertex(v));
        ints.integral / ints.area
    }

    /// `J¹′u` on the strip grids; continuous at every vertex by construction.
    pub fn apply_j1prime(
        &self,
        w: &[f64],
        cutoff: &Cutoff,
    ) -> Result<GraphFunction, CouplingError> {
        let sqrt_eps = self.mesh.eps().sqrt();
        let c: Vec<f64> = (0..self.graph.n_vertices())
            .map(|v| self.vertex_average(w, v))
            .collect();
        let values = self
            .graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| {
                let s = self.mesh.strip(e);
                let n_start = self.column_average(w, e, 0);
                let n_end = self.column_average(w, e, s.n_x);
                let to = edge.to.expect("compact graph");
                let mut col: Vec<f64> = (0..=s.n_x)
                    .map(|i| {
                        let x = s.x(i);
                        let n = self.column_average(w, e, i);
                        sqrt_eps
                            * (n + cutoff.rho(x) * (c[edge.from] - n_start)
                                + cutoff.rho(s.length - x) * (c[to] - n_end))
                    })
                    .collect();
                col[0] = sqrt_eps * c[edge.from];
                col[s.n_x] = sqrt_eps * c[to];
                col
            })
            .collect();
        Ok(GraphFunction::from_edge_values(&self.graph, values)?)
    }
}

pub(crate) fn column_average(mesh: &FatGraphMesh, w: &[f64], e: usize, i: usize) -> f64 {
    let s = mesh.strip(e);
    let sum: f64 = (0..s.n_y)
        .map(|j| 0.5 * (w[s.node(i, j)] + w[s.node(i, j + 1)]))
        .sum();
    sum / s.n_y as f64
}

/// Integrals of a broken vector over one region.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct RegionIntegrals {
    pub area: f64,
    pub integral: f64,
    pub l2_sq: f64,
    pub energy: f64,
}

pub(crate) fn region_integrals(mesh: &FatGraphMesh, w: &[f64], tag: RegionTag) -> RegionIntegrals {
    let mut out = RegionIntegrals::default();
    for t in mesh.region_triangles(tag) {
        let tri = mesh.triangles()[t];
        let p = tri.map(|i| mesh.node(i));
        let u = tri.map(|i| w[i]);
        let (k, m) = p1_element(p);
        let area: f64 = m.iter().flatten().sum();
        out.area += area;
        out.integral += area / 3.0 * (u[0] + u[1] + u[2]);
        for a in 0..3 {
            for b in 0..3 {
                out.l2_sq += u[a] * m[a][b] * u[b];
                out.energy += u[a] * k[a][b] * u[b];
            }
        }
    }
    out
}

/// Sparse product `a·b`.
fn mul(a: &CsrMatrix<f64>, b: &CsrMatrix<f64>) -> CsrMatrix<f64> {
    let mut t = Vec::new();
    for r in 0..a.nrows() {
        for (k, av) in a.row(r) {
            for (c, bv) in b.row(k) {
                t.push((r, c, av * bv));
            }
        }
    }
    CsrMatrix::from_triplets(a.nrows(), b.ncols(), &t)
}
