use super::function::cells_for;
use super::{GraphError, GraphFunction, MetricGraph};
use crate::linalg::CsrMatrix;

/// 1D element mass matrix variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MassKind {
    /// Exact P1 mass, `h/6 [2 1; 1 2]`.
    Consistent,
    /// Row-sum lumped mass, `h/2 I`.
    Lumped,
    /// Mean of the two, `h/12 [5 1; 1 5]`; fourth-order accurate eigenvalues on uniform grids.
    Averaged,
}

impl MassKind {
    pub(crate) fn element(self, h: f64) -> [[f64; 2]; 2] {
        match self {
            MassKind::Consistent => [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]],
            MassKind::Lumped => [[h / 2.0, 0.0], [0.0, h / 2.0]],
            MassKind::Averaged => [[5.0 * h / 12.0, h / 12.0], [h / 12.0, 5.0 * h / 12.0]],
        }
    }
}

/// Degree-of-freedom layout: vertex DOFs first (index = vertex index), then the
/// interior grid nodes edge by edge.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    n_dofs: usize,
    edge_nodes: Vec<Vec<usize>>,
}

impl DofMap {
    pub fn new(graph: &MetricGraph, counts: &[usize]) -> Self {
        let mut next = graph.n_vertices();
        let edge_nodes = graph
            .edges()
            .iter()
            .zip(counts)
            .map(|(e, &n)| {
                let mut nodes = Vec::with_capacity(n + 1);
                nodes.push(e.from);
                for _ in 1..n {
                    nodes.push(next);
                    next += 1;
                }
                nodes.push(e.to.expect("compact graph"));
                nodes
            })
            .collect();
        Self {
            n_dofs: next,
            edge_nodes,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    /// DOF index of every grid node on edge `e`, from x = 0 to x = ℓ_e.
    pub fn edge_nodes(&self, e: usize) -> &[usize] {
        &self.edge_nodes[e]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.edge_nodes.iter().map(|n| n.len() - 1).collect()
    }

    pub fn to_function(&self, graph: &MetricGraph, x: &[f64]) -> Result<GraphFunction, GraphError> {
        if x.len() != self.n_dofs {
            return Err(GraphError::GridMismatch(format!(
                "vector of length {} for {} dofs",
                x.len(),
                self.n_dofs
            )));
        }
        let values = self
            .edge_nodes
            .iter()
            .map(|nodes| nodes.iter().map(|&d| x[d]).collect())
            .collect();
        GraphFunction::from_edge_values(graph, values)
    }

    pub fn from_function(&self, f: &GraphFunction) -> Result<Vec<f64>, GraphError> {
        if f.counts() != self.counts() {
            return Err(GraphError::GridMismatch(
                "function grid differs from the dof map".into(),
            ));
        }
        let mut x = vec![0.0; self.n_dofs];
        for (e, nodes) in self.edge_nodes.iter().enumerate() {
            for (&d, &v) in nodes.iter().zip(f.values(e)) {
                x[d] = v;
            }
        }
        Ok(x)
    }
}

/// Assembled piecewise-linear form of the free Laplacian on a compact graph.
#[derive(Clone, Debug)]
pub struct FdSystem {
    pub stiffness: CsrMatrix<f64>,
    pub mass: CsrMatrix<f64>,
    pub dofs: DofMap,
}

/// Discretizes with `⌈ℓ_e/h⌉` cells per edge; requires `h ≤ l0/4`.
pub fn fd_discretize(graph: &MetricGraph, h: f64) -> Result<FdSystem, GraphError> {
    graph.require_compact()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(GraphError::InvalidParameter(format!(
            "grid step {h} must be positive"
        )));
    }
    let max = graph.l0() / 4.0;
    if h > max * (1.0 + 1e-12) {
        return Err(GraphError::StepTooLarge { h, max });
    }
    let counts: Vec<usize> = graph
        .edges()
        .iter()
        .map(|e| cells_for(e.length, h))
        .collect();
    fd_discretize_counts(graph, &counts)
}

/// Discretizes with explicit cell counts and the consistent mass matrix.
pub fn fd_discretize_counts(graph: &MetricGraph, counts: &[usize]) -> Result<FdSystem, GraphError> {
    fd_discretize_with(graph, counts, MassKind::Consistent)
}

pub fn fd_discretize_with(
    graph: &MetricGraph,
    counts: &[usize],
    mass: MassKind,
) -> Result<FdSystem, GraphError> {
    graph.require_compact()?;
    if counts.len() != graph.n_edges() || counts.contains(&0) {
        return Err(GraphError::GridMismatch(
            "one positive cell count per edge required".into(),
        ));
    }
    let dofs = DofMap::new(graph, counts);
    let mut ta = Vec::new();
    let mut tm = Vec::new();
    for (e, edge) in graph.edges().iter().enumerate() {
        let h = edge.length / counts[e] as f64;
        let me = mass.element(h);
        for cell in dofs.edge_nodes(e).windows(2) {
            for a in 0..2 {
                for b in 0..2 {
                    let sign = if a == b { 1.0 } else { -1.0 };
                    ta.push((cell[a], cell[b], sign / h));
                    tm.push((cell[a], cell[b], me[a][b]));
                }
            }
        }
    }
    let n = dofs.n_dofs();
    Ok(FdSystem {
        stiffness: CsrMatrix::from_triplets(n, n, &ta),
        mass: CsrMatrix::from_triplets(n, n, &tm),
        dofs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{lowest_eigenpairs, EigenOptions, Target};

    #[test]
    fn interval_quarter_step() {
        let g = MetricGraph::unit_interval().with_bounds(1, 1.0).unwrap();
        let s = fd_discretize(&g, 0.25).unwrap();
        assert_eq!(s.dofs.n_dofs(), 5);
        let ones = vec![1.0; 5];
        assert!(s.stiffness.matvec(&ones).iter().all(|x| x.abs() < 1e-14));
        // second-difference stencil at an interior node
        let r = s.dofs.edge_nodes(0)[2];
        assert_eq!(s.stiffness.get(r, r), 8.0);
        assert_eq!(s.stiffness.get(r, s.dofs.edge_nodes(0)[1]), -4.0);
    }

    #[test]
    fn loop_is_circulant() {
        let s = fd_discretize(&MetricGraph::unit_loop(), 0.25).unwrap();
        assert_eq!(s.dofs.n_dofs(), 4);
        let d = s.stiffness.to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(d[i][j], d[(i + 1) % 4][(j + 1) % 4]);
            }
        }
    }

    #[test]
    fn star_dof_count_matches_formula() {
        let g = MetricGraph::star(3, 1.0);
        let s = fd_discretize(&g, 0.25).unwrap();
        let formula: usize = g
            .edges()
            .iter()
            .map(|e| (e.length / 0.25).ceil() as usize - 1)
            .sum::<usize>()
            + g.n_vertices();
        assert_eq!(formula, 13);
        assert_eq!(s.dofs.n_dofs(), 13);
        let mut seen = [0usize; 13];
        for e in 0..3 {
            for &d in s.dofs.edge_nodes(e) {
                seen[d] += 1;
            }
        }
        assert_eq!(seen[0], 3);
        assert!(seen[1..].iter().all(|&c| c == 1));
    }

    #[test]
    fn rejects_coarse_step_and_leads() {
        assert!(matches!(
            fd_discretize(&MetricGraph::unit_loop(), 0.5),
            Err(GraphError::StepTooLarge { .. })
        ));
        assert!(matches!(
            fd_discretize(&MetricGraph::loop_with_lead(1.0), 0.1),
            Err(GraphError::NotCompact)
        ));
    }

    #[test]
    fn rayleigh_matches_matrix_quotient() {
        let g = MetricGraph::star(3, 1.0);
        let s = fd_discretize(&g, 1.0 / 16.0).unwrap();
        let f = GraphFunction::sample(&g, &[16, 16, 16], |e, x| {
            (x * (e + 1) as f64).sin() + 0.3 * x * x
        })
        .unwrap();
        let x = s.dofs.from_function(&f).unwrap();
        let q = s.stiffness.bilinear(&x, &x) / s.mass.bilinear(&x, &x);
        assert!((q - f.rayleigh().unwrap()).abs() < 1e-13 * q);
        let back = s.dofs.to_function(&g, &x).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn kernel_is_constants() {
        let g = MetricGraph::star(4, 1.0);
        let s = fd_discretize(&g, 1.0 / 8.0).unwrap();
        let e = lowest_eigenpairs(
            &s.stiffness,
            &s.mass,
            Target::Count(2),
            &EigenOptions::default(),
        )
        .unwrap();
        assert!(e.values[0].abs() < 1e-10);
        assert!(e.values[1] > 1.0);
    }
}
