use super::{End, GraphError, MetricGraph};

/// Continuous piecewise-linear function on a compact metric graph, stored as
/// samples on a uniform grid per edge. Grid endpoints sit at x = 0 and x = ℓ_e
/// and coincide with the vertex values.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphFunction {
    values: Vec<Vec<f64>>,
    lengths: Vec<f64>,
    vertex_values: Vec<f64>,
}

const CONTINUITY_TOL: f64 = 1e-12;

impl GraphFunction {
    /// Builds a function from per-edge samples, checking continuity at the vertices.
    pub fn from_edge_values(
        graph: &MetricGraph,
        mut values: Vec<Vec<f64>>,
    ) -> Result<Self, GraphError> {
        graph.require_compact()?;
        if values.len() != graph.n_edges() {
            return Err(GraphError::GridMismatch(format!(
                "{} edge arrays for {} edges",
                values.len(),
                graph.n_edges()
            )));
        }
        if let Some(e) = values.iter().position(|v| v.len() < 2) {
            return Err(GraphError::GridMismatch(format!(
                "edge {e} needs at least two samples"
            )));
        }
        let scale = values
            .iter()
            .flatten()
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(f64::MIN_POSITIVE);
        let mut vertex_values = vec![0.0; graph.n_vertices()];
        for v in 0..graph.n_vertices() {
            let ends = graph.endpoints(v);
            let sample = |&(e, end): &(usize, End)| match end {
                End::Start => values[e][0],
                End::Finish => *values[e].last().unwrap(),
            };
            let Some(first) = ends.first() else { continue };
            let reference = sample(first);
            let jump = ends
                .iter()
                .map(|p| (sample(p) - reference).abs())
                .fold(0.0, f64::max);
            if jump > CONTINUITY_TOL * scale {
                return Err(GraphError::Discontinuous {
                    vertex: graph.vertices()[v].to_string(),
                    jump,
                });
            }
            vertex_values[v] = reference;
        }
        for (e, edge) in graph.edges().iter().enumerate() {
            values[e][0] = vertex_values[edge.from];
            *values[e].last_mut().unwrap() = vertex_values[edge.to.unwrap()];
        }
        let lengths = graph.edges().iter().map(|e| e.length).collect();
        Ok(Self {
            values,
            lengths,
            vertex_values,
        })
    }

    /// Samples `f(e, x)` on `counts[e]` uniform cells per edge.
    pub fn sample(
        graph: &MetricGraph,
        counts: &[usize],
        f: impl Fn(usize, f64) -> f64,
    ) -> Result<Self, GraphError> {
        graph.require_compact()?;
        if counts.len() != graph.n_edges() || counts.contains(&0) {
            return Err(GraphError::GridMismatch(
                "one positive cell count per edge required".into(),
            ));
        }
        let values = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| {
                let h = edge.length / counts[e] as f64;
                (0..=counts[e])
                    .map(|j| {
                        f(
                            e,
                            if j == counts[e] {
                                edge.length
                            } else {
                                j as f64 * h
                            },
                        )
                    })
                    .collect()
            })
            .collect();
        Self::from_edge_values(graph, values)
    }

    /// Cell counts giving a step of at most `h` on every edge.
    pub fn counts_for_step(graph: &MetricGraph, h: f64) -> Vec<usize> {
        graph
            .edges()
            .iter()
            .map(|e| cells_for(e.length, h))
            .collect()
    }

    pub fn n_edges(&self) -> usize {
        self.values.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.values.iter().map(|v| v.len() - 1).collect()
    }

    pub fn values(&self, e: usize) -> &[f64] {
        &self.values[e]
    }

    pub fn vertex_value(&self, v: usize) -> f64 {
        self.vertex_values[v]
    }

    pub fn vertex_values(&self) -> &[f64] {
        &self.vertex_values
    }

    pub fn step(&self, e: usize) -> f64 {
        self.lengths[e] / (self.values[e].len() - 1) as f64
    }

    /// Linear interpolation on edge `e` at `x ∈ [0, ℓ_e]`.
    pub fn eval(&self, e: usize, x: f64) -> f64 {
        let v = &self.values[e];
        let n = v.len() - 1;
        let t = (x / self.step(e)).clamp(0.0, n as f64);
        let j = (t.floor() as usize).min(n - 1);
        let s = t - j as f64;
        v[j] * (1.0 - s) + v[j + 1] * s
    }

    /// Exact L² norm squared of the piecewise-linear interpolant.
    pub fn l2_norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Exact L² inner product of two interpolants on the same grids.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.counts(), other.counts(), "grid mismatch");
        let mut acc = 0.0;
        for e in 0..self.values.len() {
            let h = self.step(e);
            let (u, w) = (&self.values[e], &other.values[e]);
            for j in 0..u.len() - 1 {
                acc += h / 6.0
                    * (2.0 * u[j] * w[j]
                        + u[j] * w[j + 1]
                        + u[j + 1] * w[j]
                        + 2.0 * u[j + 1] * w[j + 1]);
            }
        }
        acc
    }

    /// Σ_e ‖f′_e‖² with cell-centred differences.
    pub fn dirichlet_sq(&self) -> f64 {
        let mut acc = 0.0;
        for e in 0..self.values.len() {
            let h = self.step(e);
            acc += self.values[e]
                .windows(2)
                .map(|p| (p[1] - p[0]).powi(2))
                .sum::<f64>()
                / h;
        }
        acc
    }

    pub fn h1_norm_sq(&self) -> f64 {
        self.l2_norm_sq() + self.dirichlet_sq()
    }

    pub fn rayleigh(&self) -> Result<f64, GraphError> {
        let n = self.l2_norm_sq();
        if n == 0.0 {
            return Err(GraphError::ZeroFunction);
        }
        Ok(self.dirichlet_sq() / n)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().flatten().for_each(|x| *x *= c);
        out.vertex_values.iter_mut().for_each(|x| *x *= c);
        out
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, other: &Self, c: f64) -> Self {
        assert_eq!(self.counts(), other.counts(), "grid mismatch");
        let mut out = self.clone();
        for (a, b) in out
            .values
            .iter_mut()
            .flatten()
            .zip(other.values.iter().flatten())
        {
            *a += c * b;
        }
        for (a, b) in out.vertex_values.iter_mut().zip(&other.vertex_values) {
            *a += c * b;
        }
        out
    }

    pub fn normalized(&self) -> Result<Self, GraphError> {
        let n = self.l2_norm();
        if n == 0.0 {
            return Err(GraphError::ZeroFunction);
        }
        Ok(self.scaled(1.0 / n))
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub(crate) fn cells_for(length: f64, h: f64) -> usize {
    ((length / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}
