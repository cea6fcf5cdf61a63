//! Metric graphs: data model, admissibility checks, function spaces and the
//! piecewise-linear oracle discretization.

mod fd;
mod function;
mod io;
mod partition;

pub use fd::{fd_discretize, fd_discretize_counts, fd_discretize_with, DofMap, FdSystem, MassKind};
pub(crate) use function::cells_for;
pub use function::GraphFunction;
pub use partition::{split_external, ExteriorRay, GraphPartition, CUT_DISTANCE};

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;

/// Vertex or edge identifier as written in graph files.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Text(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(i) => write!(f, "{i}"),
            Label::Text(s) => write!(f, "{s}"),
        }
    }
}

impl From<i64> for Label {
    fn from(v: i64) -> Self {
        Label::Int(v)
    }
}

impl From<&str> for Label {
    fn from(v: &str) -> Self {
        Label::Text(v.to_string())
    }
}

/// Edge endpoint: `Start` is x = 0, `Finish` is x = ℓ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Start,
    Finish,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub label: Label,
    pub from: usize,
    /// `None` for external edges (half-lines).
    pub to: Option<usize>,
    /// `f64::INFINITY` exactly when the edge is external.
    pub length: f64,
}

impl Edge {
    pub fn is_external(&self) -> bool {
        self.to.is_none()
    }

    pub fn is_loop(&self) -> bool {
        self.to == Some(self.from)
    }

    pub fn endpoint(&self, end: End) -> Option<usize> {
        match end {
            End::Start => Some(self.from),
            End::Finish => self.to,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("duplicate vertex id {0}")]
    DuplicateVertex(String),
    #[error("duplicate edge id {0}")]
    DuplicateEdge(String),
    #[error("edge {edge}: {reason}")]
    BadEdge { edge: String, reason: String },
    #[error("malformed graph file at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("graph has no external edges")]
    NoExternalEdges,
    #[error("graph has external edges; a compact graph is required")]
    NotCompact,
    #[error("grid step {h} exceeds l0/4 = {max}")]
    StepTooLarge { h: f64, max: f64 },
    #[error("function is not continuous at vertex {vertex}: |Δ| = {jump:e}")]
    Discontinuous { vertex: String, jump: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("rayleigh quotient undefined for the zero function")]
    ZeroFunction,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One violated admissibility condition.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Empty,
    NotConnected {
        components: usize,
    },
    IsolatedVertex {
        vertex: Label,
    },
    DegreeAboveBound {
        vertex: Label,
        degree: usize,
        d0: usize,
    },
    LengthBelowBound {
        edge: Label,
        length: f64,
        l0: f64,
    },
    LengthBoundOutOfRange {
        l0: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "graph has no vertices"),
            Violation::NotConnected { components } => {
                write!(f, "not connected ({components} components)")
            }
            Violation::IsolatedVertex { vertex } => write!(f, "vertex {vertex}: degree 0"),
            Violation::DegreeAboveBound { vertex, degree, d0 } => {
                write!(f, "vertex {vertex}: degree {degree} > d0 = {d0}")
            }
            Violation::LengthBelowBound { edge, length, l0 } => {
                write!(f, "edge {edge}: length < l0 ({length} < {l0})")
            }
            Violation::LengthBoundOutOfRange { l0 } => write!(f, "l0 = {l0} outside (0, 1]"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Edges leaving (`outgoing`, ∂₋e = v) and entering (`incoming`, ∂₊e = v) a vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Incidence {
    pub outgoing: Vec<usize>,
    pub incoming: Vec<usize>,
}

/// Finite metric graph, possibly with external half-line edges.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricGraph {
    vertices: Vec<Label>,
    edges: Vec<Edge>,
    d0: usize,
    l0: f64,
}

impl MetricGraph {
    /// Structural checks only; admissibility bounds are reported by [`MetricGraph::validate`].
    pub fn new(
        vertices: Vec<Label>,
        edges: Vec<Edge>,
        d0: usize,
        l0: f64,
    ) -> Result<Self, GraphError> {
        let mut seen = HashSet::new();
        for v in &vertices {
            if !seen.insert(v) {
                return Err(GraphError::DuplicateVertex(v.to_string()));
            }
        }
        let mut seen = HashSet::new();
        for e in &edges {
            if !seen.insert(&e.label) {
                return Err(GraphError::DuplicateEdge(e.label.to_string()));
            }
            let bad = |reason: &str| GraphError::BadEdge {
                edge: e.label.to_string(),
                reason: reason.to_string(),
            };
            if e.from >= vertices.len() || e.to.is_some_and(|t| t >= vertices.len()) {
                return Err(bad("endpoint index out of range"));
            }
            match e.to {
                None if e.length != f64::INFINITY => {
                    return Err(bad("external edge must have infinite length"))
                }
                Some(_) if !(e.length.is_finite() && e.length > 0.0) => {
                    return Err(bad("internal edge needs a finite positive length"))
                }
                _ => {}
            }
        }
        if !(l0.is_finite() && l0 > 0.0) {
            return Err(GraphError::InvalidParameter(format!(
                "l0 = {l0} must be positive"
            )));
        }
        Ok(Self {
            vertices,
            edges,
            d0,
            l0,
        })
    }

    /// Builds a graph from labels, resolving endpoints by vertex label.
    pub fn from_labels(
        vertices: Vec<Label>,
        edges: Vec<(Label, Label, Option<Label>, f64)>,
        d0: usize,
        l0: f64,
    ) -> Result<Self, GraphError> {
        let index = |l: &Label| {
            vertices
                .iter()
                .position(|v| v == l)
                .ok_or_else(|| GraphError::UnknownVertex(l.to_string()))
        };
        let mut es = Vec::with_capacity(edges.len());
        for (label, from, to, length) in edges {
            let from = index(&from)?;
            let to = to.as_ref().map(index).transpose()?;
            es.push(Edge {
                label,
                from,
                to,
                length,
            });
        }
        Self::new(vertices, es, d0, l0)
    }

    /// Unit-length loop at a single vertex.
    pub fn unit_loop() -> Self {
        Self::loop_of_length(1.0)
    }

    pub fn loop_of_length(length: f64) -> Self {
        Self::new(
            vec![Label::Int(0)],
            vec![Edge {
                label: Label::Int(0),
                from: 0,
                to: Some(0),
                length,
            }],
            2,
            length.min(1.0),
        )
        .expect("valid loop")
    }

    /// Unit interval with two degree-one vertices.
    pub fn unit_interval() -> Self {
        Self::new(
            vec![Label::Int(0), Label::Int(1)],
            vec![Edge {
                label: Label::Int(0),
                from: 0,
                to: Some(1),
                length: 1.0,
            }],
            1,
            1.0,
        )
        .expect("valid interval")
    }

    /// Star with `n` edges of the given length, oriented away from the centre (vertex 0).
    pub fn star(n: usize, length: f64) -> Self {
        let vertices = (0..=n as i64).map(Label::Int).collect();
        let edges = (0..n)
            .map(|i| Edge {
                label: Label::Int(i as i64),
                from: 0,
                to: Some(i + 1),
                length,
            })
            .collect();
        Self::new(vertices, edges, n.max(1), length.min(1.0)).expect("valid star")
    }

    /// Loop of the given length with one half-line attached at its vertex.
    pub fn loop_with_lead(length: f64) -> Self {
        Self::new(
            vec![Label::Int(0)],
            vec![
                Edge {
                    label: Label::Int(0),
                    from: 0,
                    to: Some(0),
                    length,
                },
                Edge {
                    label: Label::Int(1),
                    from: 0,
                    to: None,
                    length: f64::INFINITY,
                },
            ],
            3,
            length.min(1.0),
        )
        .expect("valid loop with lead")
    }

    /// Same graph with different admissibility bounds.
    pub fn with_bounds(mut self, d0: usize, l0: f64) -> Result<Self, GraphError> {
        if !(l0.is_finite() && l0 > 0.0) {
            return Err(GraphError::InvalidParameter(format!(
                "l0 = {l0} must be positive"
            )));
        }
        self.d0 = d0;
        self.l0 = l0;
        Ok(self)
    }

    /// All finite lengths (and `l0`) multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self, GraphError> {
        if !(s.is_finite() && s > 0.0) {
            return Err(GraphError::InvalidParameter(format!(
                "scale {s} must be positive"
            )));
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                length: e.length * s,
                ..e.clone()
            })
            .collect();
        Self::new(self.vertices.clone(), edges, self.d0, self.l0 * s)
    }

    pub fn vertices(&self) -> &[Label] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn d0(&self) -> usize {
        self.d0
    }

    pub fn l0(&self) -> f64 {
        self.l0
    }

    pub fn vertex_index(&self, label: &Label) -> Option<usize> {
        self.vertices.iter().position(|v| v == label)
    }

    pub fn is_compact(&self) -> bool {
        self.edges.iter().all(|e| !e.is_external())
    }

    pub fn internal_edges(&self) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| !self.edges[e].is_external())
            .collect()
    }

    pub fn external_edges(&self) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edges[e].is_external())
            .collect()
    }

    /// Sum of internal edge lengths.
    pub fn total_length(&self) -> f64 {
        self.edges
            .iter()
            .filter(|e| !e.is_external())
            .map(|e| e.length)
            .sum()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.endpoints(v).len()
    }

    /// Edge endpoints at `v` in edge order; a loop contributes `(e, Start)` then `(e, Finish)`.
    pub fn endpoints(&self, v: usize) -> Vec<(usize, End)> {
        let mut out = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.from == v {
                out.push((i, End::Start));
            }
            if e.to == Some(v) {
                out.push((i, End::Finish));
            }
        }
        out
    }

    pub fn incidence(&self, v: usize) -> Result<Incidence, GraphError> {
        if v >= self.vertices.len() {
            return Err(GraphError::UnknownVertex(format!("#{v}")));
        }
        let mut inc = Incidence {
            outgoing: Vec::new(),
            incoming: Vec::new(),
        };
        for (e, end) in self.endpoints(v) {
            match end {
                End::Start => inc.outgoing.push(e),
                End::Finish => inc.incoming.push(e),
            }
        }
        Ok(inc)
    }

    pub fn incidence_by_label(&self, v: &Label) -> Result<Incidence, GraphError> {
        let i = self
            .vertex_index(v)
            .ok_or_else(|| GraphError::UnknownVertex(v.to_string()))?;
        self.incidence(i)
    }

    pub fn components(&self) -> usize {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for e in &self.edges {
            if let Some(t) = e.to {
                let (a, b) = (find(&mut parent, e.from), find(&mut parent, t));
                parent[a] = b;
            }
        }
        (0..n).filter(|&i| find(&mut parent, i) == i).count()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.vertices.is_empty() {
            violations.push(Violation::Empty);
            return ValidationReport { violations };
        }
        if !(self.l0 > 0.0 && self.l0 <= 1.0) {
            violations.push(Violation::LengthBoundOutOfRange { l0: self.l0 });
        }
        let c = self.components();
        if c > 1 {
            violations.push(Violation::NotConnected { components: c });
        }
        for (v, label) in self.vertices.iter().enumerate() {
            let d = self.degree(v);
            if d == 0 {
                violations.push(Violation::IsolatedVertex {
                    vertex: label.clone(),
                });
            } else if d > self.d0 {
                violations.push(Violation::DegreeAboveBound {
                    vertex: label.clone(),
                    degree: d,
                    d0: self.d0,
                });
            }
        }
        for e in &self.edges {
            if e.length < self.l0 {
                violations.push(Violation::LengthBelowBound {
                    edge: e.label.clone(),
                    length: e.length,
                    l0: self.l0,
                });
            }
        }
        ValidationReport { violations }
    }

    pub(crate) fn require_compact(&self) -> Result<(), GraphError> {
        if self.is_compact() {
            Ok(())
        } else {
            Err(GraphError::NotCompact)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_loop_is_valid() {
        let g = MetricGraph::unit_loop();
        assert!(g.validate().is_valid());
        assert_eq!(g.degree(0), 2);
    }

    #[test]
    fn short_edge_is_reported() {
        let g = MetricGraph::unit_interval()
            .scaled(0.5)
            .unwrap()
            .with_bounds(1, 1.0)
            .unwrap();
        let r = g.validate();
        assert_eq!(r.violations.len(), 1);
        assert!(r.to_string().contains("length < l0"));
    }

    #[test]
    fn disconnected_is_reported() {
        let g = MetricGraph::from_labels(
            vec![0.into(), 1.into(), 2.into(), 3.into()],
            vec![
                (0.into(), 0.into(), Some(1.into()), 1.0),
                (1.into(), 2.into(), Some(3.into()), 1.0),
            ],
            2,
            1.0,
        )
        .unwrap();
        let r = g.validate();
        assert!(r
            .violations
            .contains(&Violation::NotConnected { components: 2 }));
        assert!(r.to_string().contains("not connected"));
    }

    #[test]
    fn degree_bound_and_isolated_vertex() {
        let g = MetricGraph::from_labels(
            vec!["c".into(), "a".into(), "b".into(), "lonely".into()],
            vec![
                ("x".into(), "c".into(), Some("a".into()), 1.0),
                ("y".into(), "c".into(), Some("b".into()), 1.0),
            ],
            1,
            1.0,
        )
        .unwrap();
        let r = g.validate();
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, Violation::DegreeAboveBound { degree: 2, .. })));
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, Violation::IsolatedVertex { .. })));
    }

    #[test]
    fn loop_incidence() {
        let g = MetricGraph::unit_loop();
        let inc = g.incidence(0).unwrap();
        assert_eq!(
            inc,
            Incidence {
                outgoing: vec![0],
                incoming: vec![0]
            }
        );
        assert!(g.incidence(3).is_err());
    }

    #[test]
    fn star_incidence_and_lead() {
        let g = MetricGraph::star(3, 1.0);
        let inc = g.incidence(0).unwrap();
        assert_eq!(inc.outgoing, vec![0, 1, 2]);
        assert!(inc.incoming.is_empty());
        let l = MetricGraph::loop_with_lead(1.0);
        let inc = l.incidence(0).unwrap();
        assert_eq!(inc.outgoing, vec![0, 1]);
        assert_eq!(inc.incoming, vec![0]);
    }

    #[test]
    fn handshake_identity() {
        for g in [
            MetricGraph::unit_loop(),
            MetricGraph::star(4, 1.0),
            MetricGraph::loop_with_lead(1.0),
        ] {
            let total: usize = (0..g.n_vertices()).map(|v| g.degree(v)).sum();
            let n_int = g.internal_edges().len();
            let n_ext = g.external_edges().len();
            assert_eq!(total, 2 * n_int + n_ext);
        }
    }

    #[test]
    fn structural_errors() {
        let e = MetricGraph::new(
            vec![0.into()],
            vec![Edge {
                label: 0.into(),
                from: 0,
                to: None,
                length: 1.0,
            }],
            1,
            1.0,
        );
        assert!(matches!(e, Err(GraphError::BadEdge { .. })));
        let e = MetricGraph::new(vec![0.into(), 0.into()], vec![], 1, 1.0);
        assert!(matches!(e, Err(GraphError::DuplicateVertex(_))));
        let e = MetricGraph::from_labels(
            vec![0.into()],
            vec![(0.into(), 0.into(), Some(5.into()), 1.0)],
            1,
            1.0,
        );
        assert!(matches!(e, Err(GraphError::UnknownVertex(_))));
    }
}
