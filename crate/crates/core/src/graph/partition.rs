use super::{Edge, GraphError, Label, MetricGraph};

/// Half-line remaining from an external edge after cutting at distance 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ExteriorRay {
    /// Index of the external edge in the original graph (and of its unit segment in the interior part).
    pub edge: usize,
    /// Interior-graph vertex representing the cut point.
    pub cut_vertex: usize,
}

/// Interior/exterior decomposition of a graph with leads.
///
/// The interior graph keeps the original vertex and edge numbering; each lead is
/// replaced by a unit segment ending in an appended cut point. Cut points are
/// bookkeeping nodes, not vertices of the original graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphPartition {
    pub interior: MetricGraph,
    pub exterior: Vec<ExteriorRay>,
}

/// Distance from the attachment vertex at which every lead is cut.
pub const CUT_DISTANCE: f64 = 1.0;

impl GraphPartition {
    /// Interior-graph indices of the cut points Γ₀, one per lead.
    pub fn cut_points(&self) -> Vec<usize> {
        self.exterior.iter().map(|r| r.cut_vertex).collect()
    }

    pub fn is_cut_point(&self, v: usize) -> bool {
        self.exterior.iter().any(|r| r.cut_vertex == v)
    }
}

pub fn split_external(graph: &MetricGraph) -> Result<GraphPartition, GraphError> {
    let leads = graph.external_edges();
    if leads.is_empty() {
        return Err(GraphError::NoExternalEdges);
    }
    let mut vertices = graph.vertices().to_vec();
    let mut edges = graph.edges().to_vec();
    let mut exterior = Vec::with_capacity(leads.len());
    for &e in &leads {
        let cut_vertex = vertices.len();
        vertices.push(Label::Text(format!("{}@cut", graph.edge(e).label)));
        edges[e] = Edge {
            to: Some(cut_vertex),
            length: CUT_DISTANCE,
            ..edges[e].clone()
        };
        exterior.push(ExteriorRay {
            edge: e,
            cut_vertex,
        });
    }
    let interior = MetricGraph::new(vertices, edges, graph.d0(), graph.l0())?;
    Ok(GraphPartition { interior, exterior })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loop_with_lead() {
        let p = split_external(&MetricGraph::loop_with_lead(1.0)).unwrap();
        assert!(p.interior.is_compact());
        assert_eq!(p.interior.n_vertices(), 2);
        assert_eq!(p.cut_points(), vec![1]);
        assert_eq!(p.interior.edge(1).length, 1.0);
        assert_eq!(p.interior.degree(1), 1);
    }

    #[test]
    fn two_leads() {
        let g = MetricGraph::new(
            vec![0.into()],
            vec![
                Edge {
                    label: 0.into(),
                    from: 0,
                    to: None,
                    length: f64::INFINITY,
                },
                Edge {
                    label: 1.into(),
                    from: 0,
                    to: None,
                    length: f64::INFINITY,
                },
            ],
            2,
            1.0,
        )
        .unwrap();
        let p = split_external(&g).unwrap();
        assert_eq!(p.exterior.len(), 2);
        assert_eq!(p.interior.n_edges(), 2);
        assert!(p.interior.edges().iter().all(|e| e.length == CUT_DISTANCE));
    }

    #[test]
    fn compact_graph_rejected() {
        assert!(matches!(
            split_external(&MetricGraph::unit_loop()),
            Err(GraphError::NoExternalEdges)
        ));
    }
}
