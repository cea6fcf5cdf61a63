use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{Edge, GraphError, Label, MetricGraph};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    vertices: Vec<Label>,
    edges: Vec<EdgeFile>,
    d0: usize,
    l0: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeFile {
    id: Label,
    from: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    to: Option<Label>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    external: bool,
    length: LengthField,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LengthField {
    Finite(f64),
    Text(String),
}

impl MetricGraph {
    /// Parses the JSON graph description.
    pub fn from_json_str(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut edges = Vec::with_capacity(file.edges.len());
        for e in file.edges {
            let bad = |reason: &str| GraphError::BadEdge {
                edge: e.id.to_string(),
                reason: reason.to_string(),
            };
            let length = match &e.length {
                LengthField::Finite(x) => *x,
                LengthField::Text(s)
                    if matches!(s.to_ascii_lowercase().as_str(), "inf" | "+inf" | "infinity") =>
                {
                    f64::INFINITY
                }
                LengthField::Text(s) => return Err(bad(&format!("unrecognised length {s:?}"))),
            };
            let to = match (e.to, e.external) {
                (Some(_), true) => return Err(bad("edge has both \"to\" and \"external\"")),
                (None, false) => return Err(bad("edge needs \"to\" or \"external\": true")),
                (to, _) => to,
            };
            edges.push((e.id, e.from, to, length));
        }
        MetricGraph::from_labels(file.vertices, edges, file.d0, file.l0)
    }

    pub fn to_json_string(&self) -> String {
        let edges = self
            .edges
            .iter()
            .map(|e: &Edge| EdgeFile {
                id: e.label.clone(),
                from: self.vertices[e.from].clone(),
                to: e.to.map(|t| self.vertices[t].clone()),
                external: e.is_external(),
                length: if e.is_external() {
                    LengthField::Text("inf".into())
                } else {
                    LengthField::Finite(e.length)
                },
            })
            .collect();
        let file = GraphFile {
            vertices: self.vertices.clone(),
            edges,
            d0: self.d0,
            l0: self.l0,
        };
        serde_json::to_string_pretty(&file).expect("graph serialises")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let text = r#"{"vertices":["v",2],"edges":[
            {"id":"a","from":"v","to":2,"length":0.1234567890123456789},
            {"id":7,"from":2,"to":2,"length":3.0000000000000004},
            {"id":"lead","from":"v","external":true,"length":"inf"}],
            "d0":4,"l0":0.1}"#;
        let g = MetricGraph::from_json_str(text).unwrap();
        let s = g.to_json_string();
        let h = MetricGraph::from_json_str(&s).unwrap();
        assert_eq!(g, h);
        assert_eq!(s, h.to_json_string());
        assert_eq!(h.edge(1).length, 3.0000000000000004);
        assert!(h.edge(2).is_external());
    }

    #[test]
    fn syntax_error_reports_position() {
        let text = "{\"vertices\":[0],\n \"edges\": [,]}";
        match MetricGraph::from_json_str(text) {
            Err(GraphError::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        let unknown =
            r#"{"vertices":[0],"edges":[{"id":0,"from":0,"to":9,"length":1}],"d0":2,"l0":1}"#;
        assert!(matches!(
            MetricGraph::from_json_str(unknown),
            Err(GraphError::UnknownVertex(_))
        ));
        let both = r#"{"vertices":[0],"edges":[{"id":0,"from":0,"to":0,"external":true,"length":1}],"d0":2,"l0":1}"#;
        assert!(matches!(
            MetricGraph::from_json_str(both),
            Err(GraphError::BadEdge { .. })
        ));
        let inf_internal =
            r#"{"vertices":[0],"edges":[{"id":0,"from":0,"to":0,"length":"inf"}],"d0":2,"l0":1}"#;
        assert!(matches!(
            MetricGraph::from_json_str(inf_internal),
            Err(GraphError::BadEdge { .. })
        ));
    }
}
