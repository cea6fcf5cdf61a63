#![allow(dead_code)]

use qgraph::graph::{Edge, Label, MetricGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Connected compact graph with at most `max_edges` edges; loops and multi-edges allowed.
pub fn random_compact_graph(seed: u64, max_edges: usize) -> MetricGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nv = rng.random_range(2..=4usize);
    let ne = rng.random_range(nv - 1..=max_edges);
    let mut edges = Vec::new();
    for v in 1..nv {
        let u = rng.random_range(0..v);
        edges.push((u, v));
    }
    while edges.len() < ne {
        edges.push((rng.random_range(0..nv), rng.random_range(0..nv)));
    }
    let edges: Vec<Edge> = edges
        .into_iter()
        .enumerate()
        .map(|(i, (a, b))| Edge {
            label: Label::Int(i as i64),
            from: a,
            to: Some(b),
            length: rng.random_range(0.5..1.5),
        })
        .collect();
    let g = MetricGraph::new((0..nv as i64).map(Label::Int).collect(), edges, 1, 0.5).unwrap();
    let d0 = (0..nv).map(|v| g.degree(v)).max().unwrap();
    g.with_bounds(d0, 0.5).unwrap()
}
