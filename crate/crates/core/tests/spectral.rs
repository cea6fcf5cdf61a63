mod common;

use qgraph::graph::MetricGraph;
use qgraph::spectral::{eigenfunction, eigenvalues, fd_oracle_eigenvalues, OracleOptions};

#[test]
fn random_graphs_match_oracle() {
    for seed in 0..5u64 {
        let g = common::random_compact_graph(seed, 6);
        assert!(g.validate().is_valid(), "{}", g.validate());
        let s = eigenvalues(&g, 50.0).unwrap();
        let o = fd_oracle_eigenvalues(&g, 50.0, &OracleOptions::default()).unwrap();
        assert_eq!(
            s.count(),
            o.count(),
            "seed {seed}: {:?} vs {:?}",
            s.eigenvalues,
            o.eigenvalues
        );
        assert_eq!(s.eigenvalues.len(), o.eigenvalues.len());
        for (a, b) in s.eigenvalues.iter().zip(&o.eigenvalues) {
            assert_eq!(a.multiplicity, b.multiplicity);
            assert!(
                (a.value - b.value).abs() <= 1e-6,
                "seed {seed}: {} vs {}",
                a.value,
                b.value
            );
        }
    }
}

#[test]
fn star_matches_oracle() {
    let g = MetricGraph::star(3, 1.0);
    let s = eigenvalues(&g, 50.0).unwrap();
    let o = fd_oracle_eigenvalues(&g, 50.0, &OracleOptions::default()).unwrap();
    assert_eq!(s.eigenvalues.len(), o.eigenvalues.len());
    for (a, b) in s.eigenvalues.iter().zip(&o.eigenvalues) {
        assert_eq!(a.multiplicity, b.multiplicity);
        assert!((a.value - b.value).abs() <= 1e-6);
    }
}

#[test]
fn weyl_count_grows() {
    let g = common::random_compact_graph(11, 6);
    let mut prev = 0;
    for lam in [25.0, 100.0, 400.0, 1600.0] {
        let n = eigenvalues(&g, lam).unwrap().count();
        assert!(n >= prev);
        let weyl = g.total_length() * f64::sqrt(lam) / std::f64::consts::PI;
        assert!(
            (n as f64 - weyl).abs() <= g.n_edges() as f64 + 2.0,
            "{n} vs {weyl}"
        );
        prev = n;
    }
}

#[test]
fn eigenpairs_satisfy_rayleigh() {
    for seed in [3u64, 4] {
        let g = common::random_compact_graph(seed, 6);
        let s = eigenvalues(&g, 30.0).unwrap();
        for e in &s.eigenvalues[1..] {
            for i in 0..e.multiplicity {
                let f = eigenfunction(&g, e.value.sqrt(), i).unwrap();
                assert!((f.rayleigh().unwrap() - e.value).abs() <= 1e-8 * (1.0 + e.value));
            }
        }
    }
}
