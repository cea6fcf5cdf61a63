//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use num_complex::Complex64 as C;
use qgraph::coupling::{
    convergence_study, random_inequality_suite, trace_margin, CheckMode, StudyOptions, StudyResult,
    MARGIN_TOL,
};
use qgraph::graph::MetricGraph;
use qgraph::manifold::build_mesh;
use qgraph::resonance::{
    dilated_resonances, find_resonances, theta_independence, tracked_eigenvalue, Resonance,
    ResonanceKind, RevealOptions, TrackOptions, Window,
};
use qgraph::spectral::{eigenvalues, fd_oracle_eigenvalues, OracleOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

const EPS: [f64; 3] = [0.2, 0.1, 0.05];
const K_MAX: usize = 4;
const MIN_SLOPE: f64 = 0.45;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn loop04() -> MetricGraph {
    MetricGraph::unit_loop().with_bounds(2, 0.4).unwrap()
}

fn star04() -> MetricGraph {
    MetricGraph::star(3, 1.0).with_bounds(3, 0.4).unwrap()
}

fn exact_spectra() -> Outcome {
    let cases = [
        (
            "loop",
            MetricGraph::unit_loop(),
            vec![(0.0, 1), (4.0 * PI * PI, 2), (16.0 * PI * PI, 2)],
        ),
        (
            "interval",
            MetricGraph::unit_interval(),
            vec![
                (0.0, 1),
                (PI * PI, 1),
                (4.0 * PI * PI, 1),
                (9.0 * PI * PI, 1),
            ],
        ),
    ];
    let mut worst: f64 = 0.0;
    for (name, g, expected) in cases {
        let lmax = expected.last().unwrap().0 + 1.0;
        let s = match eigenvalues(&g, lmax) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("{name}: {e}")),
        };
        if s.eigenvalues.len() != expected.len() {
            return outcome(false, format!("{name}: {:?}", s.eigenvalues));
        }
        for (e, (value, mult)) in s.eigenvalues.iter().zip(&expected) {
            worst = worst.max((e.value - value).abs());
            if e.multiplicity != *mult {
                return outcome(false, format!("{name}: multiplicity {e:?}"));
            }
        }
    }
    outcome(worst <= 1e-10, format!("max |error| = {worst:.2e}"))
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let g = common::random_compact_graph(seed, 6);
        let (s, o) = match (
            eigenvalues(&g, 50.0),
            fd_oracle_eigenvalues(&g, 50.0, &OracleOptions::default()),
        ) {
            (Ok(s), Ok(o)) => (s, o),
            (Err(e), _) => return outcome(false, format!("seed {seed}: {e}")),
            (_, Err(e)) => return outcome(false, format!("seed {seed}: {e}")),
        };
        if s.eigenvalues.len() != o.eigenvalues.len() {
            return outcome(false, format!("seed {seed}: counts differ"));
        }
        for (a, b) in s.eigenvalues.iter().zip(&o.eigenvalues) {
            if a.multiplicity != b.multiplicity {
                return outcome(false, format!("seed {seed}: multiplicity at {}", a.value));
            }
            worst = worst.max((a.value - b.value).abs());
        }
    }
    outcome(worst <= 1e-6, format!("5 graphs, max |Δλ| = {worst:.2e}"))
}

fn one_sided(studies: &[(&str, &StudyResult)]) -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, r) in studies {
        let excess = r
            .rows
            .iter()
            .map(|row| {
                let fine = row.lambda_eps_fine.unwrap_or(row.lambda_eps);
                (row.lambda_eps - row.lambda0).max(fine - row.lambda0)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        ok &= r.upper_bound_holds() && excess <= 1e-6;
        detail.push(format!("{name}: max λ_k(ε) − λ_k(0) = {excess:.2e}"));
    }
    outcome(ok, detail.join("; "))
}

fn slope_ok(s: Option<f64>) -> bool {
    s.is_some_and(|s| s >= MIN_SLOPE)
}

fn fmt_slope(s: Option<f64>) -> String {
    s.map(|s| format!("{s:.3}")).unwrap_or_else(|| "n/a".into())
}

fn convergence_rate(studies: &[(&str, &StudyResult)]) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, r) in studies {
        let gates = r
            .gates
            .iter()
            .filter(|g| g.quantity.starts_with("diff_"))
            .all(|g| g.passed);
        let max_gate = r
            .gates
            .iter()
            .filter(|g| g.quantity.starts_with("diff_"))
            .map(|g| g.rel_change)
            .fold(0.0, f64::max);
        // λ_1 = 0 on both sides, so its difference is rounding and carries no slope
        let mut slopes_ok = true;
        for k in 0..K_MAX {
            let zero = r
                .rows
                .iter()
                .filter(|row| row.k == k + 1)
                .all(|row| row.diff.abs() <= 1e-9);
            slopes_ok &= if zero { true } else { slope_ok(r.slopes[k]) };
        }
        ok &= gates && slopes_ok;
        let slopes: Vec<String> = r.slopes.iter().map(|s| fmt_slope(*s)).collect();
        detail.push(format!(
            "{name}: slopes [{}], gate max {max_gate:.3}",
            slopes.join(", ")
        ));
    }
    outcome(ok, detail.join("; "))
}

fn max_gate(r: &StudyResult, quantity: &str) -> (bool, f64) {
    let gates: Vec<_> = r.gates.iter().filter(|g| g.quantity == quantity).collect();
    let worst = gates.iter().map(|g| g.rel_change).fold(0.0, f64::max);
    (
        gates.len() == EPS.len() && gates.iter().all(|g| g.passed),
        worst,
    )
}

fn defect_scaling(studies: &[(&str, &StudyResult)]) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, r) in studies {
        let q = r.defect_slope(|d| Some(d.quasi_unitarity));
        let s = r.defect_slope(|d| Some(d.sandwich));
        let (gq, wq) = max_gate(r, "quasi_unitarity");
        let (gs, ws) = max_gate(r, "sandwich");
        ok &= slope_ok(q) && slope_ok(s) && gq && gs;
        detail.push(format!(
            "{name}: quasi slope {} (gate {wq:.1e}), sandwich slope {} (gate {ws:.1e})",
            fmt_slope(q),
            fmt_slope(s)
        ));
    }
    outcome(ok, detail.join("; "))
}

fn resonances() -> Outcome {
    let g = MetricGraph::loop_with_lead(1.0);
    let w = Window::new(0.1, 20.0, -2.0, 0.0).unwrap();
    let found = match find_resonances(&g, &w) {
        Ok(f) => f,
        Err(e) => return outcome(false, e.to_string()),
    };
    // hand-derived roots of sin(k/2)(2 sin(k/2) + i cos(k/2)) in the window
    let mut expected = Vec::new();
    for n in 1..=3 {
        expected.push(C::new(2.0 * PI * n as f64, 0.0));
        expected.push(C::new(2.0 * PI * n as f64, -(3f64.ln())));
    }
    expected.retain(|k| w.contains(*k, 0.0));
    let mut worst: f64 = 0.0;
    let mut ok = found.len() == expected.len();
    for k in &expected {
        let Some(r) = found
            .iter()
            .min_by(|a, b| (a.k - k).norm().total_cmp(&(b.k - k).norm()))
        else {
            return outcome(false, "no roots found");
        };
        worst = worst.max((r.k - k).norm());
        let kind = if k.im == 0.0 {
            ResonanceKind::Embedded
        } else {
            ResonanceKind::Resonance
        };
        ok &= r.kind == kind && r.multiplicity == 1;
        if kind == ResonanceKind::Embedded {
            ok &= r.lambda.im.abs() <= 1e-8;
        }
    }
    ok &= worst <= 1e-8;
    let listed = [
        C::new(2.0 * PI, 0.0),
        C::new(2.0 * PI, -(3f64.ln())),
        C::new(4.0 * PI, -(3f64.ln())),
    ];
    ok &= listed
        .iter()
        .all(|k| found.iter().any(|r| (r.k - k).norm() <= 1e-8));

    let theta = C::new(0.0, 0.5);
    let track = TrackOptions {
        h0: 1.0 / 64.0,
        levels: 3,
        ..TrackOptions::default()
    };
    let revealed = match dilated_resonances(&g, theta, &w, &RevealOptions::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut oracle_worst: f64 = 0.0;
    for r in &found {
        let tracked = match tracked_eigenvalue(&g, r.lambda, theta, &track) {
            Ok(l) => Resonance::momentum(l),
            Err(e) => return outcome(false, e.to_string()),
        };
        oracle_worst = oracle_worst.max((tracked - r.k).norm());
    }
    ok &= revealed.len() == found.len() && oracle_worst <= 1e-3;
    outcome(
        ok,
        format!(
            "{} roots (full hand-derived set), max |Δk| = {worst:.1e}; dilated oracle max |Δk| = {oracle_worst:.1e}, {} revealed",
            found.len(),
            revealed.len()
        ),
    )
}

fn theta_drift() -> Outcome {
    let g = MetricGraph::loop_with_lead(1.0);
    let w = Window::new(0.1, 8.0, -2.0, -0.5).unwrap();
    let first = match find_resonances(&g, &w) {
        Ok(f) if !f.is_empty() => f[0],
        Ok(_) => return outcome(false, "no resonance in window"),
        Err(e) => return outcome(false, e.to_string()),
    };
    let thetas: Vec<C> = [0.4, 0.6, 0.8].iter().map(|&t| C::new(0.0, t)).collect();
    match theta_independence(&g, &first, &thetas, &TrackOptions::default()) {
        Ok(study) => outcome(
            study.max_deviation <= 1e-6 && study.values().len() == 3,
            format!("k = {:.6}, drift {:.1e}", first.k, study.max_deviation),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn inequality_suite() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, g) in [("loop", loop04()), ("star", star04())] {
        let m = match build_mesh(&g, 0.1, 0.1 / 8.0) {
            Ok(m) => m,
            Err(e) => return outcome(false, e.to_string()),
        };
        for mode in CheckMode::ALL {
            match random_inequality_suite(&m, mode, 100, 2024) {
                Ok(r) => {
                    ok &= r.violations == 0 && r.min_margin >= MARGIN_TOL;
                    detail.push(format!("{name}/{mode}: {} violations", r.violations));
                }
                Err(e) => return outcome(false, e.to_string()),
            }
        }
    }
    // the one-dimensional trace estimate on random P1 samples
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..200);
        let samples: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        if trace_margin(&samples, 0.4).unwrap() < MARGIN_TOL {
            violations += 1;
        }
    }
    ok &= violations == 0;
    detail.push(format!("1d trace: {violations} violations"));
    outcome(ok, detail.join(", "))
}

fn set_convergence(loop_r: &StudyResult, star_r: &StudyResult) -> Outcome {
    let h: Vec<f64> = loop_r.defects.iter().filter_map(|d| d.hausdorff).collect();
    let decreasing = h.len() == EPS.len() && h.windows(2).all(|w| w[1] < w[0]);
    let eig = star_r.defect_slope(|d| d.eigenfunction);
    let (gate, worst) = max_gate(star_r, "eigenfunction");
    let hs: Vec<String> = h.iter().map(|x| format!("{x:.4}")).collect();
    outcome(
        decreasing && slope_ok(eig) && gate,
        format!(
            "loop Hausdorff [{}]; star λ₂ eigenfunction slope {} (gate {worst:.1e})",
            hs.join(", "),
            fmt_slope(eig)
        ),
    )
}

fn report(n: usize, limit: Duration, start: Instant, o: Outcome) -> bool {
    let elapsed = start.elapsed();
    let passed = o.passed && elapsed <= limit;
    println!(
        "criterion {n}: {} ({:.2} s, limit {} s) {}",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        o.detail
    );
    passed
}

fn main() {
    let secs = Duration::from_secs;
    let mut all = true;

    let t = Instant::now();
    all &= report(1, secs(1), t, exact_spectra());
    let t = Instant::now();
    all &= report(2, secs(30), t, oracle_equivalence());

    // criteria 3, 4, 5 and 9 read the same two sweeps; each is charged the sweep time
    let t = Instant::now();
    let loop_opts = StudyOptions {
        hausdorff_max: Some(50.0),
        ..StudyOptions::default()
    };
    let loop_r = convergence_study(&loop04(), &EPS, K_MAX, &loop_opts);
    let star_opts = StudyOptions {
        // contains λ₂ = π²/4 (double) and no other graph eigenvalue
        interval: Some((1.0, 4.0)),
        ..StudyOptions::default()
    };
    let star_r = convergence_study(&star04(), &EPS, K_MAX, &star_opts);
    let sweep = t.elapsed();
    match (loop_r, star_r) {
        (Ok(l), Ok(s)) => {
            let studies = [("loop", &l), ("star", &s)];
            let charged = Instant::now() - sweep;
            all &= report(3, secs(300), charged, one_sided(&studies));
            let charged = Instant::now() - sweep;
            all &= report(4, secs(600), charged, convergence_rate(&studies));
            let charged = Instant::now() - sweep;
            all &= report(5, secs(600), charged, defect_scaling(&studies));
            let t = Instant::now();
            all &= report(6, secs(120), t, resonances());
            let t = Instant::now();
            all &= report(7, secs(120), t, theta_drift());
            let t = Instant::now();
            all &= report(8, secs(60), t, inequality_suite());
            let charged = Instant::now() - sweep;
            all &= report(9, secs(600), charged, set_convergence(&l, &s));
        }
        (l, s) => {
            let msg = format!("{:?} / {:?}", l.err(), s.err());
            for n in [3, 4, 5] {
                all &= report(n, secs(600), Instant::now(), outcome(false, msg.clone()));
            }
            let t = Instant::now();
            all &= report(6, secs(120), t, resonances());
            let t = Instant::now();
            all &= report(7, secs(120), t, theta_drift());
            let t = Instant::now();
            all &= report(8, secs(60), t, inequality_suite());
            all &= report(9, secs(600), Instant::now(), outcome(false, msg));
        }
    }
    if !all {
        std::process::exit(1);
    }
}
