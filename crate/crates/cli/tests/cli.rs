use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn graph(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../graphs")
        .join(name)
}

fn run(outdir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgraph"))
        .args(args)
        .arg("--outdir")
        .arg(outdir)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn loop_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let g = graph("loop.json");
    let out = run(
        dir.path(),
        &[
            "graph-spec",
            "--graph",
            g.to_str().unwrap(),
            "--lambda-max",
            "180",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    let rows = read_csv(&dir.path().join("spectrum.csv"));
    let expect = [(0.0, 1), (4.0 * PI * PI, 2), (16.0 * PI * PI, 2)];
    assert_eq!(rows.len(), expect.len());
    for (row, (lambda, mult)) in rows.iter().zip(expect) {
        assert!((num(&row[1]) - lambda).abs() < 1e-8, "{row:?}");
        assert_eq!(row[2].parse::<usize>().unwrap(), mult);
    }
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn loop_lead_resonances() {
    let dir = tempfile::tempdir().unwrap();
    let g = graph("loop_lead.json");
    let out = run(
        dir.path(),
        &[
            "graph-res",
            "--graph",
            g.to_str().unwrap(),
            "--window",
            "0.1,20,-2,0",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    let rows = read_csv(&dir.path().join("resonances.csv"));
    let has = |re: f64, im: f64| {
        rows.iter()
            .any(|r| (num(&r[0]) - re).abs() < 1e-8 && (num(&r[1]) - im).abs() < 1e-8)
    };
    assert!(has(2.0 * PI, 0.0));
    assert!(has(2.0 * PI, -(3.0f64).ln()));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["converge", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--kmax"));
}

#[test]
fn malformed_graph_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"vertices\": [0],\n  \"edges\": [\n").unwrap();
    let out = run(
        dir.path(),
        &[
            "graph-spec",
            "--graph",
            bad.to_str().unwrap(),
            "--lambda-max",
            "10",
        ],
    );
    assert_eq!(out.status.code(), Some(65));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn invalid_window_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let g = graph("loop_lead.json");
    let out = run(
        dir.path(),
        &[
            "graph-res",
            "--graph",
            g.to_str().unwrap(),
            "--window",
            "5,1,-2,0",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_reports_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let g = graph("star3.json");
    let out = run(dir.path(), &["check", "--graph", g.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    let rows = read_csv(&dir.path().join("checks.csv"));
    let modes: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(modes, ["cn", "vx", "trace"]);
    for r in &rows {
        assert_eq!(r[2], "100");
        assert_eq!(r[4], "0", "{r:?}");
    }
}

#[test]
fn converge_writes_study_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let g = graph("star3.json");
    let out = run(
        dir.path(),
        &[
            "converge",
            "--graph",
            g.to_str().unwrap(),
            "--eps",
            "0.2,0.1",
            "--kmax",
            "2",
            "--checks",
            "cn",
            "--no-gate",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    let study = read_csv(&dir.path().join("study.csv"));
    assert_eq!(study.len(), 4);
    // k = 2 shrinks toward π²/4 as ε halves.
    let d = |eps: &str| {
        study
            .iter()
            .find(|r| r[0] == eps && r[1] == "2")
            .map(|r| num(&r[4]).abs())
            .unwrap()
    };
    assert!(d("1.00000000000e-1") < d("2.00000000000e-1"));
    assert_eq!(read_csv(&dir.path().join("defects.csv")).len(), 2);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["graph_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["parameters"]["templates"].is_array());
    assert!(manifest["parameters"]["mesh"].is_array());
    assert_eq!(manifest["seed"], 42);
}

#[test]
fn outputs_are_deterministic() {
    let g = graph("star3.json");
    let args = [
        "fat-spec",
        "--graph",
        g.to_str().unwrap(),
        "--eps",
        "0.2",
        "--lambda-max",
        "20",
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run(a.path(), &args).status.success());
    assert!(run(b.path(), &args).status.success());
    let read = |d: &Path| std::fs::read(d.join("fat_spectrum.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));

    let check = [
        "check",
        "--graph",
        g.to_str().unwrap(),
        "--samples",
        "20",
        "--seed",
        "7",
    ];
    assert!(run(a.path(), &check).status.success());
    assert!(run(b.path(), &check).status.success());
    let read = |d: &Path| std::fs::read(d.join("checks.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}
