use num_complex::Complex64 as C;
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qgraph::coupling::{
    convergence_study, fmt12, random_inequality_suite, CheckMode, CouplingError, StudyOptions,
    StudyResult, SuiteReport,
};
use qgraph::graph::MetricGraph;
use qgraph::manifold::{build_mesh, build_vertex_template, neumann_eigs};
use qgraph::resonance::{
    find_resonances, tracked_eigenvalue, Resonance, ResonanceMethod, TrackOptions, Window,
};
use qgraph::spectral::{eigenvalues, SpectralResult};

use crate::error::CliError;
use crate::output::{sha256_hex, write_dir_atomic, RunManifest};
use crate::{CheckArgs, ConvergeArgs, Emit, FatSpecArgs, GraphResArgs, GraphSpecArgs};

/// Shared state for one invocation.
pub struct Context {
    pub outdir: PathBuf,
    pub seed: u64,
}

fn load_graph(path: &Path, manifest: &mut RunManifest) -> Result<MetricGraph, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    manifest.graph_file = Some(path.display().to_string());
    manifest.graph_sha256 = Some(sha256_hex(&bytes));
    let text = String::from_utf8(bytes)
        .map_err(|e| CliError::Invalid(format!("{}: not UTF-8: {e}", path.display())))?;
    Ok(MetricGraph::from_json_str(&text)?)
}

fn wants(emit: &[Emit], e: Emit) -> bool {
    emit.contains(&e)
}

fn spectrum_csv(s: &SpectralResult) -> String {
    let mut out = String::from("index,lambda,multiplicity\n");
    let mut index = 1;
    for e in &s.eigenvalues {
        let _ = writeln!(out, "{index},{},{}", fmt12(e.value), e.multiplicity);
        index += e.multiplicity;
    }
    out
}

#[derive(Serialize)]
struct SpectrumJson<'a> {
    method: String,
    eigenvalues: Vec<(f64, usize)>,
    warnings: &'a [String],
}

fn spectrum_json(s: &SpectralResult) -> SpectrumJson<'_> {
    SpectrumJson {
        method: s.method.to_string(),
        eigenvalues: s
            .eigenvalues
            .iter()
            .map(|e| (e.value, e.multiplicity))
            .collect(),
        warnings: &s.warnings,
    }
}

pub fn graph_spec(ctx: &Context, args: &GraphSpecArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("graph-spec", ctx.seed);
    let graph = load_graph(&args.graph, &mut manifest)?;
    manifest.parameters = json!({ "lambda_max": args.lambda_max });
    let s = eigenvalues(&graph, args.lambda_max)?;
    manifest.warnings = s.warnings.clone();
    if wants(&args.emit, Emit::Csv) {
        manifest.emit(&ctx.outdir, "spectrum.csv", spectrum_csv(&s).as_bytes())?;
    }
    if wants(&args.emit, Emit::Json) {
        manifest.emit_json(&ctx.outdir, "spectrum.json", &spectrum_json(&s))?;
    }
    println!(
        "{} eigenvalue(s) in [0, {}] ({} distinct)",
        s.count(),
        args.lambda_max,
        s.eigenvalues.len()
    );
    manifest.finish(&ctx.outdir)
}

#[derive(Serialize)]
struct ResonanceRow {
    re_k: f64,
    im_k: f64,
    re_lambda: f64,
    im_lambda: f64,
    multiplicity: usize,
    residual: f64,
    method: String,
    kind: String,
}

impl ResonanceRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            fmt12(self.re_k),
            fmt12(self.im_k),
            fmt12(self.re_lambda),
            fmt12(self.im_lambda),
            self.multiplicity,
            fmt12(self.residual),
            self.method,
            self.kind
        )
    }
}

/// Oracle agreement above this is reported as a warning.
const ORACLE_TOL: f64 = 1e-3;

pub fn graph_res(ctx: &Context, args: &GraphResArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("graph-res", ctx.seed);
    let graph = load_graph(&args.graph, &mut manifest)?;
    let [re_min, re_max, im_min, im_max] = args.window[..] else {
        return Err(CliError::Invalid(
            "--window needs re_min,re_max,im_min,im_max".into(),
        ));
    };
    let theta: C = args
        .theta
        .parse()
        .map_err(|_| CliError::Invalid(format!("cannot parse θ = {:?}", args.theta)))?;
    manifest.parameters = json!({
        "window": args.window,
        "theta": [theta.re, theta.im],
        "oracle": args.oracle,
    });
    let window = Window::new(re_min, re_max, im_min, im_max)?;
    let found = find_resonances(&graph, &window)?;
    let mut rows: Vec<ResonanceRow> = found
        .iter()
        .map(|r| ResonanceRow {
            re_k: r.k.re,
            im_k: r.k.im,
            re_lambda: r.lambda.re,
            im_lambda: r.lambda.im,
            multiplicity: r.multiplicity,
            residual: r.residual,
            method: r.method.to_string(),
            kind: format!("{:?}", r.kind).to_lowercase(),
        })
        .collect();
    if args.oracle {
        let track = TrackOptions {
            h0: 1.0 / 64.0,
            levels: 3,
            ..TrackOptions::default()
        };
        let mut worst: f64 = 0.0;
        for r in &found {
            let lambda = tracked_eigenvalue(&graph, r.lambda, theta, &track)?;
            let k = Resonance::momentum(lambda);
            let dk = (k - r.k).norm();
            worst = worst.max(dk);
            if dk > ORACLE_TOL {
                manifest
                    .warnings
                    .push(format!("oracle at k = {} differs by {dk:e}", r.k));
            }
            rows.push(ResonanceRow {
                re_k: k.re,
                im_k: k.im,
                re_lambda: lambda.re,
                im_lambda: lambda.im,
                multiplicity: r.multiplicity,
                residual: dk,
                method: ResonanceMethod::DilatedFd.to_string(),
                kind: format!("{:?}", r.kind).to_lowercase(),
            });
        }
        manifest.tolerances = json!({ "oracle_max_dk": worst });
    }
    if wants(&args.emit, Emit::Csv) {
        let mut out =
            String::from("re_k,im_k,re_lambda,im_lambda,multiplicity,residual,method,kind\n");
        for r in &rows {
            out.push_str(&r.csv());
            out.push('\n');
        }
        manifest.emit(&ctx.outdir, "resonances.csv", out.as_bytes())?;
    }
    if wants(&args.emit, Emit::Json) {
        manifest.emit_json(&ctx.outdir, "resonances.json", &rows)?;
    }
    println!("{} root(s) in the window", found.len());
    manifest.finish(&ctx.outdir)
}

pub fn fat_spec(ctx: &Context, args: &FatSpecArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("fat-spec", ctx.seed);
    let graph = load_graph(&args.graph, &mut manifest)?;
    let h = args.hmesh.unwrap_or(args.eps / 8.0);
    let mesh = build_mesh(&graph, args.eps, h)?;
    manifest.parameters = json!({
        "eps": args.eps,
        "h_mesh": h,
        "lambda_max": args.lambda_max,
        "nodes": mesh.n_nodes(),
        "dofs": mesh.n_dofs(),
        "triangles": mesh.n_triangles(),
        "templates": mesh.vertex_regions().iter().map(|v| &v.template).collect::<Vec<_>>(),
    });
    let s = neumann_eigs(&mesh, args.lambda_max)?;
    manifest.warnings = s.warnings.clone();
    if wants(&args.emit, Emit::Csv) {
        manifest.emit(&ctx.outdir, "fat_spectrum.csv", spectrum_csv(&s).as_bytes())?;
    }
    if wants(&args.emit, Emit::Json) {
        manifest.emit_json(&ctx.outdir, "fat_spectrum.json", &spectrum_json(&s))?;
    }
    if args.dump_mesh {
        write_dir_atomic(&ctx.outdir, "mesh", |dir| mesh.dump_csv(dir))?;
        for f in ["nodes.csv", "triangles.csv", "regions.csv"] {
            manifest.outputs.push(format!("mesh/{f}"));
        }
    }
    println!(
        "{} eigenvalue(s) in [0, {}] on {} dofs",
        s.count(),
        args.lambda_max,
        mesh.n_dofs()
    );
    manifest.finish(&ctx.outdir)
}

fn suite_csv(rows: &[(f64, SuiteReport)]) -> String {
    let mut out = String::from("eps,mode,samples,checks,violations,min_margin,seed\n");
    for (eps, r) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt12(*eps),
            r.mode,
            r.samples,
            r.checks,
            r.violations,
            fmt12(r.min_margin),
            r.seed
        );
    }
    out
}

fn modes(list: &[CheckMode]) -> Vec<CheckMode> {
    let set: BTreeSet<_> = list.iter().map(|m| m.to_string()).collect();
    CheckMode::ALL
        .into_iter()
        .filter(|m| set.contains(&m.to_string()))
        .collect()
}

fn emit_study(
    ctx: &Context,
    manifest: &mut RunManifest,
    emit: &[Emit],
    r: &StudyResult,
    gate_rel: f64,
) -> Result<(), CliError> {
    if wants(emit, Emit::Csv) {
        let mut study = Vec::new();
        r.write_study_csv(&mut study)
            .map_err(|e| CliError::io("study.csv", e))?;
        manifest.emit(&ctx.outdir, "study.csv", &study)?;
        let mut defects = Vec::new();
        r.write_defects_csv(&mut defects)
            .map_err(|e| CliError::io("defects.csv", e))?;
        manifest.emit(&ctx.outdir, "defects.csv", &defects)?;
    }
    if wants(emit, Emit::Json) {
        manifest.emit_json(&ctx.outdir, "study.json", r)?;
    }
    manifest.warnings.extend(r.warnings.iter().cloned());
    manifest.tolerances = json!({
        "gates_passed": r.gates_passed(),
        "max_gate_rel_change": r.gates.iter().map(|g| g.rel_change).fold(0.0, f64::max),
        "gate_rel": gate_rel,
    });
    Ok(())
}

pub fn converge(ctx: &Context, args: &ConvergeArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("converge", ctx.seed);
    let graph = load_graph(&args.graph, &mut manifest)?;
    let interval = match args.interval.as_deref() {
        None => None,
        Some([lo, hi]) => Some((*lo, *hi)),
        Some(_) => return Err(CliError::Invalid("--interval needs lo,hi".into())),
    };
    let opts = StudyOptions {
        h_factor: args.h_factor,
        gate: !args.no_gate,
        interval,
        hausdorff_max: args.hausdorff,
        seed: ctx.seed,
        ..StudyOptions::default()
    };
    let degrees: BTreeSet<usize> = (0..graph.n_vertices()).map(|v| graph.degree(v)).collect();
    let templates = degrees
        .iter()
        .map(|&d| build_vertex_template(d, graph.l0()))
        .collect::<Result<Vec<_>, _>>()?;
    manifest.parameters = json!({
        "eps": args.eps,
        "k_max": args.kmax,
        "checks": args.checks.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
        "study": &opts,
        "mesh": args.eps.iter().map(|e| json!({
            "eps": e, "h_mesh": e * opts.h_factor, "h_gate": e * opts.h_factor / 2.0,
        })).collect::<Vec<_>>(),
        "templates": templates,
    });
    let result = match convergence_study(&graph, &args.eps, args.kmax, &opts) {
        Ok(r) => r,
        Err(CouplingError::StudyAborted {
            eps,
            source,
            partial,
        }) => {
            emit_study(ctx, &mut manifest, &args.emit, &partial, opts.gate_rel)?;
            manifest
                .warnings
                .push(format!("study aborted at ε = {eps}: {source}"));
            manifest.finish(&ctx.outdir)?;
            return Err(CliError::Coupling(*source));
        }
        Err(e) => return Err(e.into()),
    };
    emit_study(ctx, &mut manifest, &args.emit, &result, opts.gate_rel)?;
    let mut suites = Vec::new();
    for &eps in &args.eps {
        let checks = modes(&args.checks);
        if checks.is_empty() {
            break;
        }
        let mesh = build_mesh(&graph, eps, eps * opts.h_factor)?;
        for mode in checks {
            suites.push((eps, random_inequality_suite(&mesh, mode, 100, ctx.seed)?));
        }
    }
    if !suites.is_empty() {
        manifest.emit(&ctx.outdir, "checks.csv", suite_csv(&suites).as_bytes())?;
    }
    for (k, s) in result.slopes.iter().enumerate() {
        match s {
            Some(s) => println!("k = {}: slope {s:.4}", k + 1),
            None => println!("k = {}: slope undefined", k + 1),
        }
    }
    let violations: usize = suites.iter().map(|(_, r)| r.violations).sum();
    manifest.finish(&ctx.outdir)?;
    if violations > 0 {
        return Err(CliError::Violations(violations));
    }
    Ok(())
}

pub fn check(ctx: &Context, args: &CheckArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("check", ctx.seed);
    let graph = load_graph(&args.graph, &mut manifest)?;
    let h = args.hmesh.unwrap_or(args.eps / 8.0);
    manifest.parameters = json!({
        "eps": args.eps,
        "h_mesh": h,
        "samples": args.samples,
        "modes": args.modes.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
    });
    let mesh = build_mesh(&graph, args.eps, h)?;
    let mut suites = Vec::new();
    for mode in modes(&args.modes) {
        let r = random_inequality_suite(&mesh, mode, args.samples, ctx.seed)?;
        println!(
            "{mode}: {} checks, {} violation(s), min margin {:.3e}",
            r.checks, r.violations, r.min_margin
        );
        suites.push((args.eps, r));
    }
    manifest.emit(&ctx.outdir, "checks.csv", suite_csv(&suites).as_bytes())?;
    let violations: usize = suites.iter().map(|(_, r)| r.violations).sum();
    manifest.finish(&ctx.outdir)?;
    if violations > 0 {
        return Err(CliError::Violations(violations));
    }
    Ok(())
}
