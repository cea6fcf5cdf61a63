use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

use super::{CouplingError, DefectReport, Identification, SandwichOptions, NORMS};
use crate::graph::MetricGraph;
use crate::linalg::{lowest_eigenpairs, EigenOptions, Target};
use crate::manifold::{build_mesh, neumann_eigs, neumann_eigs_with, FatGraphMesh};
use crate::spectral::{comparison_bounds, eigenvalues};

/// Differences below this are treated as zero when fitting slopes and gating.
pub const DIFF_FLOOR: f64 = 1e-9;

/// Slack for `λ_k(ε) ≤ λ_k(0)`.
pub const UPPER_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyOptions {
    /// Mesh size is `h_factor·ε`.
    pub h_factor: f64,
    /// Manifold modes used for the quasi-unitarity defect.
    pub n_modes: usize,
    /// Repeat every quantity at `h/2` and require relative agreement within `gate_rel`.
    pub gate: bool,
    pub gate_rel: f64,
    pub defects: bool,
    /// Interval for the projection and eigenfunction defects.
    pub interval: Option<(f64, f64)>,
    /// Upper end for the Hausdorff distance of the spectra.
    pub hausdorff_max: Option<f64>,
    pub seed: u64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            h_factor: 1.0 / 8.0,
            n_modes: 5,
            gate: true,
            gate_rel: 0.1,
            defects: true,
            interval: None,
            hausdorff_max: None,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub eps: f64,
    pub k: usize,
    pub lambda0: f64,
    pub lambda_eps: f64,
    pub diff: f64,
    /// `λ_k(ε)` at half the mesh size, when gated.
    pub lambda_eps_fine: Option<f64>,
    /// `λ_k(ε) ≤ λ_k(0) + 1e-6`.
    pub upper_ok: bool,
    /// Bracket for `λ_k(ε) − λ_k(0)` from the measured defects, if applicable.
    pub bracket: Option<(f64, f64)>,
}

/// Comparison of one quantity at `h` and `h/2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateRecord {
    pub eps: f64,
    pub quantity: String,
    pub coarse: f64,
    pub fine: f64,
    pub rel_change: f64,
    pub passed: bool,
}

impl GateRecord {
    fn new(eps: f64, quantity: String, coarse: f64, fine: f64, rel: f64) -> Self {
        let change = (coarse - fine).abs();
        let rel_change = if fine.abs() < DIFF_FLOOR {
            if change < DIFF_FLOOR {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            change / fine.abs()
        };
        Self {
            eps,
            quantity,
            coarse,
            fine,
            rel_change,
            passed: rel_change <= rel,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StudyResult {
    pub eps_list: Vec<f64>,
    pub k_max: usize,
    pub rows: Vec<StudyRow>,
    pub defects: Vec<DefectReport>,
    pub gates: Vec<GateRecord>,
    /// Log-log slope of `|λ_k(ε) − λ_k(0)|` for `k = 1..=k_max`.
    pub slopes: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

impl StudyResult {
    pub fn gates_passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn upper_bound_holds(&self) -> bool {
        self.rows.iter().all(|r| r.upper_ok)
    }

    /// Log-log slope of one defect column over the sweep.
    pub fn defect_slope(&self, pick: impl Fn(&DefectReport) -> Option<f64>) -> Option<f64> {
        let (e, d): (Vec<f64>, Vec<f64>) = self
            .defects
            .iter()
            .filter_map(|r| pick(r).map(|d| (r.eps, d)))
            .unzip();
        loglog_slope(&e, &d)
    }

    /// `eps,k,lambda0,lambda_eps,diff,slope` with 12 significant digits.
    pub fn write_study_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "eps,k,lambda0,lambda_eps,diff,slope")?;
        for r in &self.rows {
            let slope = self.slopes.get(r.k - 1).copied().flatten();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt12(r.eps),
                r.k,
                fmt12(r.lambda0),
                fmt12(r.lambda_eps),
                fmt12(r.diff),
                opt12(slope)
            )?;
        }
        Ok(())
    }

    /// `eps,delta_quasi,delta_sandwich,delta_proj,delta_eigfun,hausdorff`.
    pub fn write_defects_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "eps,delta_quasi,delta_sandwich,delta_proj,delta_eigfun,hausdorff"
        )?;
        for d in &self.defects {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt12(d.eps),
                fmt12(d.quasi_unitarity),
                fmt12(d.sandwich),
                opt12(d.projection),
                opt12(d.eigenfunction),
                opt12(d.hausdorff)
            )?;
        }
        Ok(())
    }
}

/// Formats with 12 significant digits.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    format!("{x:.11e}")
}

fn opt12(x: Option<f64>) -> String {
    x.map(fmt12).unwrap_or_default()
}

/// Least-squares slope of `log y` against `log x` over points with `y > 1e-9`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && b.abs() > DIFF_FLOOR)
        .map(|(a, b)| (a.ln(), b.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Quantities measured on one mesh.
struct Measured {
    lambdas: Vec<f64>,
    defects: Option<DefectReport>,
    warnings: Vec<String>,
}

fn measure(
    graph: &MetricGraph,
    mesh: &FatGraphMesh,
    k_max: usize,
    opts: &StudyOptions,
) -> Result<Measured, CouplingError> {
    let count = k_max.max(if opts.defects { opts.n_modes } else { 0 });
    let spec = neumann_eigs_with(mesh, Target::Count(count), &EigenOptions::default())?;
    let mut warnings = spec.warnings.clone();
    let lambdas = spec.flat()[..k_max].to_vec();
    if !opts.defects {
        return Ok(Measured {
            lambdas,
            defects: None,
            warnings,
        });
    }
    let maps = Identification::new(graph, mesh)?;
    let vectors = spec.vectors.as_deref().unwrap_or(&[]);
    let quasi = maps.quasi_unitarity(&vectors[..opts.n_modes.min(vectors.len())])?;
    let sandwich = maps.sandwich(&SandwichOptions {
        seed: opts.seed,
        ..SandwichOptions::default()
    })?;
    let (projection, eigenfunction) = match opts.interval {
        Some((lo, hi)) => {
            let manifold = neumann_eigs_with(mesh, Target::Below(hi), &EigenOptions::default())?;
            let sys = maps.graph_system();
            let pairs = lowest_eigenpairs(
                &sys.stiffness,
                &sys.mass,
                Target::Below(hi),
                &EigenOptions::default(),
            )?;
            let (p, e) = maps.projection_defects(&manifold, &pairs, (lo, hi))?;
            if e.is_none() {
                warnings.push(format!(
                    "interval [{lo}, {hi}] does not isolate one simple eigenvalue"
                ));
            }
            (Some(p), e)
        }
        None => (None, None),
    };
    let hausdorff = match opts.hausdorff_max {
        Some(lmax) => {
            let fem = neumann_eigs(mesh, lmax)?;
            let exact = eigenvalues(graph, lmax)?;
            Some(super::hausdorff_distance(&fem, &exact, lmax))
        }
        None => None,
    };
    Ok(Measured {
        lambdas,
        defects: Some(DefectReport {
            eps: mesh.eps(),
            h_mesh: mesh.h_mesh(),
            quasi_unitarity: quasi,
            sandwich,
            projection,
            eigenfunction,
            hausdorff,
            modes_used: opts.n_modes,
            norms: NORMS.into(),
        }),
        warnings,
    })
}

/// Exact graph eigenvalues `λ_1 ≤ … ≤ λ_{k_max}` with multiplicity.
fn graph_lambdas(graph: &MetricGraph, k_max: usize) -> Result<Vec<f64>, CouplingError> {
    let mut lmax = 50.0;
    loop {
        let flat = eigenvalues(graph, lmax)?.flat();
        if flat.len() > k_max {
            return Ok(flat[..k_max].to_vec());
        }
        lmax *= 2.0;
    }
}

/// λ_k(ε) and all defect functionals over an ε-sweep on meshes of size
/// `h_factor·ε`, with a refinement gate at `h/2`.
///
/// ε values are processed in parallel; on failure the rows for the ε values
/// before the failing one are returned inside [`CouplingError::StudyAborted`].
pub fn convergence_study(
    graph: &MetricGraph,
    eps_list: &[f64],
    k_max: usize,
    opts: &StudyOptions,
) -> Result<StudyResult, CouplingError> {
    if eps_list.is_empty() || k_max == 0 {
        return Err(CouplingError::InvalidParameter(
            "need at least one ε and k_max ≥ 1".into(),
        ));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CouplingError::InvalidParameter(
            "ε list must be strictly decreasing".into(),
        ));
    }
    if !(opts.h_factor > 0.0 && opts.h_factor <= 0.25) {
        return Err(CouplingError::InvalidParameter(format!(
            "h_factor {} must lie in (0, 1/4]",
            opts.h_factor
        )));
    }
    let lambda0 = graph_lambdas(graph, k_max)?;
    let jobs: Vec<Result<(Measured, Option<Measured>), CouplingError>> = eps_list
        .par_iter()
        .map(|&eps| {
            let h = opts.h_factor * eps;
            let coarse = measure(graph, &build_mesh(graph, eps, h)?, k_max, opts)?;
            let fine = if opts.gate {
                Some(measure(
                    graph,
                    &build_mesh(graph, eps, h / 2.0)?,
                    k_max,
                    opts,
                )?)
            } else {
                None
            };
            Ok((coarse, fine))
        })
        .collect();
    let mut result = StudyResult {
        eps_list: eps_list.to_vec(),
        k_max,
        slopes: vec![None; k_max],
        ..StudyResult::default()
    };
    for (&eps, job) in eps_list.iter().zip(jobs) {
        let (coarse, fine) = match job {
            Ok(j) => j,
            Err(source) => {
                return Err(CouplingError::StudyAborted {
                    eps,
                    source: Box::new(source),
                    partial: Box::new(result),
                })
            }
        };
        record(&mut result, eps, &lambda0, coarse, fine, opts);
    }
    for k in 0..k_max {
        let diffs: Vec<f64> = result
            .rows
            .iter()
            .filter(|r| r.k == k + 1)
            .map(|r| r.diff)
            .collect();
        result.slopes[k] = loglog_slope(eps_list, &diffs);
    }
    Ok(result)
}

fn record(
    result: &mut StudyResult,
    eps: f64,
    lambda0: &[f64],
    coarse: Measured,
    fine: Option<Measured>,
    opts: &StudyOptions,
) {
    result
        .warnings
        .extend(coarse.warnings.iter().map(|w| format!("ε = {eps}: {w}")));
    let quasi = coarse.defects.as_ref().map(|d| d.quasi_unitarity);
    for (k, (&l0, &le)) in lambda0.iter().zip(&coarse.lambdas).enumerate() {
        let diff = le - l0;
        let bracket = quasi.and_then(|q| comparison_bounds(l0, 0.0, q).ok());
        match bracket {
            Some((lo, hi)) if diff < lo - UPPER_TOL || diff > hi + UPPER_TOL => {
                result.warnings.push(format!(
                    "ε = {eps}, k = {}: λ_k(ε) − λ_k(0) = {diff:e} outside [{lo:e}, {hi:e}]",
                    k + 1
                ))
            }
            None if quasi.is_some() => result.warnings.push(format!(
                "ε = {eps}, k = {}: comparison bound not applicable",
                k + 1
            )),
            _ => {}
        }
        let fine_value = fine.as_ref().map(|f| f.lambdas[k]);
        if let Some(lf) = fine_value {
            result.gates.push(GateRecord::new(
                eps,
                format!("diff_{}", k + 1),
                diff.abs(),
                (lf - l0).abs(),
                opts.gate_rel,
            ));
        }
        result.rows.push(StudyRow {
            eps,
            k: k + 1,
            lambda0: l0,
            lambda_eps: le,
            diff,
            lambda_eps_fine: fine_value,
            upper_ok: le <= l0 + UPPER_TOL && fine_value.is_none_or(|lf| lf <= l0 + UPPER_TOL),
            bracket,
        });
    }
    if let (Some(c), Some(f)) = (
        &coarse.defects,
        fine.as_ref().and_then(|f| f.defects.as_ref()),
    ) {
        let pairs = [
            (
                "quasi_unitarity",
                Some(c.quasi_unitarity),
                Some(f.quasi_unitarity),
            ),
            ("sandwich", Some(c.sandwich), Some(f.sandwich)),
            ("projection", c.projection, f.projection),
            ("eigenfunction", c.eigenfunction, f.eigenfunction),
        ];
        for (name, a, b) in pairs {
            if let (Some(a), Some(b)) = (a, b) {
                result
                    .gates
                    .push(GateRecord::new(eps, name.into(), a, b, opts.gate_rel));
            }
        }
    }
    if let Some(d) = coarse.defects {
        result.defects.push(d);
    }
}
