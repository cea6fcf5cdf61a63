use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use super::{Eigenvalue, Method, SpectralError, SpectralResult};
use crate::graph::{End, GraphError, GraphFunction, MetricGraph};

type C = Complex64;

/// Scan and refinement settings for [`eigenvalues_with`].
#[derive(Clone, Debug)]
pub struct SecularOptions {
    /// Grid step is `π / (scan_factor · Σℓ_e)`.
    pub scan_factor: f64,
    /// Golden-section stopping width in k.
    pub refine_tol: f64,
    /// Singular values below `multiplicity_rel · σ_max` count as kernel.
    pub multiplicity_rel: f64,
    /// Width below which scan cells that cannot be cleared are refined as one cluster.
    pub cluster_width: f64,
}

impl Default for SecularOptions {
    fn default() -> Self {
        Self {
            scan_factor: 4.0,
            refine_tol: 1e-12,
            multiplicity_rel: 1e-8,
            cluster_width: 1e-5,
        }
    }
}

/// Vertex-condition matrix and its k-derivative.
///
/// Internal edges carry `f_e = a cos kx + b sin kx` (columns a, b), leads carry
/// `c e^{ikx}` (one column). Each vertex of degree d contributes d − 1
/// continuity rows and one row for the sum of outward derivatives divided by k.
pub(crate) fn secular_system(
    graph: &MetricGraph,
    k: C,
    with_derivative: bool,
) -> (DMatrix<C>, Option<DMatrix<C>>) {
    let mut col = Vec::with_capacity(graph.n_edges());
    let mut n = 0;
    for e in graph.edges() {
        col.push(n);
        n += if e.is_external() { 1 } else { 2 };
    }
    let mut m = DMatrix::zeros(n, n);
    let mut d = with_derivative.then(|| DMatrix::zeros(n, n));
    let one = C::new(1.0, 0.0);
    let zero = C::new(0.0, 0.0);
    // (column, coefficient, d coefficient / dk)
    let value_terms = |e: usize, end: End| -> Vec<(usize, C, C)> {
        let edge = graph.edge(e);
        let c0 = col[e];
        if edge.is_external() {
            return vec![(c0, one, zero)];
        }
        match end {
            End::Start => vec![(c0, one, zero)],
            End::Finish => {
                let l = edge.length;
                let (s, c) = ((k * l).sin(), (k * l).cos());
                vec![(c0, c, -s * l), (c0 + 1, s, c * l)]
            }
        }
    };
    let flux_terms = |e: usize, end: End| -> Vec<(usize, C, C)> {
        let edge = graph.edge(e);
        let c0 = col[e];
        if edge.is_external() {
            return vec![(c0, C::new(0.0, 1.0), zero)];
        }
        match end {
            End::Start => vec![(c0 + 1, one, zero)],
            End::Finish => {
                let l = edge.length;
                let (s, c) = ((k * l).sin(), (k * l).cos());
                vec![(c0, s, c * l), (c0 + 1, -c, s * l)]
            }
        }
    };
    let mut row = 0;
    for v in 0..graph.n_vertices() {
        let ends = graph.endpoints(v);
        let Some(&first) = ends.first() else { continue };
        for &other in &ends[1..] {
            for (sign, (e, end)) in [(1.0, first), (-1.0, other)] {
                for (c, a, da) in value_terms(e, end) {
                    m[(row, c)] += a * sign;
                    if let Some(d) = d.as_mut() {
                        d[(row, c)] += da * sign;
                    }
                }
            }
            row += 1;
        }
        for &(e, end) in &ends {
            for (c, a, da) in flux_terms(e, end) {
                m[(row, c)] += a;
                if let Some(d) = d.as_mut() {
                    d[(row, c)] += da;
                }
            }
        }
        row += 1;
    }
    debug_assert_eq!(row, n);
    (m, d)
}

/// Singular values, descending.
pub(crate) fn singular_values(m: &DMatrix<C>) -> Vec<f64> {
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Secular matrix `M(k)` of a compact graph; λ = k² is an eigenvalue iff `M(k)` is singular.
pub fn secular_matrix(graph: &MetricGraph, k: C) -> Result<DMatrix<C>, SpectralError> {
    graph.require_compact().map_err(SpectralError::from)?;
    if k.norm() == 0.0 {
        return Err(SpectralError::ZeroMomentum);
    }
    Ok(secular_system(graph, k, false).0)
}

fn real_matrix(graph: &MetricGraph, k: f64) -> DMatrix<f64> {
    secular_system(graph, C::new(k, 0.0), false).0.map(|z| z.re)
}

// Entries of M(k) are O(1) for real k; at loops M can vanish identically, so the
// relative threshold is taken against max(σ_max, 1).
fn sigma_scale(s: impl Iterator<Item = f64>) -> f64 {
    s.fold(1.0, f64::max)
}

fn smallest_singular(graph: &MetricGraph, k: f64) -> f64 {
    real_matrix(graph, k)
        .singular_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Upper bound on ‖dM/dk‖ for real k: every k-dependent entry pair in a row
/// comes from one edge end at x = ℓ and has norm ℓ.
fn lipschitz_bound(graph: &MetricGraph) -> f64 {
    let mut sum = 0.0;
    for v in 0..graph.n_vertices() {
        let ends = graph.endpoints(v);
        for (i, &(e, end)) in ends.iter().enumerate() {
            if end == End::Finish {
                let rows = if i == 0 { ends.len() - 1 } else { 1 } + 1;
                sum += graph.edge(e).length.powi(2) * rows as f64;
            }
        }
    }
    sum.sqrt()
}

// Keeps sub-intervals of width ≤ `width` where σ_min may vanish.
fn exclusion_search(
    sigma: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    lip: f64,
    width: f64,
    out: &mut Vec<(f64, f64)>,
) {
    let m = 0.5 * (a + b);
    if sigma(m) > lip * 0.5 * (b - a) * (1.0 + 1e-9) + 1e-13 {
        return;
    }
    if b - a <= width {
        out.push((a, b));
        return;
    }
    exclusion_search(sigma, a, m, lip, width, out);
    exclusion_search(sigma, m, b, lip, width, out);
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

fn kernel_dim(s: &[f64], rel: f64) -> usize {
    let max = sigma_scale(s.iter().copied());
    s.iter().filter(|&&x| x < rel * max).count()
}

pub fn eigenvalues(graph: &MetricGraph, lambda_max: f64) -> Result<SpectralResult, SpectralError> {
    eigenvalues_with(graph, lambda_max, &SecularOptions::default())
}

/// All eigenvalues in `[0, Λ]` by a σ_min scan of the secular matrix.
///
/// Grid cells are cleared when σ_min at the midpoint exceeds the Lipschitz
/// bound times the half-width; the rest are bisected down to `cluster_width`
/// and each cluster is refined by golden section on σ_min.
pub fn eigenvalues_with(
    graph: &MetricGraph,
    lambda_max: f64,
    opts: &SecularOptions,
) -> Result<SpectralResult, SpectralError> {
    graph.require_compact()?;
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(SpectralError::InvalidParameter(format!(
            "Λ = {lambda_max} must be positive"
        )));
    }
    if !(opts.scan_factor > 0.0) {
        return Err(SpectralError::InvalidParameter(
            "scan factor must be positive".into(),
        ));
    }
    let step = PI / (opts.scan_factor * graph.total_length());
    let kmax = lambda_max.sqrt();
    let npts = (kmax / step).ceil() as usize + 2;
    let ks: Vec<f64> = (1..=npts).map(|j| j as f64 * step).collect();
    let lip = lipschitz_bound(graph);
    let sigma = |k: f64| smallest_singular(graph, k);
    // coarse cells that cannot be cleared by the Lipschitz test are bisected
    let cells: Vec<Vec<(f64, f64)>> = ks
        .par_windows(2)
        .map(|w| {
            let mut out = Vec::new();
            exclusion_search(&sigma, w[0], w[1], lip, opts.cluster_width, &mut out);
            out
        })
        .collect();
    let mut clusters: Vec<(f64, f64)> = Vec::new();
    for (a, b) in cells.into_iter().flatten() {
        match clusters.last_mut() {
            Some(last) if a <= last.1 + 1e-15 => last.1 = b,
            _ => clusters.push((a, b)),
        }
    }
    let mut roots: Vec<(f64, usize)> = clusters
        .par_iter()
        .map(|&(a, b)| {
            let pad = opts.cluster_width;
            let k = golden_min(sigma, (a - pad).max(0.5 * step), b + pad, opts.refine_tol);
            let s: Vec<f64> = real_matrix(graph, k)
                .singular_values()
                .iter()
                .copied()
                .collect();
            (k, kernel_dim(&s, opts.multiplicity_rel))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .filter(|&(k, m)| m > 0 && k * k <= lambda_max)
        .collect();
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut warnings = Vec::new();
    let mut merged: Vec<(f64, usize)> = Vec::new();
    for (k, m) in roots {
        match merged.last_mut() {
            Some(last) if k - last.0 < 10.0 * opts.refine_tol => {
                warnings.push(format!(
                    "roots at k = {} and k = {k} collide; scan step may be too coarse",
                    last.0
                ));
                last.1 = last.1.max(m);
            }
            _ => merged.push((k, m)),
        }
    }
    let mut list = vec![Eigenvalue {
        value: 0.0,
        multiplicity: 1,
    }];
    list.extend(merged.into_iter().map(|(k, m)| Eigenvalue {
        value: k * k,
        multiplicity: m,
    }));
    let mut out = SpectralResult::new(list, Method::Secular);
    out.warnings = warnings;
    Ok(out)
}

// ∫₀ˡ (a1 cos kx + b1 sin kx)(a2 cos kx + b2 sin kx) dx
fn trig_inner(k: f64, l: f64, p: (f64, f64), q: (f64, f64)) -> f64 {
    let icc = l / 2.0 + (2.0 * k * l).sin() / (4.0 * k);
    let iss = l / 2.0 - (2.0 * k * l).sin() / (4.0 * k);
    let ics = (k * l).sin().powi(2) / (2.0 * k);
    p.0 * q.0 * icc + (p.0 * q.1 + p.1 * q.0) * ics + p.1 * q.1 * iss
}

fn coefficient_inner(graph: &MetricGraph, k: f64, x: &[f64], y: &[f64]) -> f64 {
    graph
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| {
            trig_inner(
                k,
                edge.length,
                (x[2 * e], x[2 * e + 1]),
                (y[2 * e], y[2 * e + 1]),
            )
        })
        .sum()
}

/// L²-orthonormal basis of the eigenspace at `k`, sampled on `counts[e]` cells per edge.
pub fn eigenspace(
    graph: &MetricGraph,
    k: f64,
    counts: &[usize],
) -> Result<Vec<GraphFunction>, SpectralError> {
    eigenspace_with(graph, k, counts, SecularOptions::default().multiplicity_rel)
}

fn eigenspace_with(
    graph: &MetricGraph,
    k: f64,
    counts: &[usize],
    rel: f64,
) -> Result<Vec<GraphFunction>, SpectralError> {
    graph.require_compact()?;
    if k == 0.0 {
        let c = 1.0 / graph.total_length().sqrt();
        return Ok(vec![GraphFunction::sample(graph, counts, |_, _| c)?]);
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(SpectralError::InvalidParameter(format!(
            "k = {k} must be positive"
        )));
    }
    let m = real_matrix(graph, k);
    let n = m.ncols();
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let s = svd.singular_values;
    let max = sigma_scale(s.iter().copied());
    let mut kernel: Vec<Vec<f64>> = (0..s.len())
        .filter(|&i| s[i] < rel * max)
        .map(|i| v_t.row(i).iter().copied().collect())
        .collect();
    if kernel.is_empty() {
        let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        return Err(SpectralError::NotARoot {
            k,
            ratio: min / max,
        });
    }
    // Gram–Schmidt in the exact L² inner product of the trigonometric ansatz
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for mut x in kernel.drain(..) {
        for b in &basis {
            let c = coefficient_inner(graph, k, &x, b);
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= c * bi);
        }
        let nrm = coefficient_inner(graph, k, &x, &x).sqrt();
        x.iter_mut().for_each(|xi| *xi /= nrm);
        let pivot = x
            .iter()
            .cloned()
            .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if pivot < 0.0 {
            x.iter_mut().for_each(|xi| *xi = -*xi);
        }
        basis.push(x);
    }
    debug_assert!(basis.iter().all(|b| b.len() == n));
    basis
        .iter()
        .map(|c| {
            GraphFunction::sample(graph, counts, |e, x| {
                c[2 * e] * (k * x).cos() + c[2 * e + 1] * (k * x).sin()
            })
        })
        .collect::<Result<Vec<_>, GraphError>>()
        .map_err(SpectralError::from)
}

/// Kernel function number `index` at `k` on the given grid.
pub fn eigenfunction_on(
    graph: &MetricGraph,
    k: f64,
    index: usize,
    counts: &[usize],
) -> Result<GraphFunction, SpectralError> {
    let mut space = eigenspace(graph, k, counts)?;
    if index >= space.len() {
        return Err(SpectralError::IndexExceedsMultiplicity {
            index,
            multiplicity: space.len(),
        });
    }
    Ok(space.swap_remove(index))
}

/// Kernel function number `index` at `k`, on a grid fine enough that its
/// Rayleigh quotient is within `1e-8·(1 + k²)` of `k²`.
pub fn eigenfunction(
    graph: &MetricGraph,
    k: f64,
    index: usize,
) -> Result<GraphFunction, SpectralError> {
    let lambda = k * k;
    // interpolation error of the quotient is about λ²h²/12
    let h = if lambda > 0.0 {
        0.5 * (12e-8 * (1.0 + lambda)).sqrt() / lambda
    } else {
        0.25
    };
    let counts = GraphFunction::counts_for_step(graph, h.min(0.25));
    eigenfunction_on(graph, k, index, &counts)
}
