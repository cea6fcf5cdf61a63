use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::maps::{column_average, region_integrals};
use super::CouplingError;
use crate::graph::End;
use crate::manifold::{FatGraphMesh, RegionTag};

/// Margins below this count as violations.
pub const MARGIN_TOL: f64 = -1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMode {
    /// Vertex mean against the transverse mean at the interface.
    Cn,
    /// Mass on a vertex region against energy nearby.
    Vx,
    /// One-dimensional trace estimate on `[0, l0/2]`.
    Trace,
}

impl CheckMode {
    pub const ALL: [CheckMode; 3] = [CheckMode::Cn, CheckMode::Vx, CheckMode::Trace];
}

impl std::fmt::Display for CheckMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CheckMode::Cn => "cn",
            CheckMode::Vx => "vx",
            CheckMode::Trace => "trace",
        })
    }
}

impl std::str::FromStr for CheckMode {
    type Err = CouplingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cn" => Ok(CheckMode::Cn),
            "vx" => Ok(CheckMode::Vx),
            "trace" => Ok(CheckMode::Trace),
            other => Err(CouplingError::InvalidParameter(format!(
                "unknown check mode '{other}' (expected cn, vx or trace)"
            ))),
        }
    }
}

/// Constants entering the inequalities, taken from the vertex templates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InequalityConstants {
    pub l0: f64,
    /// Smallest template `λ₂`.
    pub lambda2: f64,
    /// Largest template volume.
    pub c_vol: f64,
    pub c_vx: f64,
}

impl InequalityConstants {
    pub fn from_mesh(mesh: &FatGraphMesh) -> Self {
        let templates = mesh.vertex_regions().iter().map(|v| &v.template);
        let l0 = templates
            .clone()
            .map(|t| t.l0)
            .fold(f64::INFINITY, f64::min);
        let lambda2 = templates
            .clone()
            .map(|t| t.lambda2)
            .fold(f64::INFINITY, f64::min);
        let c_vol = templates.map(|t| t.vol).fold(0.0, f64::max);
        let k1 = lambda2.powf(-0.5) + (8.0 * c_vol * (1.0 + 1.0 / lambda2) / l0).sqrt();
        let k2_sq = 8.0 * c_vol / l0;
        Self {
            l0,
            lambda2,
            c_vol,
            c_vx: 2.0 * (k1 * k1).max(k2_sq),
        }
    }

    /// Factor `(8/l0)(1 + 1/λ₂)`.
    pub fn c_cn(&self) -> f64 {
        8.0 / self.l0 * (1.0 + 1.0 / self.lambda2)
    }
}

/// Both sides of one instance of an inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Margin {
    pub vertex: usize,
    pub edge: usize,
    pub end: End,
    pub lhs: f64,
    pub rhs: f64,
}

impl Margin {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginReport {
    pub mode: CheckMode,
    pub constants: InequalityConstants,
    pub margins: Vec<Margin>,
}

impl MarginReport {
    pub fn min_margin(&self) -> f64 {
        self.margins
            .iter()
            .map(Margin::margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn violations(&self) -> usize {
        self.margins
            .iter()
            .filter(|m| m.margin() < MARGIN_TOL)
            .count()
    }
}

/// `(8/l0)∫(f² + f′²) − |f(0)|²` for the piecewise linear interpolant of
/// `samples`, taken at uniform spacing on `[0, l0/2]`.
pub fn trace_margin(samples: &[f64], l0: f64) -> Result<f64, CouplingError> {
    if samples.len() < 2 || !(l0 > 0.0) {
        return Err(CouplingError::InvalidParameter(format!(
            "trace check needs at least two samples and l0 > 0, got {} and {l0}",
            samples.len()
        )));
    }
    let h = 0.5 * l0 / (samples.len() - 1) as f64;
    let xs: Vec<f64> = (0..samples.len()).map(|i| i as f64 * h).collect();
    let (lhs, rhs) = trace_sides(&xs, samples, l0);
    Ok(rhs - lhs)
}

/// Sides of the trace estimate for the interpolant through `(xs, fs)`,
/// integrated exactly up to `min(l0/2, xs.last)`.
fn trace_sides(xs: &[f64], fs: &[f64], l0: f64) -> (f64, f64) {
    let end = 0.5 * l0;
    let mut integral = 0.0;
    for k in 0..xs.len() - 1 {
        let (x0, x1) = (xs[k], xs[k + 1]);
        if x0 >= end {
            break;
        }
        let (a, mut b) = (fs[k], fs[k + 1]);
        let slope = (b - a) / (x1 - x0);
        let len = x1.min(end) - x0;
        if x1 > end {
            b = a + slope * len;
        }
        integral += len * (a * a + a * b + b * b) / 3.0 + slope * slope * len;
    }
    (fs[0] * fs[0], 8.0 / l0 * integral)
}

/// Evaluates the inequality `mode` for a conforming vector `u`, once per
/// vertex-edge incidence.
pub fn inequality_checks(
    u: &[f64],
    mesh: &FatGraphMesh,
    mode: CheckMode,
) -> Result<MarginReport, CouplingError> {
    if u.len() != mesh.n_dofs() {
        return Err(CouplingError::GridMismatch(format!(
            "vector of length {} for a mesh with {} dofs",
            u.len(),
            mesh.n_dofs()
        )));
    }
    let w = mesh.lift(u);
    let constants = InequalityConstants::from_mesh(mesh);
    let eps = mesh.eps();
    let margins = mesh
        .interfaces()
        .iter()
        .map(|iface| {
            let (e, v) = (iface.edge, iface.vertex);
            let s = mesh.strip(e);
            let column = |k: usize| match iface.end {
                End::Start => column_average(mesh, &w, e, k),
                End::Finish => column_average(mesh, &w, e, s.n_x - k),
            };
            let (lhs, rhs) = match mode {
                CheckMode::Cn => {
                    let r = region_integrals(mesh, &w, RegionTag::Vertex(v));
                    let diff = r.integral / r.area - column(0);
                    (eps * diff * diff, constants.c_cn() * eps * r.energy)
                }
                CheckMode::Vx => {
                    let r = region_integrals(mesh, &w, RegionTag::Vertex(v));
                    let strip = region_integrals(mesh, &w, RegionTag::Edge(e));
                    (
                        r.l2_sq,
                        constants.c_vx * eps * (r.energy + strip.l2_sq + strip.energy),
                    )
                }
                CheckMode::Trace => {
                    let hx = s.hx();
                    let last = ((0.5 * constants.l0 / hx).ceil() as usize).min(s.n_x);
                    let xs: Vec<f64> = (0..=last).map(|k| k as f64 * hx).collect();
                    let fs: Vec<f64> = (0..=last).map(column).collect();
                    trace_sides(&xs, &fs, constants.l0)
                }
            };
            Margin {
                vertex: v,
                edge: e,
                end: iface.end,
                lhs,
                rhs,
            }
        })
        .collect();
    Ok(MarginReport {
        mode,
        constants,
        margins,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub mode: CheckMode,
    pub samples: usize,
    pub checks: usize,
    pub violations: usize,
    pub min_margin: f64,
    pub seed: u64,
}

/// Runs `mode` on `samples` seeded random P1 functions of varying smoothness.
pub fn random_inequality_suite(
    mesh: &FatGraphMesh,
    mode: CheckMode,
    samples: usize,
    seed: u64,
) -> Result<SuiteReport, CouplingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = mesh.stiffness();
    let diag: Vec<f64> = (0..mesh.n_dofs())
        .map(|i| {
            a.row(i)
                .find(|&(c, _)| c == i)
                .map(|(_, v)| v)
                .unwrap_or(1.0)
        })
        .collect();
    let mut report = SuiteReport {
        mode,
        samples,
        checks: 0,
        violations: 0,
        min_margin: f64::INFINITY,
        seed,
    };
    for _ in 0..samples {
        let offset = rng.random_range(-2.0..2.0);
        let amplitude = 10f64.powf(rng.random_range(-2.0..1.0));
        let mut u: Vec<f64> = (0..mesh.n_dofs())
            .map(|_| offset + amplitude * rng.random_range(-1.0..1.0))
            .collect();
        // damped Jacobi sweeps smooth the noise by a random amount
        for _ in 0..rng.random_range(0..40) {
            let au = a.matvec(&u);
            u.iter_mut()
                .zip(&au)
                .zip(&diag)
                .for_each(|((x, r), d)| *x -= 0.6 * r / d);
        }
        let r = inequality_checks(&u, mesh, mode)?;
        report.checks += r.margins.len();
        report.violations += r.violations();
        report.min_margin = report.min_margin.min(r.min_margin());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_closed_form() {
        let l0 = 0.4;
        let exact = 8.0 / l0 * (l0 / 6.0 + 2.0 / l0) - 1.0;
        assert!((trace_margin(&[1.0, 0.0], l0).unwrap() - exact).abs() < 1e-12);
        let fine: Vec<f64> = (0..=64).map(|i| 1.0 - i as f64 / 64.0).collect();
        assert!((trace_margin(&fine, l0).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn partial_cell_is_truncated() {
        // f = 1 on [0, 1], cut at l0/2 = 0.25
        let (lhs, rhs) = trace_sides(&[0.0, 1.0], &[1.0, 1.0], 0.5);
        assert_eq!(lhs, 1.0);
        assert!((rhs - 16.0 * 0.25).abs() < 1e-14);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in CheckMode::ALL {
            assert_eq!(m.to_string().parse::<CheckMode>().unwrap(), m);
        }
        assert!("xx".parse::<CheckMode>().is_err());
    }
}
