use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Resonance, ResonanceError, ResonanceMethod, Window, C};
use crate::graph::{
    cells_for, fd_discretize_with, split_external, GraphPartition, MassKind, MetricGraph,
    CUT_DISTANCE,
};
use crate::linalg::{ComplexLuSolver, CsrMatrix};
use crate::spectral::romberg_from;

/// Image `e^{−2θ}[0, Λ]` of the continuum under dilation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EssentialRay {
    /// Argument of the ray, `−2 Im θ`.
    pub angle: f64,
    pub length: f64,
}

impl EssentialRay {
    pub fn point(&self, t: f64) -> C {
        C::from_polar(t, self.angle)
    }

    /// Angular distance of `z` from the ray, in `[0, π]`.
    pub fn angular_distance(&self, z: C) -> f64 {
        let d = (z.arg() - self.angle).rem_euclid(2.0 * std::f64::consts::PI);
        d.min(2.0 * std::f64::consts::PI - d)
    }

    /// True when `z` lies within `tol` radians of the ray and not beyond its end.
    pub fn masks(&self, z: C, tol: f64) -> bool {
        z.norm() <= self.length * (1.0 + tol) && self.angular_distance(z) <= tol
    }

    /// True when a point at argument `arg z` has been uncovered, i.e. lies strictly between the ray and the positive axis.
    pub fn reveals(&self, z: C, margin: f64) -> bool {
        let a = z.arg();
        a <= margin.max(0.0) && a >= self.angle + margin
    }
}

pub fn essential_ray(theta: C, lambda_max: f64) -> EssentialRay {
    EssentialRay {
        angle: -2.0 * theta.im,
        length: lambda_max,
    }
}

/// Finite-difference pencil `A u = λ M u` of the dilated operator on
/// the interior graph plus truncated exterior rays.
#[derive(Clone, Debug)]
pub struct DilatedPencil {
    pub stiffness: CsrMatrix<C>,
    pub mass: CsrMatrix<C>,
    pub theta: C,
    pub partition: GraphPartition,
    /// Number of DOFs of the interior graph; exterior DOFs follow.
    pub n_interior: usize,
}

/// Builds the truncated dilated pencil: `−∂ₓₓ` on the interior graph,
/// `−e^{−2θ}∂ₓₓ` on rays from the cut point to `x = l_trunc`, exterior values
/// `e^{θ/2}` times the interior value at the cut, Dirichlet at the end.
/// P1 elements with the averaged mass matrix.
pub fn dilated_fd_matrix(
    graph: &MetricGraph,
    theta: C,
    l_trunc: f64,
    h: f64,
) -> Result<DilatedPencil, ResonanceError> {
    if !(theta.im > 0.0) || !theta.re.is_finite() {
        return Err(ResonanceError::InvalidTheta(format!(
            "Im θ = {} must be positive",
            theta.im
        )));
    }
    if !(l_trunc >= 10.0 && l_trunc.is_finite()) {
        return Err(ResonanceError::InvalidParameter(format!(
            "truncation length {l_trunc} must be at least 10"
        )));
    }
    let max = graph.l0() / 8.0;
    if !(h > 0.0 && h <= max * (1.0 + 1e-12)) {
        return Err(ResonanceError::InvalidParameter(format!(
            "grid step {h} must lie in (0, {max}]"
        )));
    }
    let partition = split_external(graph)?;
    let interior = &partition.interior;
    let counts: Vec<usize> = interior
        .edges()
        .iter()
        .map(|e| cells_for(e.length, h))
        .collect();
    let sys = fd_discretize_with(interior, &counts, MassKind::Averaged)?;
    let n_interior = sys.dofs.n_dofs();
    let to_c = |(r, c, v): (usize, usize, f64)| (r, c, C::new(v, 0.0));
    let mut ta: Vec<(usize, usize, C)> = sys.stiffness.triplets().into_iter().map(to_c).collect();
    let mut tm: Vec<(usize, usize, C)> = sys.mass.triplets().into_iter().map(to_c).collect();
    let rot = (-2.0 * theta).exp();
    let jump = (0.5 * theta).exp();
    let one = C::new(1.0, 0.0);
    let mut next = n_interior;
    for ray in &partition.exterior {
        let len = l_trunc - CUT_DISTANCE;
        let n = cells_for(len, h);
        let hx = len / n as f64;
        let me = MassKind::Averaged.element(hx);
        // node j of the ray: j = 0 is the cut point, j = n the Dirichlet end
        let first = next;
        next += n - 1;
        let dof = |j: usize| -> Option<(usize, C)> {
            match j {
                0 => Some((ray.cut_vertex, jump)),
                j if j < n => Some((first + j - 1, one)),
                _ => None,
            }
        };
        for j in 0..n {
            let nodes = [dof(j), dof(j + 1)];
            for a in 0..2 {
                for b in 0..2 {
                    let (Some((ra, sa)), Some((rb, sb))) = (nodes[a], nodes[b]) else {
                        continue;
                    };
                    let sign = if a == b { 1.0 } else { -1.0 };
                    ta.push((ra, rb, rot * sa * sb * (sign / hx)));
                    tm.push((ra, rb, sa * sb * me[a][b]));
                }
            }
        }
    }
    Ok(DilatedPencil {
        stiffness: CsrMatrix::from_triplets(next, next, &ta),
        mass: CsrMatrix::from_triplets(next, next, &tm),
        theta,
        partition,
        n_interior,
    })
}

fn bilinear(x: &[C], y: &[C]) -> C {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[C]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl DilatedPencil {
    pub fn dim(&self) -> usize {
        self.stiffness.nrows()
    }

    /// Every eigenvalue of the pencil, by a dense solve.
    pub fn eigenvalues(&self) -> Result<Vec<C>, ResonanceError> {
        Ok(CsrMatrix::pencil_eigenvalues(&self.stiffness, &self.mass)?)
    }

    /// Normwise backward error of an approximate eigenpair.
    pub fn residual(&self, lambda: C, x: &[C]) -> f64 {
        let ax = self.stiffness.matvec(x);
        let mx = self.mass.matvec(x);
        let r: Vec<C> = ax.iter().zip(&mx).map(|(a, m)| a - lambda * m).collect();
        norm(&r) / ((self.stiffness.norm_inf() + lambda.norm() * self.mass.norm_inf()) * norm(x))
    }

    /// Eigenvalue nearest `target`: inverse iteration at the fixed shift, then
    /// Rayleigh-quotient iteration with the bilinear (complex-symmetric) quotient.
    pub fn nearest_eigenvalue(&self, target: C, tol: f64) -> Result<(C, Vec<C>), ResonanceError> {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut x: Vec<C> = (0..n)
            .map(|_| C::new(rng.random::<f64>() - 0.5, 0.0))
            .collect();
        let mut shift = target;
        let mut lambda = target;
        let mut solver = self.shifted_solver(shift)?;
        for it in 0..60 {
            let y = solver.solve(&self.mass.matvec(&x));
            let s = norm(&y);
            if !(s.is_finite() && s > 0.0) {
                return Err(ResonanceError::TrackingFailed { lambda: target });
            }
            x = y.into_iter().map(|z| z / s).collect();
            let prev = lambda;
            lambda = bilinear(&x, &self.stiffness.matvec(&x)) / bilinear(&x, &self.mass.matvec(&x));
            if it >= 3
                && self.residual(lambda, &x) <= tol
                && (lambda - prev).norm() <= 1e-9 * (1.0 + lambda.norm())
            {
                return Ok((lambda, x));
            }
            if it >= 3 && (lambda - shift).norm() > 1e-13 * (1.0 + lambda.norm()) {
                shift = lambda;
                match self.shifted_solver(shift) {
                    Ok(s) => solver = s,
                    // the shift hit the eigenvalue exactly
                    Err(_) => return Ok((lambda, x)),
                }
            }
        }
        Err(ResonanceError::TrackingFailed { lambda: target })
    }

    fn shifted_solver(&self, shift: C) -> Result<ComplexLuSolver, ResonanceError> {
        Ok(ComplexLuSolver::new(
            &self.stiffness.add_scaled(&self.mass, -shift),
        )?)
    }

    /// Eigenvalues whose momentum lies in `window`, dropping those within
    /// `ray_tol` radians of the rotated continuum.
    pub fn revealed_in(
        &self,
        window: &Window,
        ray_tol: f64,
    ) -> Result<Vec<Resonance>, ResonanceError> {
        let ray = essential_ray(self.theta, f64::INFINITY);
        let mut out: Vec<Resonance> = self
            .eigenvalues()?
            .into_iter()
            .filter(|&l| !ray.masks(l, ray_tol))
            .filter_map(|l| {
                let k = Resonance::momentum(l);
                // embedded eigenvalues carry roundoff of either sign in Im λ
                window.contains(k, 1e-8 * (1.0 + k.norm())).then(|| {
                    let mut r =
                        Resonance::new(k, 1, f64::NAN, self.theta, ResonanceMethod::DilatedFd);
                    r.lambda = l;
                    r
                })
            })
            .collect();
        out.sort_by(|a, b| a.k.re.total_cmp(&b.k.re).then(a.k.im.total_cmp(&b.k.im)));
        Ok(out)
    }
}

/// Settings for [`dilated_resonances`].
#[derive(Clone, Debug)]
pub struct RevealOptions {
    pub l_trunc: f64,
    pub h: f64,
    /// Candidates this close (in radians) to the rotated continuum are dropped.
    pub ray_tol: f64,
    /// Second dilation `θ + probe` used to separate discrete from continuum eigenvalues.
    pub probe: C,
    pub stable_rel: f64,
}

impl Default for RevealOptions {
    fn default() -> Self {
        Self {
            l_trunc: 20.0,
            h: 1.0 / 64.0,
            ray_tol: 0.15,
            probe: C::new(0.0, 0.1),
            stable_rel: 0.02,
        }
    }
}

/// Discrete eigenvalues of the dilated pencil with momentum in `window`.
///
/// Candidates near the rotated continuum are dropped; the rest are kept only
/// if the nearest eigenvalue at `θ + probe` lies within `stable_rel·|λ|`.
/// Continuum eigenvalues rotate with θ, discrete ones do not.
pub fn dilated_resonances(
    graph: &MetricGraph,
    theta: C,
    window: &Window,
    opts: &RevealOptions,
) -> Result<Vec<Resonance>, ResonanceError> {
    let (l_trunc, h, ray_tol, probe, stable_rel) = (
        opts.l_trunc,
        opts.h,
        opts.ray_tol,
        opts.probe,
        opts.stable_rel,
    );
    let p = dilated_fd_matrix(graph, theta, l_trunc, h)?;
    let q = dilated_fd_matrix(graph, theta + probe, l_trunc, h)?;
    let mut out = Vec::new();
    for r in p.revealed_in(window, ray_tol)? {
        let (moved, _) = q.nearest_eigenvalue(r.lambda, 1e-12)?;
        if (moved - r.lambda).norm() <= stable_rel * r.lambda.norm() {
            let (l, x) = p.nearest_eigenvalue(r.lambda, 1e-12)?;
            let mut res = Resonance::new(
                Resonance::momentum(l),
                1,
                p.residual(l, &x),
                theta,
                ResonanceMethod::DilatedFd,
            );
            res.lambda = l;
            out.push(res);
        }
    }
    Ok(out)
}

/// Grid and truncation settings for [`theta_independence`].
#[derive(Clone, Debug)]
pub struct TrackOptions {
    pub l_trunc: f64,
    /// Coarsest grid step; `levels` grids with h halved each time are extrapolated.
    pub h0: f64,
    pub levels: usize,
    pub tol: f64,
    /// Angular margin by which the ray must have passed the eigenvalue.
    pub reveal_margin: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            l_trunc: 20.0,
            h0: 1.0 / 32.0,
            levels: 5,
            tol: 1e-13,
            reveal_margin: 0.05,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ThetaStudy {
    /// Extrapolated eigenvalue per θ; `None` when the ray did not reveal it.
    pub tracked: Vec<(C, Option<C>)>,
    pub max_deviation: f64,
    pub warnings: Vec<String>,
}

impl ThetaStudy {
    pub fn values(&self) -> Vec<C> {
        self.tracked.iter().filter_map(|t| t.1).collect()
    }
}

/// Extrapolated dilated eigenvalue near `lambda`, at one θ.
pub fn tracked_eigenvalue(
    graph: &MetricGraph,
    lambda: C,
    theta: C,
    opts: &TrackOptions,
) -> Result<C, ResonanceError> {
    if opts.levels == 0 {
        return Err(ResonanceError::InvalidParameter(
            "at least one grid level required".into(),
        ));
    }
    let mut values = Vec::with_capacity(opts.levels);
    let mut target = lambda;
    for i in 0..opts.levels {
        let h = opts.h0 / 2f64.powi(i as i32);
        let p = dilated_fd_matrix(graph, theta, opts.l_trunc, h)?;
        let (l, _) = p.nearest_eigenvalue(target, opts.tol)?;
        values.push(l);
        target = l;
    }
    // the bulk error is O(h⁴) but vertices and the cut point contribute O(h²)
    Ok(romberg_from(&values, 2))
}

/// Maximum pairwise deviation of the tracked eigenvalue across `thetas`.
pub fn theta_independence(
    graph: &MetricGraph,
    resonance: &Resonance,
    thetas: &[C],
    opts: &TrackOptions,
) -> Result<ThetaStudy, ResonanceError> {
    let mut tracked = Vec::with_capacity(thetas.len());
    let mut warnings = Vec::new();
    for &theta in thetas {
        let ray = essential_ray(theta, f64::INFINITY);
        if !ray.reveals(resonance.lambda, opts.reveal_margin) {
            warnings.push(format!(
                "θ = {theta}: λ = {} not revealed by the ray at angle {}",
                resonance.lambda, ray.angle
            ));
            tracked.push((theta, None));
            continue;
        }
        tracked.push((
            theta,
            Some(tracked_eigenvalue(graph, resonance.lambda, theta, opts)?),
        ));
    }
    let vals: Vec<C> = tracked.iter().filter_map(|t| t.1).collect();
    let mut max_deviation: f64 = 0.0;
    for (i, a) in vals.iter().enumerate() {
        for b in &vals[i + 1..] {
            max_deviation = max_deviation.max((a - b).norm());
        }
    }
    Ok(ThetaStudy {
        tracked,
        max_deviation,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ray_angles() {
        assert_eq!(essential_ray(C::new(0.0, 0.0), 10.0).angle, 0.0);
        assert!((essential_ray(C::new(0.0, PI / 6.0), 10.0).angle + PI / 3.0).abs() < 1e-15);
        assert!((essential_ray(C::new(0.2, 0.3), 10.0).angle + 0.6).abs() < 1e-15);
        let r = essential_ray(C::new(0.0, 0.5), 100.0);
        assert!(r.masks(C::from_polar(50.0, -1.0), 1e-6));
        assert!(!r.masks(C::from_polar(50.0, -0.3), 0.05));
        assert!(r.reveals(C::from_polar(50.0, -0.3), 0.05));
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = MetricGraph::loop_with_lead(1.0);
        assert!(matches!(
            dilated_fd_matrix(&g, C::new(0.0, 0.0), 20.0, 1.0 / 64.0),
            Err(ResonanceError::InvalidTheta(_))
        ));
        assert!(dilated_fd_matrix(&g, C::new(0.0, 0.5), 5.0, 1.0 / 64.0).is_err());
        assert!(dilated_fd_matrix(&g, C::new(0.0, 0.5), 20.0, 0.5).is_err());
        assert!(dilated_fd_matrix(
            &MetricGraph::unit_loop(),
            C::new(0.0, 0.5),
            20.0,
            1.0 / 64.0
        )
        .is_err());
    }

    #[test]
    fn pencil_is_complex_symmetric() {
        let g = MetricGraph::loop_with_lead(1.0);
        let p = dilated_fd_matrix(&g, C::new(0.0, 0.5), 10.0, 1.0 / 16.0).unwrap();
        for m in [&p.stiffness, &p.mass] {
            for (r, c, v) in m.triplets() {
                assert!((m.get(c, r) - v).norm() <= 1e-15 * v.norm());
            }
        }
        assert_eq!(p.dim(), p.n_interior + 9 * 16 - 1);
    }
}
