use nalgebra::DMatrix;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::str::FromStr;

use super::{Resonance, ResonanceError, ResonanceMethod, C};
use crate::graph::MetricGraph;
use crate::linalg::gauss_legendre;
use crate::spectral::{secular_system, singular_values};

/// Closed rectangle `[re_min, re_max] × [im_min, im_max]` in the k-plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Window {
    /// Checks orientation, that the window stays in `Im k ≤ 0` and avoids k = 0.
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self, ResonanceError> {
        let w = Self {
            re_min,
            re_max,
            im_min,
            im_max,
        };
        if ![re_min, re_max, im_min, im_max]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(ResonanceError::InvalidWindow(
                "bounds must be finite".into(),
            ));
        }
        if re_min >= re_max || im_min >= im_max {
            return Err(ResonanceError::InvalidWindow("empty rectangle".into()));
        }
        if im_max > 0.0 {
            return Err(ResonanceError::InvalidWindow(
                "window must lie in Im k ≤ 0".into(),
            ));
        }
        if w.contains(C::new(0.0, 0.0), 1e-8) {
            return Err(ResonanceError::InvalidWindow(
                "window contains k = 0".into(),
            ));
        }
        Ok(w)
    }

    pub fn contains(&self, k: C, tol: f64) -> bool {
        k.re >= self.re_min - tol
            && k.re <= self.re_max + tol
            && k.im >= self.im_min - tol
            && k.im <= self.im_max + tol
    }

    /// The same window translated by `dk`.
    pub fn shifted(&self, dk: C) -> Result<Self, ResonanceError> {
        Self::new(
            self.re_min + dk.re,
            self.re_max + dk.re,
            self.im_min + dk.im,
            self.im_max + dk.im,
        )
    }
}

impl FromStr for Window {
    type Err = ResonanceError;

    /// Parses `re_min,re_max,im_min,im_max`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| ResonanceError::InvalidWindow(format!("{s:?}: {e}")))?;
        match parts[..] {
            [a, b, c, d] => Self::new(a, b, c, d),
            _ => Err(ResonanceError::InvalidWindow(format!(
                "{s:?}: expected four comma-separated numbers"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ContourOptions {
    /// Gauss–Legendre nodes per rectangle side.
    pub nodes: usize,
    /// Rectangles are split until they hold one root or fall below this diameter.
    pub isolation_diameter: f64,
    pub newton_tol: f64,
    pub max_retries: usize,
    /// Contour points closer than this (estimated) to a root trigger a retry.
    pub near_root: f64,
    /// The window is enlarged by this fraction of its longer side before counting,
    /// so that roots on its boundary are enclosed.
    pub margin_rel: f64,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            nodes: 512,
            isolation_diameter: 1e-2,
            newton_tol: 1e-10,
            max_retries: 5,
            near_root: 1e-8,
            margin_rel: 0.02,
        }
    }
}

/// Outgoing-wave secular matrix `S(k)`: internal edges carry `a cos kx + b sin kx`,
/// leads carry `c e^{ikx}`. Size `2|E_int| + |E_ext|`.
pub fn outgoing_secular(graph: &MetricGraph, k: C) -> Result<DMatrix<C>, ResonanceError> {
    if graph.is_compact() {
        return Err(ResonanceError::NoLeads);
    }
    if k.norm() == 0.0 {
        return Err(ResonanceError::ZeroMomentum);
    }
    Ok(secular_system(graph, k, false).0)
}

/// `(det S)′ / det S = tr(S⁻¹ S′)`; `None` where `S(k)` is numerically singular.
pub fn log_derivative(graph: &MetricGraph, k: C) -> Option<C> {
    let (s, ds) = secular_system(graph, k, true);
    let x = s.lu().solve(&ds?)?;
    let t = x.trace();
    (t.re.is_finite() && t.im.is_finite()).then_some(t)
}

fn residual(graph: &MetricGraph, k: C) -> f64 {
    let s = singular_values(&secular_system(graph, k, false).0);
    s.last().copied().unwrap_or(0.0) / s.first().copied().unwrap_or(1.0).max(1.0)
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Rect {
    fn diameter(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }

    fn center(&self) -> C {
        C::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    fn contains(&self, k: C, tol: f64) -> bool {
        k.re >= self.x0 - tol
            && k.re <= self.x1 + tol
            && k.im >= self.y0 - tol
            && k.im <= self.y1 + tol
    }

    /// Splits across the longer side at fraction `t`.
    fn split(&self, t: f64) -> (Rect, Rect) {
        if self.x1 - self.x0 >= self.y1 - self.y0 {
            let xm = self.x0 + t * (self.x1 - self.x0);
            (Rect { x1: xm, ..*self }, Rect { x0: xm, ..*self })
        } else {
            let ym = self.y0 + t * (self.y1 - self.y0);
            (Rect { y1: ym, ..*self }, Rect { y0: ym, ..*self })
        }
    }

    fn corners(&self) -> [C; 4] {
        [
            C::new(self.x0, self.y0),
            C::new(self.x1, self.y0),
            C::new(self.x1, self.y1),
            C::new(self.x0, self.y1),
        ]
    }
}

// Offsets of the split point from the midpoint, one per retry.
const SPLIT_JITTER: [f64; 8] = [
    0.0, 0.0371, -0.0613, 0.0829, -0.1057, 0.1283, -0.1511, 0.1739,
];

struct Counter<'a> {
    graph: &'a MetricGraph,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    opts: &'a ContourOptions,
}

impl Counter<'_> {
    /// Winding number of det S around the rectangle, `None` if the contour passes
    /// too close to a root for the quadrature to resolve.
    fn count(&self, r: &Rect) -> Option<usize> {
        let c = r.corners();
        let sides = [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])];
        let n = self.nodes.len();
        let terms: Vec<Option<C>> = (0..4 * n)
            .into_par_iter()
            .map(|i| {
                let (a, b) = sides[i / n];
                let half = (b - a) * 0.5;
                let z = a + half * (self.nodes[i % n] + 1.0);
                let g = log_derivative(self.graph, z)?;
                if 1.0 / g.norm() < self.opts.near_root {
                    return None;
                }
                Some(g * half * self.weights[i % n])
            })
            .collect();
        let mut total = C::new(0.0, 0.0);
        for t in terms {
            total += t?;
        }
        let w = total / C::new(0.0, 2.0 * PI);
        let m = w.re.round();
        ((w.re - m).abs() < 0.05 && w.im.abs() < 0.05 && m >= 0.0).then_some(m as usize)
    }

    fn newton(&self, start: C, m: usize) -> Option<C> {
        let mut k = start;
        for _ in 0..100 {
            let Some(g) = log_derivative(self.graph, k) else {
                return Some(k);
            };
            let dk = C::new(m as f64, 0.0) / g;
            k -= dk;
            if !(k.re.is_finite() && k.im.is_finite()) {
                return None;
            }
            if dk.norm() <= self.opts.newton_tol {
                // one more step to land well inside the tolerance
                if let Some(g) = log_derivative(self.graph, k) {
                    let dk = C::new(m as f64, 0.0) / g;
                    if dk.norm() <= self.opts.newton_tol {
                        k -= dk;
                    }
                }
                return Some(k);
            }
        }
        None
    }

    fn isolate(&self, r: Rect, n: usize, out: &mut Vec<(C, usize)>) -> Result<(), ResonanceError> {
        if n == 0 {
            return Ok(());
        }
        let small = r.diameter() <= self.opts.isolation_diameter;
        if n == 1 || small {
            if let Some(k) = self.newton(r.center(), n) {
                if r.contains(k, 1e-12 * (1.0 + k.norm())) {
                    out.push((k, n));
                    return Ok(());
                }
            }
            if small {
                return Err(ResonanceError::NoConvergence { k: r.center() });
            }
        }
        for (attempt, jitter) in SPLIT_JITTER
            .iter()
            .enumerate()
            .take(self.opts.max_retries + 1)
        {
            let (a, b) = r.split(0.5 + jitter);
            let (Some(na), Some(nb)) = (self.count(&a), self.count(&b)) else {
                continue;
            };
            if na + nb != n {
                if attempt < self.opts.max_retries {
                    continue;
                }
                return Err(ResonanceError::CountMismatch {
                    expected: n,
                    found: na + nb,
                });
            }
            self.isolate(a, na, out)?;
            return self.isolate(b, nb, out);
        }
        Err(ResonanceError::ContourHitsRoot {
            retries: self.opts.max_retries,
        })
    }
}

pub fn find_resonances(
    graph: &MetricGraph,
    window: &Window,
) -> Result<Vec<Resonance>, ResonanceError> {
    find_resonances_with(graph, window, &ContourOptions::default())
}

/// All roots of `det S(k)` in the closed window, with multiplicities, sorted by
/// real then imaginary part.
pub fn find_resonances_with(
    graph: &MetricGraph,
    window: &Window,
    opts: &ContourOptions,
) -> Result<Vec<Resonance>, ResonanceError> {
    if graph.is_compact() {
        return Err(ResonanceError::NoLeads);
    }
    if opts.nodes < 2 {
        return Err(ResonanceError::InvalidParameter(
            "at least two quadrature nodes per side".into(),
        ));
    }
    let (nodes, weights) = gauss_legendre(opts.nodes);
    let counter = Counter {
        graph,
        nodes,
        weights,
        opts,
    };
    let side = (window.re_max - window.re_min).max(window.im_max - window.im_min);
    for attempt in 0..=opts.max_retries {
        let m = opts.margin_rel * side * (1.0 + 0.29 * attempt as f64);
        let mut r = Rect {
            x0: window.re_min - m,
            x1: window.re_max + m,
            y0: window.im_min - m,
            y1: window.im_max + m,
        };
        // keep k = 0 outside the enlarged contour
        if window.re_min > 0.0 {
            r.x0 = window.re_min - m.min(0.5 * window.re_min);
        } else if window.re_max < 0.0 {
            r.x1 = window.re_max + m.min(-0.5 * window.re_max);
        } else if window.im_max < 0.0 {
            r.y1 = window.im_max + m.min(-0.5 * window.im_max);
        }
        let Some(n) = counter.count(&r) else { continue };
        let mut roots = Vec::new();
        match counter.isolate(r, n, &mut roots) {
            Ok(()) => {}
            Err(ResonanceError::ContourHitsRoot { .. }) if attempt < opts.max_retries => continue,
            Err(e) => return Err(e),
        }
        let found: usize = roots.iter().map(|r| r.1).sum();
        if found != n {
            return Err(ResonanceError::CountMismatch { expected: n, found });
        }
        let mut out: Vec<Resonance> = roots
            .into_iter()
            .filter(|(k, _)| window.contains(*k, 1e-8))
            .map(|(k, m)| {
                Resonance::new(
                    k,
                    m,
                    residual(graph, k),
                    C::new(0.0, 0.0),
                    ResonanceMethod::Secular,
                )
            })
            .collect();
        out.sort_by(|a, b| a.k.re.total_cmp(&b.k.re).then(a.k.im.total_cmp(&b.k.im)));
        return Ok(out);
    }
    Err(ResonanceError::ContourHitsRoot {
        retries: opts.max_retries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Label};

    fn closed_form(k: C) -> C {
        let h = k * 0.5;
        h.sin() * (h.sin() * 2.0 + C::i() * h.cos())
    }

    #[test]
    fn loop_lead_determinant_is_proportional_to_closed_form() {
        let g = MetricGraph::loop_with_lead(1.0);
        let ks = [
            C::new(1.3, -0.2),
            C::new(4.0, -0.7),
            C::new(7.1, 0.3),
            C::new(0.4, -1.9),
        ];
        let ratios: Vec<C> = ks
            .iter()
            .map(|&k| outgoing_secular(&g, k).unwrap().determinant() / closed_form(k))
            .collect();
        for r in &ratios[1..] {
            assert!(
                (r - ratios[0]).norm() < 1e-12 * ratios[0].norm(),
                "{r} vs {}",
                ratios[0]
            );
        }
    }

    #[test]
    fn size_and_rejections() {
        let g = MetricGraph::loop_with_lead(1.0);
        assert_eq!(outgoing_secular(&g, C::new(1.0, 0.0)).unwrap().nrows(), 3);
        assert!(matches!(
            outgoing_secular(&g, C::new(0.0, 0.0)),
            Err(ResonanceError::ZeroMomentum)
        ));
        assert!(matches!(
            outgoing_secular(&MetricGraph::unit_loop(), C::new(1.0, 0.0)),
            Err(ResonanceError::NoLeads)
        ));
    }

    #[test]
    fn window_validation() {
        assert!(Window::new(0.1, 20.0, -2.0, 0.0).is_ok());
        assert!(Window::new(-1.0, 1.0, -1.0, 0.0).is_err());
        assert!(Window::new(1.0, 2.0, -1.0, 0.5).is_err());
        assert!(Window::new(2.0, 1.0, -1.0, 0.0).is_err());
        let w: Window = "0.1, 20, -2, 0".parse().unwrap();
        assert_eq!(w, Window::new(0.1, 20.0, -2.0, 0.0).unwrap());
        assert!("1,2,3".parse::<Window>().is_err());
    }

    #[test]
    fn embedded_root_kernel() {
        let g = MetricGraph::loop_with_lead(1.0);
        let s = singular_values(&outgoing_secular(&g, C::new(2.0 * PI, 0.0)).unwrap());
        assert!(s[2] < 1e-12 && s[1] > 1e-3);
    }

    #[test]
    fn single_lead_segment_has_no_resonances() {
        // vertex with a unit internal segment and a lead; no roots expected below the axis
        let g = MetricGraph::new(
            vec![Label::Int(0), Label::Int(1)],
            vec![
                Edge {
                    label: 0.into(),
                    from: 0,
                    to: Some(1),
                    length: 1.0,
                },
                Edge {
                    label: 1.into(),
                    from: 1,
                    to: None,
                    length: f64::INFINITY,
                },
            ],
            2,
            1.0,
        )
        .unwrap();
        for w in [
            Window::new(0.1, 10.0, -2.0, -0.01).unwrap(),
            Window::new(0.1, 30.0, -5.0, -0.5).unwrap(),
        ] {
            assert!(find_resonances(&g, &w).unwrap().is_empty());
        }
    }

    #[test]
    fn empty_window() {
        let g = MetricGraph::loop_with_lead(1.0);
        let w = Window::new(0.5, 5.0, -0.8, -0.2).unwrap();
        assert!(find_resonances(&g, &w).unwrap().is_empty());
    }
}
