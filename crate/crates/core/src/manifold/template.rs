use std::collections::HashMap;
use std::f64::consts::PI;

use super::fem::{assemble_planar, p1_neumann_lowest};
use super::ManifoldError;

type P = [f64; 2];

/// Triangulated planar region with its interface segments.
#[derive(Clone, Debug, Default)]
pub struct PlanarMesh {
    pub nodes: Vec<P>,
    pub triangles: Vec<[usize; 3]>,
    /// Nodes of each interface ordered by the segment parameter `t ∈ [0, 1]`.
    pub interfaces: Vec<Vec<usize>>,
}

impl PlanarMesh {
    /// Lowest `count` P1 Neumann eigenvalues.
    pub fn neumann_eigenvalues(&self, count: usize) -> Result<Vec<f64>, ManifoldError> {
        let (a, m) = assemble_planar(self);
        p1_neumann_lowest(&a, &m, count)
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| triangle_area(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]))
            .sum()
    }
}

pub(crate) fn triangle_area(a: P, b: P, c: P) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Node deduplication by coordinates.
struct Builder {
    mesh: PlanarMesh,
    index: HashMap<(i64, i64), Vec<usize>>,
}

const MERGE_TOL: f64 = 1e-10;

impl Builder {
    fn new() -> Self {
        Self {
            mesh: PlanarMesh::default(),
            index: HashMap::new(),
        }
    }

    fn key(p: P) -> (i64, i64) {
        (
            (p[0] / MERGE_TOL).round() as i64,
            (p[1] / MERGE_TOL).round() as i64,
        )
    }

    fn find(&self, p: P) -> Option<usize> {
        let (kx, ky) = Self::key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = self.index.get(&(kx + dx, ky + dy)) {
                    for &i in list {
                        let q = self.mesh.nodes[i];
                        if (q[0] - p[0]).abs() <= MERGE_TOL && (q[1] - p[1]).abs() <= MERGE_TOL {
                            return Some(i);
                        }
                    }
                }
            }
        }
        None
    }

    fn node(&mut self, p: P) -> usize {
        if let Some(i) = self.find(p) {
            return i;
        }
        let i = self.mesh.nodes.len();
        self.mesh.nodes.push(p);
        self.index.entry(Self::key(p)).or_default().push(i);
        i
    }

    /// Adds a triangle, flipping it to counterclockwise orientation.
    fn triangle(&mut self, a: usize, b: usize, c: usize) {
        let n = &self.mesh.nodes;
        if triangle_area(n[a], n[b], n[c]) >= 0.0 {
            self.mesh.triangles.push([a, b, c]);
        } else {
            self.mesh.triangles.push([a, c, b]);
        }
    }

    /// Parallelogram `origin + s·u + t·w`, `s, t ∈ [0, 1]`, as an `nu × nw` grid of
    /// cells each cut along the same diagonal.
    fn grid(&mut self, origin: P, u: P, w: P, nu: usize, nw: usize) {
        let at = |i: usize, j: usize| {
            let s = i as f64 / nu as f64;
            let t = j as f64 / nw as f64;
            [
                origin[0] + s * u[0] + t * w[0],
                origin[1] + s * u[1] + t * w[1],
            ]
        };
        let ids: Vec<Vec<usize>> = (0..=nu)
            .map(|i| (0..=nw).map(|j| self.node(at(i, j))).collect())
            .collect();
        for i in 0..nu {
            for j in 0..nw {
                let (a, b, c, d) = (ids[i][j], ids[i + 1][j], ids[i + 1][j + 1], ids[i][j + 1]);
                self.triangle(a, b, c);
                self.triangle(a, c, d);
            }
        }
    }

    /// Triangle `o, a, b` refined into `n²` congruent pieces.
    fn refined_triangle(&mut self, o: P, a: P, b: P, n: usize) {
        let at = |i: usize, j: usize| {
            let s = i as f64 / n as f64;
            let t = j as f64 / n as f64;
            [
                o[0] + s * (a[0] - o[0]) + t * (b[0] - o[0]),
                o[1] + s * (a[1] - o[1]) + t * (b[1] - o[1]),
            ]
        };
        let mut ids = vec![vec![0usize; n + 1]; n + 1];
        for i in 0..=n {
            for j in 0..=n - i {
                ids[i][j] = self.node(at(i, j));
            }
        }
        for i in 0..n {
            for j in 0..n - i {
                self.triangle(ids[i][j], ids[i + 1][j], ids[i][j + 1]);
                if i + j + 1 < n {
                    self.triangle(ids[i + 1][j], ids[i + 1][j + 1], ids[i][j + 1]);
                }
            }
        }
    }

    fn interface(&mut self, center: P, tangent: P, n: usize) -> Result<(), ManifoldError> {
        let mut list = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let s = j as f64 / n as f64 - 0.5;
            let p = [center[0] + s * tangent[0], center[1] + s * tangent[1]];
            list.push(self.find(p).ok_or_else(|| {
                ManifoldError::NonConforming(format!("no mesh node at interface point {p:?}"))
            })?);
        }
        self.mesh.interfaces.push(list);
        Ok(())
    }
}

/// Domains whose lowest Neumann eigenvalues can be computed by [`template_constants`].
pub trait NeumannRegion {
    /// Exact area.
    fn area(&self) -> f64;
    /// Triangulation with element size about `h`.
    fn mesh_with_step(&self, h: f64) -> Result<PlanarMesh, ManifoldError>;
}

/// Axis-parallel rectangle `[0, width] × [0, height]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rectangle {
    pub width: f64,
    pub height: f64,
}

impl NeumannRegion for Rectangle {
    fn area(&self) -> f64 {
        self.width * self.height
    }

    fn mesh_with_step(&self, h: f64) -> Result<PlanarMesh, ManifoldError> {
        let mut b = Builder::new();
        b.grid(
            [0.0, 0.0],
            [self.width, 0.0],
            [0.0, self.height],
            steps(self.width, h),
            steps(self.height, h),
        );
        Ok(b.mesh)
    }
}

fn steps(length: f64, h: f64) -> usize {
    ((length / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Unscaled vertex neighbourhood `U_v`.
///
/// Degree 1 and 2 regions are bare collars: a `l0/2 × 1` or `l0 × 1` rectangle
/// whose short sides are the interfaces. For degree `d ≥ 3` the core is the
/// regular `d`-gon with unit sides and each side carries a `1 × l0/2` stub.
/// Every interface is a unit segment at the end of a collar of length `l0/2`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct VertexTemplate {
    pub deg: usize,
    pub l0: f64,
    pub vol: f64,
    pub lambda2: f64,
    /// Set when the extrapolated `λ₂` moved by more than `1e-3` relative.
    pub unconverged: bool,
}

/// Outward unit normal and center of interface `i`, in template coordinates.
pub(crate) struct InterfaceFrame {
    pub center: P,
    pub normal: P,
}

impl InterfaceFrame {
    /// Counterclockwise tangent; the interface is `center + (t − 1/2)·tangent`.
    pub fn tangent(&self) -> P {
        [-self.normal[1], self.normal[0]]
    }
}

/// Mesh size of the template constants computation (`h` and `h/2`).
pub const TEMPLATE_STEP: f64 = 1.0 / 16.0;

/// Builds the degree-`deg` template and computes its constants.
pub fn build_vertex_template(deg: usize, l0: f64) -> Result<VertexTemplate, ManifoldError> {
    let mut t = VertexTemplate::geometry(deg, l0)?;
    let (vol, lambda2, unconverged) = template_constants(&t, TEMPLATE_STEP)?;
    t.vol = vol;
    t.lambda2 = lambda2;
    t.unconverged = unconverged;
    Ok(t)
}

impl VertexTemplate {
    /// Geometry only. Constants are left at zero.
    pub(crate) fn geometry(deg: usize, l0: f64) -> Result<Self, ManifoldError> {
        if deg == 0 {
            return Err(ManifoldError::InvalidParameter(
                "vertex degree must be at least 1".into(),
            ));
        }
        if !(l0 > 0.0 && l0 <= 1.0) {
            return Err(ManifoldError::InvalidParameter(format!(
                "l0 = {l0} outside (0, 1]"
            )));
        }
        Ok(Self {
            deg,
            l0,
            vol: 0.0,
            lambda2: 0.0,
            unconverged: false,
        })
    }

    fn collar(&self) -> f64 {
        self.l0 / 2.0
    }

    fn apothem(&self) -> f64 {
        0.5 / (PI / self.deg as f64).tan()
    }

    pub fn exact_area(&self) -> f64 {
        let c = self.collar();
        match self.deg {
            1 => c,
            2 => 2.0 * c,
            d => d as f64 * (0.5 * self.apothem() + c),
        }
    }

    pub(crate) fn frames(&self) -> Vec<InterfaceFrame> {
        let c = self.collar();
        match self.deg {
            1 => vec![InterfaceFrame {
                center: [0.0, 0.0],
                normal: [1.0, 0.0],
            }],
            2 => vec![
                InterfaceFrame {
                    center: [c, 0.0],
                    normal: [1.0, 0.0],
                },
                InterfaceFrame {
                    center: [-c, 0.0],
                    normal: [-1.0, 0.0],
                },
            ],
            d => {
                let r = self.apothem() + c;
                (0..d)
                    .map(|k| {
                        let phi = 2.0 * PI * k as f64 / d as f64;
                        let n = [phi.cos(), phi.sin()];
                        InterfaceFrame {
                            center: [r * n[0], r * n[1]],
                            normal: n,
                        }
                    })
                    .collect()
            }
        }
    }

    /// Triangulation with `n_across` cells along each interface and `n_collar`
    /// cells along each collar.
    pub fn mesh(&self, n_across: usize, n_collar: usize) -> Result<PlanarMesh, ManifoldError> {
        if n_across == 0 || n_collar == 0 {
            return Err(ManifoldError::InvalidParameter(
                "template mesh needs at least one cell per direction".into(),
            ));
        }
        let c = self.collar();
        let mut b = Builder::new();
        match self.deg {
            1 => b.grid([-c, -0.5], [c, 0.0], [0.0, 1.0], n_collar, n_across),
            2 => b.grid(
                [-c, -0.5],
                [2.0 * c, 0.0],
                [0.0, 1.0],
                2 * n_collar,
                n_across,
            ),
            d => {
                let a = self.apothem();
                for f in self.frames() {
                    let n = f.normal;
                    let t = f.tangent();
                    let p0 = [a * n[0] - 0.5 * t[0], a * n[1] - 0.5 * t[1]];
                    let p1 = [a * n[0] + 0.5 * t[0], a * n[1] + 0.5 * t[1]];
                    b.refined_triangle([0.0, 0.0], p0, p1, n_across);
                    b.grid(p0, t, [c * n[0], c * n[1]], n_across, n_collar);
                }
                debug_assert_eq!(self.frames().len(), d);
            }
        }
        for f in self.frames() {
            b.interface(f.center, f.tangent(), n_across)?;
        }
        Ok(b.mesh)
    }
}

impl NeumannRegion for VertexTemplate {
    fn area(&self) -> f64 {
        self.exact_area()
    }

    fn mesh_with_step(&self, h: f64) -> Result<PlanarMesh, ManifoldError> {
        self.mesh(steps(1.0, h), steps(self.collar(), h))
    }
}

/// Exact area and the first nonzero Neumann eigenvalue of `region`.
///
/// The eigenvalue is computed by P1 elements at steps `h` and `h/2` and
/// Richardson-extrapolated assuming an `h²` error. The flag is set when the
/// extrapolation moves the finer value by more than `1e-3` relative.
pub fn template_constants(
    region: &impl NeumannRegion,
    h: f64,
) -> Result<(f64, f64, bool), ManifoldError> {
    if !(h > 0.0 && h <= 0.5) {
        return Err(ManifoldError::InvalidParameter(format!(
            "template step {h} outside (0, 1/2]"
        )));
    }
    let second = |h: f64| -> Result<f64, ManifoldError> {
        Ok(region.mesh_with_step(h)?.neumann_eigenvalues(2)?[1])
    };
    let coarse = second(h)?;
    let fine = second(h / 2.0)?;
    let lambda2 = (4.0 * fine - coarse) / 3.0;
    let unconverged = (lambda2 - fine).abs() > 1e-3 * lambda2.abs();
    if !(lambda2 > 0.0) {
        return Err(ManifoldError::InvalidParameter(format!(
            "template has λ₂ = {lambda2}; region is not connected"
        )));
    }
    Ok((region.area(), lambda2, unconverged))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interfaces_are_unit_segments() {
        for deg in 1..=5 {
            let t = VertexTemplate::geometry(deg, 0.4).unwrap();
            let m = t.mesh(4, 2).unwrap();
            assert_eq!(m.interfaces.len(), deg);
            for list in &m.interfaces {
                assert_eq!(list.len(), 5);
                let (a, b) = (m.nodes[list[0]], m.nodes[list[4]]);
                assert!(((a[0] - b[0]).hypot(a[1] - b[1]) - 1.0).abs() < 1e-12);
            }
            assert!((m.area() - t.exact_area()).abs() < 1e-12, "deg {deg}");
        }
    }

    #[test]
    fn degree_two_is_symmetric() {
        let t = VertexTemplate::geometry(2, 0.4).unwrap();
        let m = t.mesh(4, 3).unwrap();
        for p in &m.nodes {
            let mirrored = [-p[0], p[1]];
            assert!(m
                .nodes
                .iter()
                .any(|q| (q[0] - mirrored[0]).abs() < 1e-12 && (q[1] - mirrored[1]).abs() < 1e-12));
        }
    }

    #[test]
    fn all_triangles_positive() {
        let t = VertexTemplate::geometry(3, 0.4).unwrap();
        let m = t.mesh(6, 2).unwrap();
        for tri in &m.triangles {
            assert!(triangle_area(m.nodes[tri[0]], m.nodes[tri[1]], m.nodes[tri[2]]) > 0.0);
        }
    }

    #[test]
    fn zero_degree_rejected() {
        assert!(VertexTemplate::geometry(0, 0.4).is_err());
        assert!(build_vertex_template(0, 0.4).is_err());
    }
}
