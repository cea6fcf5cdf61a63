use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use super::fem::assemble;
use super::template::{build_vertex_template, VertexTemplate};
use super::ManifoldError;
use crate::graph::{End, MetricGraph};
use crate::linalg::CsrMatrix;

/// Region of the decomposition a node or triangle belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionTag {
    Edge(usize),
    Vertex(usize),
}

impl std::fmt::Display for RegionTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegionTag::Edge(e) => write!(f, "edge:{e}"),
            RegionTag::Vertex(v) => write!(f, "vertex:{v}"),
        }
    }
}

/// Tensor grid on the strip `[0, ℓ_e] × [0, ε]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StripGrid {
    pub length: f64,
    pub n_x: usize,
    pub n_y: usize,
    first: usize,
}

impl StripGrid {
    /// Region-local node index of grid point `(i, j)`.
    pub fn node(&self, i: usize, j: usize) -> usize {
        self.first + i * (self.n_y + 1) + j
    }

    pub fn hx(&self) -> f64 {
        self.length / self.n_x as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n_x {
            self.length
        } else {
            i as f64 * self.hx()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexRegion {
    pub template: VertexTemplate,
    /// `ε²·vol(U_v)`.
    pub area: f64,
    nodes: std::ops::Range<usize>,
}

/// Identification of a strip end with a template interface.
#[derive(Clone, Debug, PartialEq)]
pub struct Interface {
    pub edge: usize,
    pub end: End,
    pub vertex: usize,
    /// `(strip node, vertex-region node)` pairs, ordered by the strip's `y`.
    pub pairs: Vec<(usize, usize)>,
}

/// Fat graph glued from per-region meshes.
///
/// Nodes are stored per region with region-local coordinates, so a node on an
/// interface appears once in the strip and once in the vertex region. The
/// conforming P1 space identifies them; region-wise ("broken") vectors carry
/// one value per stored node and can represent functions that jump across
/// interfaces.
#[derive(Clone, Debug)]
pub struct FatGraphMesh {
    eps: f64,
    h_mesh: f64,
    nodes: Vec<[f64; 2]>,
    node_region: Vec<RegionTag>,
    triangles: Vec<[usize; 3]>,
    tri_region: Vec<RegionTag>,
    region_tris: BTreeMap<RegionTag, std::ops::Range<usize>>,
    dof: Vec<usize>,
    n_dofs: usize,
    strips: Vec<StripGrid>,
    vertices: Vec<VertexRegion>,
    interfaces: Vec<Interface>,
    stiffness: CsrMatrix<f64>,
    mass: CsrMatrix<f64>,
    broken_mass: CsrMatrix<f64>,
}

/// Meshes the fat graph of `graph` with strip width `eps` and element size about `h_mesh`.
///
/// Each strip is an `n_x × n_y` tensor grid with `n_y = ⌈ε/h_mesh⌉`; each vertex
/// region is its template meshed with `n_y` cells across every interface,
/// scaled by `ε`. Strips keep the full edge length.
pub fn build_mesh(
    graph: &MetricGraph,
    eps: f64,
    h_mesh: f64,
) -> Result<FatGraphMesh, ManifoldError> {
    if !graph.is_compact() {
        return Err(ManifoldError::NotCompact);
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ManifoldError::InvalidParameter(format!(
            "ε = {eps} must be positive"
        )));
    }
    let l0 = graph.l0();
    if eps > l0 / 2.0 * (1.0 + 1e-12) {
        return Err(ManifoldError::EpsilonTooLarge { eps, max: l0 / 2.0 });
    }
    if !(h_mesh > 0.0) || h_mesh > eps / 4.0 * (1.0 + 1e-12) {
        return Err(ManifoldError::MeshTooCoarse {
            h: h_mesh,
            max: eps / 4.0,
        });
    }
    let n_y = cells(eps, h_mesh);
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut node_region = Vec::new();
    let mut triangles = Vec::new();
    let mut tri_region = Vec::new();
    let mut region_tris = BTreeMap::new();

    let mut strips = Vec::with_capacity(graph.n_edges());
    for (e, edge) in graph.edges().iter().enumerate() {
        let strip = StripGrid {
            length: edge.length,
            n_x: cells(edge.length, h_mesh),
            n_y,
            first: nodes.len(),
        };
        let hy = eps / n_y as f64;
        for i in 0..=strip.n_x {
            for j in 0..=n_y {
                let y = if j == n_y { eps } else { j as f64 * hy };
                nodes.push([strip.x(i), y]);
                node_region.push(RegionTag::Edge(e));
            }
        }
        let start = triangles.len();
        for i in 0..strip.n_x {
            for j in 0..n_y {
                let (a, b, c, d) = (
                    strip.node(i, j),
                    strip.node(i + 1, j),
                    strip.node(i + 1, j + 1),
                    strip.node(i, j + 1),
                );
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        tri_region.extend(std::iter::repeat_n(
            RegionTag::Edge(e),
            triangles.len() - start,
        ));
        region_tris.insert(RegionTag::Edge(e), start..triangles.len());
        strips.push(strip);
    }

    let mut templates: BTreeMap<usize, VertexTemplate> = BTreeMap::new();
    let mut vertices = Vec::with_capacity(graph.n_vertices());
    let mut interfaces = Vec::new();
    for v in 0..graph.n_vertices() {
        let deg = graph.degree(v);
        let template = match templates.get(&deg) {
            Some(t) => t.clone(),
            None => {
                let t = build_vertex_template(deg, l0)?;
                templates.insert(deg, t.clone());
                t
            }
        };
        let n_collar = cells(l0 / 2.0, h_mesh / eps);
        let local = template.mesh(n_y, n_collar)?;
        let first = nodes.len();
        for p in &local.nodes {
            nodes.push([eps * p[0], eps * p[1]]);
            node_region.push(RegionTag::Vertex(v));
        }
        let start = triangles.len();
        triangles.extend(local.triangles.iter().map(|t| t.map(|i| i + first)));
        tri_region.extend(std::iter::repeat_n(
            RegionTag::Vertex(v),
            triangles.len() - start,
        ));
        region_tris.insert(RegionTag::Vertex(v), start..triangles.len());

        let ends = graph.endpoints(v);
        if ends.len() != local.interfaces.len() {
            return Err(ManifoldError::NonConforming(format!(
                "vertex {v}: {} edge ends for {} template interfaces",
                ends.len(),
                local.interfaces.len()
            )));
        }
        for (&(e, end), slot) in ends.iter().zip(&local.interfaces) {
            let strip = &strips[e];
            if slot.len() != strip.n_y + 1 {
                return Err(ManifoldError::NonConforming(format!(
                    "edge {e}: {} strip nodes against {} interface nodes",
                    strip.n_y + 1,
                    slot.len()
                )));
            }
            // the strip's y axis follows the interface tangent at x = 0 and opposes it at x = ℓ
            let pairs = (0..=strip.n_y)
                .map(|j| match end {
                    End::Start => (strip.node(0, j), first + slot[j]),
                    End::Finish => (strip.node(strip.n_x, j), first + slot[strip.n_y - j]),
                })
                .collect();
            interfaces.push(Interface {
                edge: e,
                end,
                vertex: v,
                pairs,
            });
        }
        vertices.push(VertexRegion {
            area: eps * eps * template.vol,
            template,
            nodes: first..nodes.len(),
        });
    }

    let (dof, n_dofs) = conforming_numbering(nodes.len(), &interfaces);
    let elements: Vec<_> = triangles
        .iter()
        .map(|t| (t.map(|i| dof[i]), t.map(|i| nodes[i])))
        .collect();
    let (stiffness, mass) = assemble(n_dofs, &elements);
    let broken: Vec<_> = triangles
        .iter()
        .map(|t| (*t, t.map(|i| nodes[i])))
        .collect();
    let (_, broken_mass) = assemble(nodes.len(), &broken);
    let mesh = FatGraphMesh {
        eps,
        h_mesh,
        nodes,
        node_region,
        triangles,
        tri_region,
        region_tris,
        dof,
        n_dofs,
        strips,
        vertices,
        interfaces,
        stiffness,
        mass,
        broken_mass,
    };
    if mesh.components() != graph.components() {
        return Err(ManifoldError::NonConforming(format!(
            "mesh has {} components, graph has {}",
            mesh.components(),
            graph.components()
        )));
    }
    Ok(mesh)
}

fn cells(length: f64, h: f64) -> usize {
    ((length / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn conforming_numbering(n: usize, interfaces: &[Interface]) -> (Vec<usize>, usize) {
    let mut parent: Vec<usize> = (0..n).collect();
    for f in interfaces {
        for &(a, b) in &f.pairs {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut number = vec![usize::MAX; n];
    let mut dof = vec![0; n];
    let mut next = 0;
    for i in 0..n {
        let r = find(&mut parent, i);
        if number[r] == usize::MAX {
            number[r] = next;
            next += 1;
        }
        dof[i] = number[r];
    }
    (dof, next)
}

impl FatGraphMesh {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn h_mesh(&self) -> f64 {
        self.h_mesh
    }

    /// Number of region-local nodes (length of a broken vector).
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of conforming P1 degrees of freedom.
    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn node_region(&self, i: usize) -> RegionTag {
        self.node_region[i]
    }

    /// Conforming dof of region-local node `i`.
    pub fn dof(&self, i: usize) -> usize {
        self.dof[i]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle_region(&self, t: usize) -> RegionTag {
        self.tri_region[t]
    }

    pub fn strip(&self, e: usize) -> &StripGrid {
        &self.strips[e]
    }

    pub fn strips(&self) -> &[StripGrid] {
        &self.strips
    }

    pub fn vertex_region(&self, v: usize) -> &VertexRegion {
        &self.vertices[v]
    }

    pub fn vertex_regions(&self) -> &[VertexRegion] {
        &self.vertices
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    /// Stored nodes of vertex region `v`.
    pub fn vertex_nodes(&self, v: usize) -> std::ops::Range<usize> {
        self.vertices[v].nodes.clone()
    }

    /// Conforming stiffness matrix `A`.
    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.stiffness
    }

    /// Conforming mass matrix `M`.
    pub fn mass(&self) -> &CsrMatrix<f64> {
        &self.mass
    }

    /// Block-diagonal mass matrix on region-local nodes.
    pub fn broken_mass(&self) -> &CsrMatrix<f64> {
        &self.broken_mass
    }

    /// Region-wise representation of a conforming vector.
    pub fn lift(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n_dofs);
        self.dof.iter().map(|&d| u[d]).collect()
    }

    /// Conforming vector from a broken one that agrees across interfaces.
    pub fn restrict(&self, w: &[f64], tol: f64) -> Result<Vec<f64>, ManifoldError> {
        assert_eq!(w.len(), self.nodes.len());
        let mut u = vec![f64::NAN; self.n_dofs];
        for (i, &d) in self.dof.iter().enumerate() {
            if u[d].is_nan() {
                u[d] = w[i];
            } else if (u[d] - w[i]).abs() > tol * (1.0 + w[i].abs()) {
                return Err(ManifoldError::NonConforming(format!(
                    "broken vector jumps by {:e} at node {i}",
                    (u[d] - w[i]).abs()
                )));
            }
        }
        Ok(u)
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                super::template::triangle_area(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]])
            })
            .sum()
    }

    /// `Σ_e ℓ_e·ε + Σ_v ε²·vol(U_v)`.
    pub fn nominal_area(&self) -> f64 {
        self.strips.iter().map(|s| s.length * self.eps).sum::<f64>()
            + self.vertices.iter().map(|v| v.area).sum::<f64>()
    }

    pub(crate) fn region_triangles(&self, tag: RegionTag) -> std::ops::Range<usize> {
        self.region_tris.get(&tag).cloned().unwrap_or(0..0)
    }

    /// Connected components of the conforming mesh.
    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.n_dofs).collect();
        for t in &self.triangles {
            let d = t.map(|i| self.dof[i]);
            for k in 1..3 {
                let (a, b) = (find(&mut parent, d[0]), find(&mut parent, d[k]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        (0..self.n_dofs)
            .filter(|&i| find(&mut parent, i) == i)
            .count()
    }

    /// `V − E + F` of the conforming triangulation.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = HashSet::new();
        for t in &self.triangles {
            let d = t.map(|i| self.dof[i]);
            for (a, b) in [(d[0], d[1]), (d[1], d[2]), (d[2], d[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.n_dofs as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    /// Writes `nodes.csv` (node, region, x, y, dof), `triangles.csv`
    /// (triangle, region, n0, n1, n2) and `regions.csv` (region, kind, index, area)
    /// into `dir`. Coordinates are region-local.
    pub fn dump_csv(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("nodes.csv"))?);
        writeln!(f, "node,region,x,y,dof")?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(
                f,
                "{i},{},{:.12e},{:.12e},{}",
                self.node_region[i], p[0], p[1], self.dof[i]
            )?;
        }
        f.flush()?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("triangles.csv"))?);
        writeln!(f, "triangle,region,n0,n1,n2")?;
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(f, "{i},{},{},{},{}", self.tri_region[i], t[0], t[1], t[2])?;
        }
        f.flush()?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("regions.csv"))?);
        writeln!(f, "region,kind,index,area")?;
        for (tag, range) in &self.region_tris {
            let area: f64 = self.triangles[range.clone()]
                .iter()
                .map(|t| {
                    super::template::triangle_area(
                        self.nodes[t[0]],
                        self.nodes[t[1]],
                        self.nodes[t[2]],
                    )
                })
                .sum();
            let (kind, index) = match tag {
                RegionTag::Edge(e) => ("edge", e),
                RegionTag::Vertex(v) => ("vertex", v),
            };
            writeln!(f, "{tag},{kind},{index},{area:.12e}")?;
        }
        f.flush()
    }
}
