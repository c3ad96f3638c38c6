//! Conforming triangle meshes with labelled boundary regions.

mod generate;
mod io;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

pub use generate::{
    generate_box_with_disk, generate_ventricle_section, mesh_planar_domain, unit_square,
    structured_rectangle, BoundaryLoop, Circle, PlanarDomain, Refinement, SizeField,
    VentricleGeometry, VentricleMeshOptions,
};
pub use io::{load_mesh, read_mesh, save_mesh, write_mesh};

use crate::error::{Error, Result};
use crate::tensor::{segment_distance, Point};

/// Labels of the three physiological boundary parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryRegion {
    Epi,
    EndoLv,
    EndoRv,
}

impl BoundaryRegion {
    pub const ALL: [BoundaryRegion; 3] =
        [BoundaryRegion::Epi, BoundaryRegion::EndoLv, BoundaryRegion::EndoRv];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryRegion::Epi => "EPI",
            BoundaryRegion::EndoLv => "ENDO_LV",
            BoundaryRegion::EndoRv => "ENDO_RV",
        }
    }
}

impl fmt::Display for BoundaryRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryRegion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EPI" => Ok(BoundaryRegion::Epi),
            "ENDO_LV" => Ok(BoundaryRegion::EndoLv),
            "ENDO_RV" => Ok(BoundaryRegion::EndoRv),
            other => Err(Error::Config(format!("unknown boundary region '{other}'"))),
        }
    }
}

/// A set of boundary regions (measurement support).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct RegionSet(BTreeSet<BoundaryRegion>);

impl RegionSet {
    pub fn new(regions: impl IntoIterator<Item = BoundaryRegion>) -> Self {
        Self(regions.into_iter().collect())
    }

    pub fn all() -> Self {
        Self::new(BoundaryRegion::ALL)
    }

    pub fn contains(&self, r: BoundaryRegion) -> bool {
        self.0.contains(&r)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = BoundaryRegion> + '_ {
        self.0.iter().copied()
    }
}

impl From<BoundaryRegion> for RegionSet {
    fn from(r: BoundaryRegion) -> Self {
        RegionSet::new([r])
    }
}

impl fmt::Display for RegionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.0.iter().map(|r| r.as_str()).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for RegionSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let set = s
            .split([',', '+', ' '])
            .filter(|t| !t.trim().is_empty())
            .map(BoundaryRegion::from_str)
            .collect::<Result<BTreeSet<_>>>()?;
        Ok(RegionSet(set))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub region: BoundaryRegion,
}

/// Triangulation with node coordinates in cm. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    markers: Option<Vec<i32>>,
}

/// One violated mesh invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFiniteNode(usize),
    IndexOutOfRange { triangle: usize, index: usize },
    BoundaryIndexOutOfRange { edge: usize, index: usize },
    NonPositiveArea { triangle: usize, area: f64 },
    DuplicateTriangle { first: usize, second: usize },
    EdgeOvershared { edge: [usize; 2], count: usize },
    SameOrientationNeighbours { edge: [usize; 2] },
    UntaggedBoundaryEdge { edge: [usize; 2] },
    TaggedInteriorEdge { edge: [usize; 2] },
    DuplicateBoundaryTag { edge: [usize; 2] },
    MarkerCount { expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFiniteNode(i) => write!(f, "node {i} has a non-finite coordinate"),
            Violation::IndexOutOfRange { triangle, index } => {
                write!(f, "triangle {triangle} references node {index} out of range")
            }
            Violation::BoundaryIndexOutOfRange { edge, index } => {
                write!(f, "boundary edge {edge} references node {index} out of range")
            }
            Violation::NonPositiveArea { triangle, area } => {
                write!(f, "triangle {triangle} has non-positive signed area {area:e} (orientation)")
            }
            Violation::DuplicateTriangle { first, second } => {
                write!(f, "triangles {first} and {second} are duplicates (conformity)")
            }
            Violation::EdgeOvershared { edge, count } => {
                write!(f, "edge {edge:?} is shared by {count} triangles (conformity)")
            }
            Violation::SameOrientationNeighbours { edge } => write!(
                f,
                "interior edge {edge:?} has the same orientation in both triangles (conformity)"
            ),
            Violation::UntaggedBoundaryEdge { edge } => {
                write!(f, "boundary edge {edge:?} carries no region tag")
            }
            Violation::TaggedInteriorEdge { edge } => {
                write!(f, "tagged edge {edge:?} is not on the topological boundary")
            }
            Violation::DuplicateBoundaryTag { edge } => {
                write!(f, "boundary edge {edge:?} is tagged more than once")
            }
            Violation::MarkerCount { expected, found } => {
                write!(f, "expected {expected} element markers, found {found}")
            }
        }
    }
}

#[inline]
fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

impl Mesh {
    /// Builds a mesh and checks every invariant.
    pub fn new(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
        markers: Option<Vec<i32>>,
    ) -> Result<Self> {
        let mesh = Self::new_unchecked(nodes, triangles, boundary, markers);
        let report = mesh.validate();
        if report.is_empty() {
            Ok(mesh)
        } else {
            let shown: Vec<String> = report.iter().take(5).map(|v| v.to_string()).collect();
            Err(Error::Validation(format!(
                "{} violation(s): {}",
                report.len(),
                shown.join("; ")
            )))
        }
    }

    /// Builds a mesh without validation; pair with [`Mesh::validate`].
    pub fn new_unchecked(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
        markers: Option<Vec<i32>>,
    ) -> Self {
        Self {
            nodes,
            triangles,
            boundary,
            markers,
        }
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn element_markers(&self) -> Option<&[i32]> {
        self.markers.as_deref()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Signed area (positive for counterclockwise triangles).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    pub fn areas(&self) -> Vec<f64> {
        (0..self.num_triangles()).map(|t| self.signed_area(t)).collect()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.signed_area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [p0, p1, p2] = self.triangle_points(t);
        [(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0]
    }

    /// Gradients of the three P1 basis functions on triangle `t` (constant per element).
    pub fn basis_gradients(&self, t: usize) -> [Point; 3] {
        let [p0, p1, p2] = self.triangle_points(t);
        let two_area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let inv = 1.0 / two_area;
        [
            [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
            [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
            [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
        ]
    }

    /// Gradient of a nodal P1 field on triangle `t`.
    pub fn field_gradient(&self, t: usize, field: &[f64]) -> Point {
        let g = self.basis_gradients(t);
        let [a, b, c] = self.triangles[t];
        [
            g[0][0] * field[a] + g[1][0] * field[b] + g[2][0] * field[c],
            g[0][1] * field[a] + g[1][1] * field[b] + g[2][1] * field[c],
        ]
    }

    pub fn edge_length(&self, e: [usize; 2]) -> f64 {
        crate::tensor::dist(self.nodes[e[0]], self.nodes[e[1]])
    }

    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|&[a, b, c]| [[a, b], [b, c], [c, a]])
            .map(|e| self.edge_length(e))
            .fold(0.0, f64::max)
    }

    pub fn has_region(&self, r: BoundaryRegion) -> bool {
        self.boundary.iter().any(|e| e.region == r)
    }

    /// Sorted, de-duplicated nodes incident to edges of the given regions.
    pub fn region_nodes(&self, regions: &RegionSet) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .boundary
            .iter()
            .filter(|e| regions.contains(e.region))
            .flat_map(|e| e.nodes)
            .collect();
        set.into_iter().collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        self.region_nodes(&RegionSet::all())
    }

    /// Elements adjacent to each node.
    pub fn node_elements(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                adj[v].push(t);
            }
        }
        adj
    }

    /// Mesh neighbours of each node (sorted).
    pub fn node_neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.num_nodes()];
        for &[a, b, c] in &self.triangles {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                adj[p].insert(q);
                adj[q].insert(p);
            }
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Euclidean distance from every node to the nearest boundary edge.
    pub fn boundary_distance(&self) -> Vec<f64> {
        self.region_distance(&RegionSet::all())
    }

    /// Distance from every node to the boundary edges of `regions`.
    pub fn region_distance(&self, regions: &RegionSet) -> Vec<f64> {
        let segments: Vec<(Point, Point)> = self
            .boundary
            .iter()
            .filter(|e| regions.contains(e.region))
            .map(|e| (self.nodes[e.nodes[0]], self.nodes[e.nodes[1]]))
            .collect();
        self.nodes
            .iter()
            .map(|&p| {
                segments
                    .iter()
                    .map(|&(a, b)| segment_distance(p, a, b))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// Distance from an arbitrary point to the polygonal boundary.
    pub fn point_boundary_distance(&self, p: Point) -> f64 {
        self.boundary
            .iter()
            .map(|e| segment_distance(p, self.nodes[e.nodes[0]], self.nodes[e.nodes[1]]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Triangle containing `p`, if any (linear scan).
    pub fn locate(&self, p: Point) -> Option<usize> {
        let tol = 1e-12;
        (0..self.num_triangles()).find(|&t| {
            let [a, b, c] = self.triangle_points(t);
            let orient = |u: Point, v: Point| (v[0] - u[0]) * (p[1] - u[1]) - (v[1] - u[1]) * (p[0] - u[0]);
            orient(a, b) >= -tol && orient(b, c) >= -tol && orient(c, a) >= -tol
        })
    }

    /// P1 interpolant of a nodal field at `p`, if `p` lies in the mesh.
    pub fn interpolate(&self, field: &[f64], p: Point) -> Option<f64> {
        let t = self.locate(p)?;
        let [a, b, c] = self.triangle_points(t);
        let area2 = 2.0 * self.signed_area(t);
        let l = |u: Point, v: Point| ((u[0] - p[0]) * (v[1] - p[1]) - (v[0] - p[0]) * (u[1] - p[1])) / area2;
        let [i, j, k] = self.triangles[t];
        Some(l(b, c) * field[i] + l(c, a) * field[j] + l(a, b) * field[k])
    }

    /// Number of connected components of the boundary graph.
    pub fn boundary_loop_count(&self) -> usize {
        let mut parent: HashMap<usize, usize> = HashMap::new();
        fn find(parent: &mut HashMap<usize, usize>, x: usize) -> usize {
            let p = *parent.entry(x).or_insert(x);
            if p == x {
                x
            } else {
                let r = find(parent, p);
                parent.insert(x, r);
                r
            }
        }
        for e in &self.boundary {
            let a = find(&mut parent, e.nodes[0]);
            let b = find(&mut parent, e.nodes[1]);
            if a != b {
                parent.insert(a, b);
            }
        }
        let keys: Vec<usize> = parent.keys().copied().collect();
        let roots: BTreeSet<usize> = keys.into_iter().map(|k| find(&mut parent, k)).collect();
        roots.len()
    }

    /// Number of distinct edges.
    pub fn edge_count(&self) -> usize {
        let set: BTreeSet<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [edge_key(a, b), edge_key(b, c), edge_key(c, a)])
            .collect();
        set.len()
    }

    /// Lists every violated invariant; empty iff the mesh is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.nodes.len();
        for (i, p) in self.nodes.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                out.push(Violation::NonFiniteNode(i));
            }
        }
        let mut indices_ok = true;
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    out.push(Violation::IndexOutOfRange { triangle: t, index: v });
                    indices_ok = false;
                }
            }
        }
        for (k, e) in self.boundary.iter().enumerate() {
            for &v in &e.nodes {
                if v >= n {
                    out.push(Violation::BoundaryIndexOutOfRange { edge: k, index: v });
                    indices_ok = false;
                }
            }
        }
        if let Some(m) = &self.markers {
            if m.len() != self.triangles.len() {
                out.push(Violation::MarkerCount {
                    expected: self.triangles.len(),
                    found: m.len(),
                });
            }
        }
        if !indices_ok {
            return out;
        }

        for t in 0..self.num_triangles() {
            let area = self.signed_area(t);
            if !(area > 0.0) {
                out.push(Violation::NonPositiveArea { triangle: t, area });
            }
        }

        let mut seen: HashMap<[usize; 3], usize> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut key = *tri;
            key.sort_unstable();
            if let Some(&first) = seen.get(&key) {
                out.push(Violation::DuplicateTriangle { first, second: t });
            } else {
                seen.insert(key, t);
            }
        }

        // Directed edge occurrences per undirected edge.
        let mut uses: HashMap<[usize; 2], Vec<[usize; 2]>> = HashMap::new();
        for &[a, b, c] in &self.triangles {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                uses.entry(edge_key(p, q)).or_default().push([p, q]);
            }
        }
        let mut topo_boundary: BTreeSet<[usize; 2]> = BTreeSet::new();
        let mut keys: Vec<_> = uses.keys().copied().collect();
        keys.sort_unstable();
        for key in keys {
            let dirs = &uses[&key];
            match dirs.len() {
                1 => {
                    topo_boundary.insert(key);
                }
                2 => {
                    if dirs[0] == dirs[1] {
                        out.push(Violation::SameOrientationNeighbours { edge: key });
                    }
                }
                count => out.push(Violation::EdgeOvershared { edge: key, count }),
            }
        }

        let mut tagged: BTreeSet<[usize; 2]> = BTreeSet::new();
        for e in &self.boundary {
            let key = edge_key(e.nodes[0], e.nodes[1]);
            if !tagged.insert(key) {
                out.push(Violation::DuplicateBoundaryTag { edge: key });
            }
            if !topo_boundary.contains(&key) {
                out.push(Violation::TaggedInteriorEdge { edge: key });
            }
        }
        for key in &topo_boundary {
            if !tagged.contains(key) {
                out.push(Violation::UntaggedBoundaryEdge { edge: *key });
            }
        }
        out
    }

    /// Stable identifier derived from the mesh size and coordinates.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for p in &self.nodes {
            h.update(p[0].to_le_bytes());
            h.update(p[1].to_le_bytes());
        }
        for t in &self.triangles {
            for &v in t {
                h.update((v as u64).to_le_bytes());
            }
        }
        let digest = h.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
