//! Triangulation of planar domains bounded by closed polygons.
//!
//! Interior vertices are seeded on hexagonal lattices whose spacing follows a
//! piecewise (graded) size field; boundary and interface polylines are inserted
//! as constraints of a constrained Delaunay triangulation, and triangles whose
//! centroid falls outside the domain are discarded.

use std::collections::HashMap;
use std::f64::consts::PI;

use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use super::{BoundaryEdge, BoundaryRegion, Mesh};
use crate::error::{Error, Result};
use crate::tensor::{dist, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub const fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, p: Point) -> bool {
        dist(p, self.center) < self.radius
    }

    pub fn point_at(&self, angle: f64) -> Point {
        [
            self.center[0] + self.radius * angle.cos(),
            self.center[1] + self.radius * angle.sin(),
        ]
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    /// Closed polygon with `n` vertices, counterclockwise unless `clockwise`.
    pub fn polygon(&self, n: usize, clockwise: bool) -> Vec<Point> {
        let sign = if clockwise { -1.0 } else { 1.0 };
        (0..n)
            .map(|k| self.point_at(sign * 2.0 * PI * k as f64 / n as f64))
            .collect()
    }
}

/// A closed boundary polyline; edge `k` joins `points[k]` and `points[k + 1]`
/// (cyclically). Outer loops run counterclockwise and holes clockwise, so the
/// domain always lies to the left.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLoop {
    pub points: Vec<Point>,
    pub region: BoundaryRegion,
}

/// Domain description for [`mesh_planar_domain`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanarDomain {
    pub loops: Vec<BoundaryLoop>,
    /// Closed interior polylines that the triangulation must conform to.
    pub interfaces: Vec<Vec<Point>>,
}

impl PlanarDomain {
    /// Even-odd point membership with respect to all boundary loops.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for l in &self.loops {
            let n = l.points.len();
            for k in 0..n {
                let a = l.points[k];
                let b = l.points[(k + 1) % n];
                if (a[1] > p[1]) != (b[1] > p[1]) {
                    let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                    if p[0] < x {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    fn bbox(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in self.loops.iter().flat_map(|l| l.points.iter()) {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }
}

/// Local size request: target edge length `size` inside `radius` of `center`,
/// blending to the base size with slope [`SizeField::grading`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub center: Point,
    pub radius: f64,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeField {
    pub base: f64,
    pub refinements: Vec<Refinement>,
    pub grading: f64,
}

impl SizeField {
    pub fn uniform(h: f64) -> Self {
        Self {
            base: h,
            refinements: Vec::new(),
            grading: 0.3,
        }
    }

    pub fn with_refinement(mut self, r: Refinement) -> Self {
        self.refinements.push(r);
        self
    }

    pub fn at(&self, p: Point) -> f64 {
        self.refinements
            .iter()
            .map(|r| r.size + self.grading * (dist(p, r.center) - r.radius).max(0.0))
            .fold(self.base, f64::min)
    }

    fn finest(&self) -> f64 {
        self.refinements.iter().map(|r| r.size).fold(self.base, f64::min)
    }
}

/// Spatial hash of accepted vertices with their local spacing.
struct Grid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
    points: Vec<Point>,
    spacing: Vec<f64>,
}

impl Grid {
    fn new(cell: f64) -> Self {
        Self {
            cell,
            cells: HashMap::new(),
            points: Vec::new(),
            spacing: Vec::new(),
        }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p[0] / self.cell).floor() as i64, (p[1] / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: Point, s: f64) {
        let k = self.key(p);
        self.cells.entry(k).or_default().push(self.points.len());
        self.points.push(p);
        self.spacing.push(s);
    }

    /// True if no stored vertex is closer than `factor * max(s, s_q)`.
    fn is_clear(&self, p: Point, s: f64, factor: f64) -> bool {
        let (i, j) = self.key(p);
        for di in -1..=1 {
            for dj in -1..=1 {
                if let Some(ids) = self.cells.get(&(i + di, j + dj)) {
                    for &q in ids {
                        if dist(p, self.points[q]) < factor * s.max(self.spacing[q]) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

const CLEARANCE: f64 = 0.75;

fn triangulate(points: &[Point], constraints: &[[usize; 2]], domain: &PlanarDomain) -> Result<Vec<[usize; 3]>> {
    let vertices: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(vertices, constraints.to_vec())
        .map_err(|e| Error::Meshing(format!("triangulation failed: {e:?}")))?;
    if cdt.num_vertices() != points.len() {
        return Err(Error::Meshing("duplicate vertices in input".into()));
    }
    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        let v = face.vertices().map(|h| h.fix().index());
        let c = [
            (points[v[0]][0] + points[v[1]][0] + points[v[2]][0]) / 3.0,
            (points[v[0]][1] + points[v[1]][1] + points[v[2]][1]) / 3.0,
        ];
        if domain.contains(c) {
            triangles.push(v);
        }
    }
    Ok(triangles)
}

/// Triangulates `domain` with edge lengths following `size`.
pub fn mesh_planar_domain(domain: &PlanarDomain, size: &SizeField) -> Result<Mesh> {
    if !(size.base > 0.0) || size.refinements.iter().any(|r| !(r.size > 0.0)) {
        return Err(Error::Meshing("target edge length must be positive".into()));
    }
    if domain.loops.is_empty() {
        return Err(Error::Meshing("domain has no boundary loops".into()));
    }
    let mut grid = Grid::new(size.base);
    let mut constraints: Vec<[usize; 2]> = Vec::new();
    let mut tagged: Vec<(usize, usize, BoundaryRegion)> = Vec::new();

    let mut add_polyline = |grid: &mut Grid, pts: &[Point], region: Option<BoundaryRegion>| {
        let n = pts.len();
        let first = grid.points.len();
        for k in 0..n {
            let prev = pts[(k + n - 1) % n];
            let next = pts[(k + 1) % n];
            let s = 0.5 * (dist(prev, pts[k]) + dist(pts[k], next));
            grid.insert(pts[k], s);
        }
        for k in 0..n {
            let a = first + k;
            let b = first + (k + 1) % n;
            constraints.push([a, b]);
            if let Some(r) = region {
                tagged.push((a, b, r));
            }
        }
    };
    for l in &domain.loops {
        if l.points.len() < 3 {
            return Err(Error::Meshing("boundary loop with fewer than 3 points".into()));
        }
        add_polyline(&mut grid, &l.points, Some(l.region));
    }
    for iface in &domain.interfaces {
        add_polyline(&mut grid, iface, None);
    }

    // Lattice candidates, finest level first.
    let (lo, hi) = domain.bbox();
    let levels = (size.base / size.finest()).log2().round().max(0.0) as u32;
    let level_of = |p: Point| -> u32 {
        let l = (size.base / size.at(p)).log2().round().max(0.0) as u32;
        l.min(levels)
    };
    for level in (0..=levels).rev() {
        let s = size.base / f64::from(1u32 << level);
        let (blo, bhi) = if level == 0 {
            (lo, hi)
        } else {
            // Region where this level can be active.
            let mut blo = [f64::INFINITY; 2];
            let mut bhi = [f64::NEG_INFINITY; 2];
            for r in &size.refinements {
                let reach = r.radius + (size.base - r.size).max(0.0) / size.grading + s;
                for d in 0..2 {
                    blo[d] = blo[d].min(r.center[d] - reach).max(lo[d]);
                    bhi[d] = bhi[d].max(r.center[d] + reach).min(hi[d]);
                }
            }
            (blo, bhi)
        };
        if blo[0] > bhi[0] || blo[1] > bhi[1] {
            continue;
        }
        let dy = s * 3f64.sqrt() / 2.0;
        let j0 = (blo[1] / dy).floor() as i64;
        let j1 = (bhi[1] / dy).ceil() as i64;
        let i0 = (blo[0] / s).floor() as i64 - 1;
        let i1 = (bhi[0] / s).ceil() as i64 + 1;
        for j in j0..=j1 {
            let y = j as f64 * dy;
            let shift = if j.rem_euclid(2) == 1 { 0.5 * s } else { 0.0 };
            for i in i0..=i1 {
                let p = [i as f64 * s + shift, y];
                if p[0] < blo[0] || p[0] > bhi[0] {
                    continue;
                }
                if level_of(p) != level || !domain.contains(p) {
                    continue;
                }
                if grid.is_clear(p, s, CLEARANCE) {
                    grid.insert(p, s);
                }
            }
        }
    }

    // Split edges that remain too long (gaps left next to boundary vertices).
    let mut triangles = triangulate(&grid.points, &constraints, domain)?;
    for _ in 0..4 {
        let mut added = false;
        let mut seen = std::collections::HashSet::new();
        for tri in &triangles {
            for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                let key = (a.min(b), a.max(b));
                if !seen.insert(key) {
                    continue;
                }
                let (p, q) = (grid.points[a], grid.points[b]);
                let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                let s = size.at(mid);
                if dist(p, q) > 1.4 * s && domain.contains(mid) && grid.is_clear(mid, s, 0.6) {
                    grid.insert(mid, 0.5 * s);
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
        triangles = triangulate(&grid.points, &constraints, domain)?;
    }
    let nodes_all = grid.points;
    // Orient counterclockwise and reject slivers.
    let tiny = 1e-6 * size.finest() * size.finest();
    for tri in &mut triangles {
        let [a, b, c] = tri.map(|i| nodes_all[i]);
        let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if area2 < 0.0 {
            tri.swap(1, 2);
        }
        if area2.abs() * 0.5 < tiny {
            return Err(Error::Meshing(format!(
                "degenerate triangle near ({:.4}, {:.4})",
                a[0], a[1]
            )));
        }
    }

    // Drop vertices not used by any triangle and renumber in insertion order.
    let mut used = vec![false; nodes_all.len()];
    for tri in &triangles {
        for &v in tri {
            used[v] = true;
        }
    }
    let order: Vec<usize> = (0..nodes_all.len()).filter(|&v| used[v]).collect();
    let mut remap = vec![usize::MAX; nodes_all.len()];
    let mut nodes = Vec::with_capacity(order.len());
    for (k, &v) in order.iter().enumerate() {
        remap[v] = k;
        nodes.push(nodes_all[v]);
    }
    let triangles: Vec<[usize; 3]> = triangles.iter().map(|t| t.map(|v| remap[v])).collect();
    let mut boundary = Vec::with_capacity(tagged.len());
    for (a, b, region) in tagged {
        if remap[a] == usize::MAX || remap[b] == usize::MAX {
            return Err(Error::Meshing("boundary vertex not covered by any triangle".into()));
        }
        boundary.push(BoundaryEdge {
            nodes: [remap[a], remap[b]],
            region,
        });
    }
    Mesh::new(nodes, triangles, boundary, None).map_err(|e| Error::Meshing(e.to_string()))
}

/// Idealised ventricular cross-section: the union of two disks (left and right
/// ventricle) with one circular cavity in each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VentricleGeometry {
    pub lv_outer: Circle,
    pub rv_outer: Circle,
    pub lv_cavity: Circle,
    pub rv_cavity: Circle,
}

impl Default for VentricleGeometry {
    fn default() -> Self {
        Self {
            lv_outer: Circle::new([0.0, 0.0], 3.0),
            rv_outer: Circle::new([2.4, 0.0], 2.2),
            lv_cavity: Circle::new([-0.65, 0.0], 1.5),
            rv_cavity: Circle::new([2.75, 0.0], 1.0),
        }
    }
}

/// Options for [`VentricleGeometry::mesh`].
#[derive(Debug, Clone, PartialEq)]
pub struct VentricleMeshOptions {
    pub h: f64,
    /// Boundary segment counts are forced to multiples of this value, so a mesh
    /// built with `h / m` and multiplier `m` contains every boundary vertex of
    /// the mesh built with `h` and multiplier 1.
    pub boundary_multiplier: usize,
    pub refinements: Vec<Refinement>,
    pub interfaces: Vec<Circle>,
}

impl VentricleMeshOptions {
    pub fn uniform(h: f64) -> Self {
        Self {
            h,
            boundary_multiplier: 1,
            refinements: Vec::new(),
            interfaces: Vec::new(),
        }
    }
}

impl VentricleGeometry {
    fn outer_contains(&self, p: Point) -> bool {
        self.lv_outer.contains(p) || self.rv_outer.contains(p)
    }

    /// Signed distance-like test used for parameter validation.
    fn outer_depth(&self, p: Point) -> f64 {
        (self.lv_outer.radius - dist(p, self.lv_outer.center))
            .max(self.rv_outer.radius - dist(p, self.rv_outer.center))
    }

    pub fn check(&self) -> Result<()> {
        let circles = [self.lv_outer, self.rv_outer, self.lv_cavity, self.rv_cavity];
        if circles.iter().any(|c| !(c.radius > 0.0) || !c.center.iter().all(|x| x.is_finite())) {
            return Err(Error::Geometry("radii must be positive and centres finite".into()));
        }
        let d = dist(self.lv_outer.center, self.rv_outer.center);
        let (r1, r2) = (self.lv_outer.radius, self.rv_outer.radius);
        if !(d > (r1 - r2).abs() && d < r1 + r2) {
            return Err(Error::Geometry(
                "outer disks must overlap without one containing the other".into(),
            ));
        }
        for (name, cav) in [("LV", self.lv_cavity), ("RV", self.rv_cavity)] {
            if cav.radius >= r1.max(r2) {
                return Err(Error::Geometry(format!(
                    "{name} cavity radius {} is not smaller than the outer radius",
                    cav.radius
                )));
            }
            let worst = (0..720)
                .map(|k| self.outer_depth(cav.point_at(2.0 * PI * k as f64 / 720.0)))
                .fold(f64::INFINITY, f64::min);
            if !(worst > 0.0) || !self.outer_contains(cav.center) {
                return Err(Error::Geometry(format!(
                    "{name} cavity is not strictly inside the outer contour"
                )));
            }
        }
        if dist(self.lv_cavity.center, self.rv_cavity.center)
            <= self.lv_cavity.radius + self.rv_cavity.radius
        {
            return Err(Error::Geometry("cavities overlap".into()));
        }
        Ok(())
    }

    /// Intersection points of the two outer circles (upper, lower).
    fn corners(&self) -> (Point, Point) {
        let c1 = self.lv_outer.center;
        let c2 = self.rv_outer.center;
        let d = dist(c1, c2);
        let (r1, r2) = (self.lv_outer.radius, self.rv_outer.radius);
        let a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
        let h = (r1 * r1 - a * a).sqrt();
        let u = [(c2[0] - c1[0]) / d, (c2[1] - c1[1]) / d];
        let m = [c1[0] + a * u[0], c1[1] + a * u[1]];
        ([m[0] - h * u[1], m[1] + h * u[0]], [m[0] + h * u[1], m[1] - h * u[0]])
    }

    /// Exact area of the domain (outer union minus cavities).
    pub fn area(&self) -> f64 {
        let d = dist(self.lv_outer.center, self.rv_outer.center);
        let (r1, r2) = (self.lv_outer.radius, self.rv_outer.radius);
        let lens = r1 * r1 * ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).acos()
            + r2 * r2 * ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).acos()
            - 0.5 * ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).sqrt();
        self.lv_outer.area() + self.rv_outer.area() - lens - self.lv_cavity.area()
            - self.rv_cavity.area()
    }

    /// Exact distance from `p` to the smooth boundary (for points in the domain).
    pub fn boundary_distance(&self, p: Point) -> f64 {
        let cav = |c: Circle| dist(p, c.center) - c.radius;
        // Distance to the outer contour: the closer of the two exposed arcs.
        let arc = |c: Circle, other: Circle| {
            let v = [p[0] - c.center[0], p[1] - c.center[1]];
            let r = crate::tensor::norm(v);
            let q = if r > 0.0 {
                [c.center[0] + c.radius * v[0] / r, c.center[1] + c.radius * v[1] / r]
            } else {
                c.point_at(0.0)
            };
            if other.contains(q) {
                let (a, b) = self.corners();
                dist(p, a).min(dist(p, b))
            } else {
                (c.radius - r).abs()
            }
        };
        arc(self.lv_outer, self.rv_outer)
            .min(arc(self.rv_outer, self.lv_outer))
            .min(cav(self.lv_cavity))
            .min(cav(self.rv_cavity))
    }

    /// Boundary loops with segment counts `m * ceil(len / (m h))`.
    pub fn boundary_loops(&self, h: f64, m: usize) -> Vec<BoundaryLoop> {
        let m = m.max(1);
        let count = |len: f64| -> usize {
            let base = (len / (h * m as f64)).ceil().max(1.0) as usize;
            (base * m).max(3)
        };
        let (upper, lower) = self.corners();
        let angle = |c: Circle, p: Point| (p[1] - c.center[1]).atan2(p[0] - c.center[0]);

        // LV arc: counterclockwise from the upper corner to the lower corner.
        let c1 = self.lv_outer;
        let a0 = angle(c1, upper);
        let mut a1 = angle(c1, lower);
        while a1 <= a0 {
            a1 += 2.0 * PI;
        }
        // RV arc: counterclockwise from the lower corner back to the upper one.
        let c2 = self.rv_outer;
        let b0 = angle(c2, lower);
        let mut b1 = angle(c2, upper);
        while b1 <= b0 {
            b1 += 2.0 * PI;
        }
        let n1 = count(c1.radius * (a1 - a0));
        let n2 = count(c2.radius * (b1 - b0));
        let mut outer = Vec::with_capacity(n1 + n2);
        outer.push(upper);
        for k in 1..n1 {
            outer.push(c1.point_at(a0 + (a1 - a0) * k as f64 / n1 as f64));
        }
        outer.push(lower);
        for k in 1..n2 {
            outer.push(c2.point_at(b0 + (b1 - b0) * k as f64 / n2 as f64));
        }

        let cavity = |c: Circle, region| BoundaryLoop {
            points: c.polygon(count(2.0 * PI * c.radius), true),
            region,
        };
        vec![
            BoundaryLoop {
                points: outer,
                region: BoundaryRegion::Epi,
            },
            cavity(self.lv_cavity, BoundaryRegion::EndoLv),
            cavity(self.rv_cavity, BoundaryRegion::EndoRv),
        ]
    }

    pub fn mesh(&self, opts: &VentricleMeshOptions) -> Result<Mesh> {
        self.check()?;
        if !(opts.h > 0.0) {
            return Err(Error::Geometry(format!("target edge length {} must be positive", opts.h)));
        }
        let mut size = SizeField::uniform(opts.h);
        size.refinements = opts.refinements.clone();
        let interfaces = opts
            .interfaces
            .iter()
            .map(|c| {
                let n = ((2.0 * PI * c.radius / size.at(c.point_at(0.0))).ceil() as usize).max(12);
                c.polygon(n, false)
            })
            .collect();
        let domain = PlanarDomain {
            loops: self.boundary_loops(opts.h, opts.boundary_multiplier),
            interfaces,
        };
        mesh_planar_domain(&domain, &size)
    }
}

/// Mesh of the default-style ventricle geometry with uniform target edge length.
pub fn generate_ventricle_section(geometry: &VentricleGeometry, h: f64) -> Result<Mesh> {
    geometry.mesh(&VentricleMeshOptions::uniform(h))
}

/// Square box centred at the origin with a conforming circular interface,
/// refined to `h_disk` near the disk. The box boundary is tagged EPI.
pub fn generate_box_with_disk(box_size: f64, radius: f64, h_disk: f64, h_far: f64) -> Result<Mesh> {
    if !(box_size > 2.0 * radius && radius > 0.0 && h_disk > 0.0 && h_far >= h_disk) {
        return Err(Error::Geometry("inconsistent box/disk parameters".into()));
    }
    let half = 0.5 * box_size;
    let per_side = (box_size / h_far).ceil() as usize;
    let mut outer = Vec::with_capacity(4 * per_side);
    let corners = [[-half, -half], [half, -half], [half, half], [-half, half]];
    for s in 0..4 {
        let a = corners[s];
        let b = corners[(s + 1) % 4];
        for k in 0..per_side {
            let t = k as f64 / per_side as f64;
            outer.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    let n_disk = ((2.0 * PI * radius / h_disk).ceil() as usize).max(12);
    let domain = PlanarDomain {
        loops: vec![BoundaryLoop {
            points: outer,
            region: BoundaryRegion::Epi,
        }],
        interfaces: vec![Circle::new([0.0, 0.0], radius).polygon(n_disk, false)],
    };
    let size = SizeField {
        base: h_far,
        refinements: vec![Refinement {
            center: [0.0, 0.0],
            radius: 1.5 * radius,
            size: h_disk,
        }],
        grading: 0.25,
    };
    mesh_planar_domain(&domain, &size)
}

/// Structured triangulation of an axis-aligned rectangle, all edges tagged `region`.
pub fn structured_rectangle(lo: Point, hi: Point, nx: usize, ny: usize, region: BoundaryRegion) -> Mesh {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([
                lo[0] + (hi[0] - lo[0]) * i as f64 / nx as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / ny as f64,
            ]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let mut boundary = Vec::new();
    for i in 0..nx {
        boundary.push(BoundaryEdge { nodes: [id(i, 0), id(i + 1, 0)], region });
        boundary.push(BoundaryEdge { nodes: [id(i + 1, ny), id(i, ny)], region });
    }
    for j in 0..ny {
        boundary.push(BoundaryEdge { nodes: [id(nx, j), id(nx, j + 1)], region });
        boundary.push(BoundaryEdge { nodes: [id(0, j + 1), id(0, j)], region });
    }
    Mesh::new_unchecked(nodes, triangles, boundary, None)
}

/// Two-triangle unit square.
pub fn unit_square() -> Mesh {
    structured_rectangle([0.0, 0.0], [1.0, 1.0], 1, 1, BoundaryRegion::Epi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euler_characteristic(m: &Mesh) -> i64 {
        m.num_nodes() as i64 - m.edge_count() as i64 + m.num_triangles() as i64
    }

    #[test]
    fn default_geometry_is_consistent() {
        let g = VentricleGeometry::default();
        g.check().unwrap();
        assert!(g.area() > 20.0 && g.area() < 26.0);
    }

    #[test]
    fn cavity_larger_than_outer_is_rejected() {
        let mut g = VentricleGeometry::default();
        g.lv_cavity.radius = 3.0;
        assert!(matches!(generate_ventricle_section(&g, 0.2), Err(Error::Geometry(_))));
    }

    #[test]
    fn overlapping_cavities_are_rejected() {
        let mut g = VentricleGeometry::default();
        g.rv_cavity.center = [1.0, 0.0];
        assert!(matches!(g.check(), Err(Error::Geometry(_))));
    }

    #[test]
    fn nonpositive_h_is_rejected() {
        assert!(generate_ventricle_section(&VentricleGeometry::default(), 0.0).is_err());
    }

    #[test]
    fn coarse_ventricle_mesh() {
        let g = VentricleGeometry::default();
        let m = generate_ventricle_section(&g, 0.2).unwrap();
        assert!(m.validate().is_empty());
        assert_eq!(m.boundary_loop_count(), 3);
        // Disk with two holes.
        assert_eq!(euler_characteristic(&m), -1);
        for r in BoundaryRegion::ALL {
            assert!(m.has_region(r));
        }
        assert!(m.max_edge_length() <= 1.5 * 0.2);
        let rel = (m.total_area() - g.area()).abs() / g.area();
        assert!(rel < 0.01, "area error {rel}");
    }

    #[test]
    fn nested_boundary_vertices() {
        let g = VentricleGeometry::default();
        let coarse = g.mesh(&VentricleMeshOptions::uniform(0.3)).unwrap();
        let mut fine_opts = VentricleMeshOptions::uniform(0.15);
        fine_opts.boundary_multiplier = 2;
        let fine = g.mesh(&fine_opts).unwrap();
        let fine_b: Vec<Point> = fine.boundary_nodes().iter().map(|&i| fine.nodes()[i]).collect();
        for i in coarse.boundary_nodes() {
            let p = coarse.nodes()[i];
            let d = fine_b.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-12, "coarse boundary node {p:?} missing from fine mesh");
        }
    }

    #[test]
    fn interface_circle_is_conforming() {
        let g = VentricleGeometry::default();
        let c = Circle::new([1.3, 0.0], 0.15);
        let mut opts = VentricleMeshOptions::uniform(0.2);
        opts.refinements.push(Refinement { center: c.center, radius: 0.3, size: 0.05 });
        opts.interfaces.push(c);
        let m = g.mesh(&opts).unwrap();
        assert!(m.validate().is_empty());
        // No triangle straddles the circle: centroids are clearly inside or outside.
        let inside: f64 = (0..m.num_triangles())
            .filter(|&t| c.contains(m.centroid(t)))
            .map(|t| m.signed_area(t))
            .sum();
        let n = ((2.0 * PI * 0.15 / 0.05).ceil() as usize).max(12) as f64;
        let polygon = 0.5 * n * 0.15 * 0.15 * (2.0 * PI / n).sin();
        assert!((inside - polygon).abs() < 1e-12, "{inside} vs {polygon}");
    }

    #[test]
    fn box_with_disk_mesh() {
        let m = generate_box_with_disk(20.0, 1.0, 0.125, 1.0).unwrap();
        assert!(m.validate().is_empty());
        assert!((m.total_area() - 400.0).abs() < 1e-9);
    }

    #[test]
    fn structured_rectangle_is_valid() {
        let m = structured_rectangle([0.0, 0.0], [1.0, 2.0], 3, 5, BoundaryRegion::EndoLv);
        assert!(m.validate().is_empty());
        assert_eq!(euler_characteristic(&m), 1);
    }

    #[test]
    fn boundary_distance_matches_geometry() {
        let g = VentricleGeometry::default();
        assert!((g.boundary_distance([-2.5, 0.0]) - 0.35).abs() < 1e-12);
        assert!((g.boundary_distance([1.3, 0.0]) - 0.45).abs() < 1e-12);
    }
}
