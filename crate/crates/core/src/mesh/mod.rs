//! Conforming triangulations of the unit square and of the L-shaped domain.
//!
//! Triangles are stored counterclockwise. For newest-vertex bisection every
//! triangle carries a refinement edge, encoded as the local index of the
//! vertex *opposite* that edge: refinement edge `r` joins vertices
//! `(r + 1) % 3` and `(r + 2) % 3`, and vertex `r` is the newest vertex.

mod audit;
mod bisect;
mod io;

pub use audit::{check_conformity, check_grading, ConformityReport};
pub use bisect::{bisect, graded_lshape_hierarchy, graded_lshape_mesh, GradingParams};
pub use io::{read_mesh, write_mesh};

use crate::error::{Error, Result};

/// Meshes larger than this are refused.
pub const MAX_TRIANGLES: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_vertex: Vec<bool>,
    pub refinement_edge: Vec<u8>,
    pub level: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub n_triangles: usize,
    pub n_vertices: usize,
    pub h_max: f64,
    pub h_min: f64,
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRegion {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl BoxRegion {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }
}

impl TriMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        signed_area(self.corners(t))
    }

    pub fn area(&self, t: usize) -> f64 {
        self.signed_area(t).abs()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    /// Longest edge length.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        a.dist(b).max(b.dist(c)).max(c.dist(a))
    }

    /// Euclidean distance from `p` to the closed triangle `t`.
    pub fn distance_to(&self, t: usize, p: Point2) -> f64 {
        point_triangle_distance(p, self.corners(t))
    }

    pub fn stats(&self) -> MeshStats {
        mesh_stats(self)
    }

    /// Index of a triangle containing `p` (closed), by brute force.
    pub fn locate_brute(&self, p: Point2) -> Option<usize> {
        (0..self.n_triangles()).find(|&t| contains(self.corners(t), p, 1e-12))
    }
}

pub fn signed_area([a, b, c]: [Point2; 3]) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

/// Barycentric coordinates of `p` with respect to the triangle.
pub fn barycentric(tri: [Point2; 3], p: Point2) -> [f64; 3] {
    let area = signed_area(tri);
    let l0 = signed_area([p, tri[1], tri[2]]) / area;
    let l1 = signed_area([tri[0], p, tri[2]]) / area;
    [l0, l1, 1.0 - l0 - l1]
}

pub(crate) fn contains(tri: [Point2; 3], p: Point2, eps: f64) -> bool {
    barycentric(tri, p).iter().all(|&l| l >= -eps)
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.dist(Point2::new(a.x + t * dx, a.y + t * dy))
}

pub(crate) fn point_triangle_distance(p: Point2, tri: [Point2; 3]) -> f64 {
    if contains(tri, p, 0.0) {
        return 0.0;
    }
    point_segment_distance(p, tri[0], tri[1])
        .min(point_segment_distance(p, tri[1], tri[2]))
        .min(point_segment_distance(p, tri[2], tri[0]))
}

/// Uniform mesh of `[0,1]²`: a `2^level × 2^level` grid of squares, each cut
/// along its anti-diagonal, so the diagonal `{(t, 1 − t)}` is resolved by
/// mesh edges on every level.
pub fn uniform_square_mesh(level: usize) -> Result<TriMesh> {
    let n_tri = 1usize
        .checked_shl((2 * level + 1) as u32)
        .filter(|&n| n <= MAX_TRIANGLES)
        .ok_or_else(|| {
            Error::Resource(format!(
                "uniform square mesh of level {level} exceeds {MAX_TRIANGLES} triangles"
            ))
        })?;
    let n = 1usize << level;
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;

    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    let mut boundary_vertex = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point2::new(i as f64 * h, j as f64 * h));
            boundary_vertex.push(i == 0 || j == 0 || i == n || j == n);
        }
    }

    let mut triangles = Vec::with_capacity(n_tri);
    let mut refinement_edge = Vec::with_capacity(n_tri);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            // hypotenuse b–d is the refinement edge of both halves
            triangles.push([a, b, d]);
            refinement_edge.push(0);
            triangles.push([b, c, d]);
            refinement_edge.push(1);
        }
    }

    Ok(TriMesh {
        vertices,
        triangles,
        boundary_vertex,
        refinement_edge,
        level,
    })
}

/// Coarse mesh of `[−1,1]² \ ([0,1]×[−1,0])`: each of the three retained
/// quadrants is split along the diagonal through the re-entrant corner.
pub fn lshape_initial_mesh() -> TriMesh {
    let vertices = vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(0.0, 1.0),
        Point2::new(-1.0, 1.0),
        Point2::new(-1.0, 0.0),
        Point2::new(-1.0, -1.0),
        Point2::new(0.0, -1.0),
    ];
    let triangles = vec![
        [0, 1, 2],
        [0, 2, 3],
        [0, 3, 4],
        [0, 4, 5],
        [0, 5, 6],
        [0, 6, 7],
    ];
    let mut mesh = TriMesh {
        boundary_vertex: vec![true; vertices.len()],
        refinement_edge: vec![0; triangles.len()],
        vertices,
        triangles,
        level: 0,
    };
    init_longest_edge(&mut mesh);
    mesh
}

/// Sets every refinement edge to the longest edge of its triangle.
pub fn init_longest_edge(mesh: &mut TriMesh) {
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.corners(t);
        let opposite = [b.dist(c), c.dist(a), a.dist(b)];
        let mut best = 0;
        for k in 1..3 {
            if opposite[k] > opposite[best] {
                best = k;
            }
        }
        mesh.refinement_edge[t] = best as u8;
    }
}

pub fn mesh_stats(mesh: &TriMesh) -> MeshStats {
    let (mut h_max, mut h_min) = (0.0f64, f64::INFINITY);
    for t in 0..mesh.n_triangles() {
        let d = mesh.diameter(t);
        h_max = h_max.max(d);
        h_min = h_min.min(d);
    }
    MeshStats {
        n_triangles: mesh.n_triangles(),
        n_vertices: mesh.n_vertices(),
        h_max,
        h_min,
    }
}

/// Uniform bucket grid for point location in a fixed mesh.
pub struct PointLocator<'a> {
    mesh: &'a TriMesh,
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &mesh.vertices {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let side = ((mesh.n_triangles() as f64).sqrt().ceil() as usize).max(1);
        let cell = ((x1 - x0).max(y1 - y0) / side as f64).max(f64::MIN_POSITIVE);
        let nx = ((x1 - x0) / cell).ceil() as usize + 1;
        let ny = ((y1 - y0) / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for t in 0..mesh.n_triangles() {
            let c = mesh.corners(t);
            let bx0 = c.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
            let bx1 = c.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
            let by0 = c.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
            let by1 = c.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
            let i0 = ((bx0 - x0) / cell).floor().max(0.0) as usize;
            let i1 = (((bx1 - x0) / cell).floor() as usize).min(nx - 1);
            let j0 = ((by0 - y0) / cell).floor().max(0.0) as usize;
            let j1 = (((by1 - y0) / cell).floor() as usize).min(ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Self {
            mesh,
            x0,
            y0,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    pub fn locate(&self, p: Point2) -> Option<usize> {
        let i = ((p.x - self.x0) / self.cell).floor();
        let j = ((p.y - self.y0) / self.cell).floor();
        if i < 0.0 || j < 0.0 {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        if i >= self.nx || j >= self.ny {
            return None;
        }
        self.buckets[j * self.nx + i]
            .iter()
            .copied()
            .find(|&t| contains(self.mesh.corners(t), p, 1e-12))
    }
}
