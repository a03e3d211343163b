use std::collections::HashMap;

use super::bisect::edge_key;
use super::{GradingParams, Point2, TriMesh};

/// Outcome of [`check_conformity`]. Every counter is zero for a valid mesh.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConformityReport {
    pub nonpositive_triangles: usize,
    /// Edges carried by more than two triangles.
    pub overshared_edges: usize,
    /// Interior edges traversed in the same direction by both neighbours.
    pub folded_edges: usize,
    /// Single-sided edges with another vertex in their relative interior.
    pub hanging_edges: usize,
    pub boundary_flag_mismatches: usize,
}

impl ConformityReport {
    pub fn is_conforming(&self) -> bool {
        *self == ConformityReport::default()
    }
}

/// Edge-based conformity audit. A mesh of positively oriented triangles in
/// which every edge is either shared by exactly two oppositely oriented
/// triangles or is a true boundary edge (no vertex inside it) is conforming.
pub fn check_conformity(mesh: &TriMesh) -> ConformityReport {
    let mut report = ConformityReport::default();
    for t in 0..mesh.n_triangles() {
        if !(mesh.signed_area(t) > 0.0) {
            report.nonpositive_triangles += 1;
        }
    }

    // key -> (number of uses, net orientation)
    let mut edges: HashMap<u64, (u32, i32)> = HashMap::with_capacity(mesh.n_triangles() * 2);
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_vertices()];
    for tri in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let entry = edges.entry(edge_key(a, b)).or_insert((0, 0));
            entry.0 += 1;
            entry.1 += if a < b { 1 } else { -1 };
            if entry.0 == 1 {
                neighbours[a].push(b);
                neighbours[b].push(a);
            }
        }
    }

    let mut on_boundary = vec![false; mesh.n_vertices()];
    for (&key, &(uses, net)) in &edges {
        let (a, b) = ((key >> 32) as usize, (key & 0xffff_ffff) as usize);
        match uses {
            1 => {
                on_boundary[a] = true;
                on_boundary[b] = true;
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                let hanging = neighbours[a]
                    .iter()
                    .any(|&m| m != b && strictly_inside_segment(mesh.vertices[m], pa, pb));
                if hanging {
                    report.hanging_edges += 1;
                }
            }
            2 => {
                if net != 0 {
                    report.folded_edges += 1;
                }
            }
            _ => report.overshared_edges += 1,
        }
    }
    report.boundary_flag_mismatches = on_boundary
        .iter()
        .zip(&mesh.boundary_vertex)
        .filter(|(a, b)| a != b)
        .count();
    report
}

fn strictly_inside_segment(p: Point2, a: Point2, b: Point2) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let cross = (p.x - a.x) * dy - (p.y - a.y) * dx;
    if cross.abs() > 1e-12 * len2 {
        return false;
    }
    let t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    t > 1e-12 && t < 1.0 - 1e-12
}

/// Number of triangles violating the level-`level` grading criterion.
pub fn check_grading(mesh: &TriMesh, params: &GradingParams, level: usize) -> usize {
    (0..mesh.n_triangles())
        .filter(|&t| params.violates(mesh, t, level))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::uniform_square_mesh;

    #[test]
    fn detects_hanging_node() {
        // split the upper triangle of the level-0 square at the diagonal midpoint only
        let mut m = uniform_square_mesh(0).unwrap();
        let mid = m.vertices.len();
        m.vertices.push(Point2::new(0.5, 0.5));
        m.boundary_vertex.push(false);
        let [b, c, d] = m.triangles[1];
        m.triangles[1] = [b, c, mid];
        m.triangles.push([c, d, mid]);
        m.refinement_edge.push(0);
        let report = check_conformity(&m);
        assert!(report.hanging_edges > 0);
        assert!(!report.is_conforming());
    }

    #[test]
    fn detects_flipped_triangle_and_bad_flags() {
        let mut m = uniform_square_mesh(1).unwrap();
        m.triangles[0].swap(1, 2);
        m.boundary_vertex[4] = true;
        let report = check_conformity(&m);
        assert_eq!(report.nonpositive_triangles, 1);
        assert_eq!(report.boundary_flag_mismatches, 1);
    }
}
