//! Newest-vertex bisection with conforming closure, and the graded L-shape
//! family built from it.

use std::collections::HashMap;

use super::{lshape_initial_mesh, Point2, TriMesh, MAX_TRIANGLES};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

pub(crate) fn edge_key(a: usize, b: usize) -> u64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    ((lo as u64) << 32) | hi as u64
}

/// Edge numbering of a mesh: `tri_edges[t][k]` is the edge opposite local
/// vertex `k`; `edge_tris[e]` lists the (at most two) triangles on edge `e`.
pub(crate) struct EdgeTable {
    pub tri_edges: Vec<[usize; 3]>,
    pub edge_tris: Vec<[usize; 2]>,
    pub edge_verts: Vec<[usize; 2]>,
}

impl EdgeTable {
    pub fn new(mesh: &TriMesh) -> Self {
        let mut ids: HashMap<u64, usize> = HashMap::with_capacity(mesh.n_triangles() * 2);
        let mut tri_edges = Vec::with_capacity(mesh.n_triangles());
        let mut edge_tris: Vec<[usize; 2]> = Vec::with_capacity(mesh.n_triangles() * 2);
        let mut edge_verts = Vec::with_capacity(mesh.n_triangles() * 2);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let mut local = [0; 3];
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let next = edge_tris.len();
                let e = *ids.entry(edge_key(a, b)).or_insert(next);
                if e == next {
                    edge_tris.push([t, NONE]);
                    edge_verts.push([a, b]);
                } else {
                    edge_tris[e][1] = t;
                }
                local[k] = e;
            }
            tri_edges.push(local);
        }
        Self {
            tri_edges,
            edge_tris,
            edge_verts,
        }
    }

    pub fn n_edges(&self) -> usize {
        self.edge_tris.len()
    }

    pub fn is_boundary(&self, e: usize) -> bool {
        self.edge_tris[e][1] == NONE
    }
}

/// Bisects every marked triangle through its refinement edge and closes the
/// result to a conforming mesh. Children replace their parent in place, so
/// the output ordering is deterministic.
///
/// Panics if a marked index is out of range.
pub fn bisect(mesh: &TriMesh, marked: &[usize]) -> TriMesh {
    if marked.is_empty() {
        return mesh.clone();
    }
    let edges = EdgeTable::new(mesh);
    let mut edge_marked = vec![false; edges.n_edges()];
    let mut work = Vec::new();

    let mark = |e: usize, edge_marked: &mut Vec<bool>, work: &mut Vec<usize>| {
        if !edge_marked[e] {
            edge_marked[e] = true;
            for &t in &edges.edge_tris[e] {
                if t != NONE {
                    work.push(t);
                }
            }
        }
    };

    for &t in marked {
        assert!(t < mesh.n_triangles(), "marked triangle {t} out of range");
        let e = edges.tri_edges[t][mesh.refinement_edge[t] as usize];
        mark(e, &mut edge_marked, &mut work);
    }
    // closure: a triangle with any marked edge must also bisect its refinement edge
    while let Some(t) = work.pop() {
        let e_ref = edges.tri_edges[t][mesh.refinement_edge[t] as usize];
        if !edge_marked[e_ref] && edges.tri_edges[t].iter().any(|&e| edge_marked[e]) {
            mark(e_ref, &mut edge_marked, &mut work);
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut boundary_vertex = mesh.boundary_vertex.clone();
    let mut midpoint = vec![NONE; edges.n_edges()];
    for e in 0..edges.n_edges() {
        if edge_marked[e] {
            let [a, b] = edges.edge_verts[e];
            midpoint[e] = vertices.len();
            vertices.push(vertices[a].midpoint(vertices[b]));
            boundary_vertex.push(edges.is_boundary(e));
        }
    }

    let mut triangles = Vec::with_capacity(mesh.n_triangles() * 2);
    let mut refinement_edge = Vec::with_capacity(mesh.n_triangles() * 2);
    for t in 0..mesh.n_triangles() {
        split(
            mesh.triangles[t],
            mesh.refinement_edge[t] as usize,
            edges.tri_edges[t],
            &midpoint,
            &mut triangles,
            &mut refinement_edge,
        );
    }

    TriMesh {
        vertices,
        triangles,
        boundary_vertex,
        refinement_edge,
        level: mesh.level,
    }
}

fn split(
    v: [usize; 3],
    r: usize,
    edges: [usize; 3],
    midpoint: &[usize],
    out: &mut Vec<[usize; 3]>,
    out_ref: &mut Vec<u8>,
) {
    let e_ref = edges[r];
    if e_ref == NONE || midpoint[e_ref] == NONE {
        out.push(v);
        out_ref.push(r as u8);
        return;
    }
    let m = midpoint[e_ref];
    let (p, a, b) = (v[r], v[(r + 1) % 3], v[(r + 2) % 3]);
    // the new vertex m is the newest vertex of both children
    split(
        [m, p, a],
        0,
        [edges[(r + 2) % 3], NONE, NONE],
        midpoint,
        out,
        out_ref,
    );
    split(
        [m, b, p],
        0,
        [edges[(r + 1) % 3], NONE, NONE],
        midpoint,
        out,
        out_ref,
    );
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradingParams {
    /// Exponent β in `diam(T) ≲ dist(0, T)^β · h`.
    pub exponent: f64,
    pub c_grade: f64,
    pub max_triangles: usize,
}

impl Default for GradingParams {
    fn default() -> Self {
        Self {
            exponent: 1.0 / 3.0,
            c_grade: 1.0,
            max_triangles: MAX_TRIANGLES,
        }
    }
}

impl GradingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.exponent > 0.0 && self.exponent <= 1.0) {
            return Err(Error::Config(format!(
                "grading exponent {} not in (0, 1]",
                self.exponent
            )));
        }
        if !(self.c_grade > 0.0) {
            return Err(Error::Config(format!(
                "c_grade {} must be positive",
                self.c_grade
            )));
        }
        Ok(())
    }

    /// Whether triangle `t` is coarser than the grading allows on `level`.
    pub fn violates(&self, mesh: &TriMesh, t: usize, level: usize) -> bool {
        let diam = mesh.diameter(t);
        let dist = mesh.distance_to(t, Point2::new(0.0, 0.0));
        diam > self.c_grade * dist.max(diam).powf(self.exponent) * 0.5f64.powi(level as i32)
    }
}

/// Graded meshes for levels `0..=max_level`; each level continues refining
/// the previous one, so the family is nested.
pub fn graded_lshape_hierarchy(max_level: usize, params: &GradingParams) -> Result<Vec<TriMesh>> {
    params.validate()?;
    let mut mesh = lshape_initial_mesh();
    let mut out = Vec::with_capacity(max_level + 1);
    for level in 0..=max_level {
        mesh = refine_to_grading(mesh, level, params)?;
        out.push(mesh.clone());
    }
    Ok(out)
}

pub fn graded_lshape_mesh(level: usize, params: &GradingParams) -> Result<TriMesh> {
    params.validate()?;
    let mut mesh = lshape_initial_mesh();
    for l in 0..=level {
        mesh = refine_to_grading(mesh, l, params)?;
    }
    Ok(mesh)
}

fn refine_to_grading(mut mesh: TriMesh, level: usize, params: &GradingParams) -> Result<TriMesh> {
    loop {
        let marked: Vec<usize> = (0..mesh.n_triangles())
            .filter(|&t| params.violates(&mesh, t, level))
            .collect();
        if marked.is_empty() {
            break;
        }
        mesh = bisect(&mesh, &marked);
        if mesh.n_triangles() > params.max_triangles {
            return Err(Error::Resource(format!(
                "graded refinement of level {level} exceeded {} triangles",
                params.max_triangles
            )));
        }
    }
    mesh.level = level;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{check_conformity, mesh_stats, uniform_square_mesh};

    #[test]
    fn empty_marking_is_identity() {
        let m = uniform_square_mesh(2).unwrap();
        assert_eq!(bisect(&m, &[]), m);
    }

    #[test]
    fn double_uniform_bisection_quarters_every_triangle() {
        let m = uniform_square_mesh(2).unwrap();
        let all: Vec<usize> = (0..m.n_triangles()).collect();
        let once = bisect(&m, &all);
        assert_eq!(once.n_triangles(), 2 * m.n_triangles());
        let all1: Vec<usize> = (0..once.n_triangles()).collect();
        let twice = bisect(&once, &all1);
        assert_eq!(twice.n_triangles(), 4 * m.n_triangles());
        assert_eq!(mesh_stats(&twice).h_max, 0.5 * mesh_stats(&m).h_max);
        assert!(check_conformity(&twice).is_conforming());
        // grandchildren stay inside their parent: children are emitted in place
        for t in 0..m.n_triangles() {
            let parent = m.corners(t);
            for c in 4 * t..4 * t + 4 {
                for p in twice.corners(c) {
                    assert!(crate::mesh::contains(parent, p, 1e-12));
                }
            }
        }
    }

    #[test]
    fn single_marked_triangle_triggers_closure() {
        let m = uniform_square_mesh(2).unwrap();
        let once = bisect(&m, &[9]);
        let again = bisect(&once, &[5]);
        for mesh in [&once, &again] {
            assert!(check_conformity(mesh).is_conforming());
            assert!((mesh.total_area() - 1.0).abs() < 1e-14);
        }
        assert!(again.n_triangles() > once.n_triangles() + 1);
    }

    #[test]
    fn graded_mesh_basic_properties() {
        let params = GradingParams::default();
        let m0 = graded_lshape_mesh(0, &params).unwrap();
        assert!((m0.total_area() - 3.0).abs() < 1e-13);
        assert!(
            m0.n_triangles() > 6,
            "the corner triangles violate the level-0 grading"
        );
        for level in 0..=4 {
            let m = graded_lshape_mesh(level, &params).unwrap();
            assert!(check_conformity(&m).is_conforming());
            assert!((0..m.n_triangles()).all(|t| !params.violates(&m, t, level)));
        }
    }

    #[test]
    fn graded_cap_is_enforced() {
        let params = GradingParams {
            max_triangles: 100,
            ..Default::default()
        };
        assert!(matches!(
            graded_lshape_mesh(5, &params),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn invalid_grading_parameters() {
        let bad = GradingParams {
            exponent: 0.0,
            ..Default::default()
        };
        assert!(matches!(graded_lshape_mesh(1, &bad), Err(Error::Config(_))));
        let bad = GradingParams {
            c_grade: -1.0,
            ..Default::default()
        };
        assert!(matches!(graded_lshape_mesh(1, &bad), Err(Error::Config(_))));
    }
}
