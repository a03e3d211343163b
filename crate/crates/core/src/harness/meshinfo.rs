//! Mesh statistics, dumps and the element size scatter.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::mesh::{
    check_conformity, check_grading, graded_lshape_mesh, uniform_square_mesh, GradingParams,
    Point2, TriMesh,
};
use crate::multiindex::Experiment;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshReport {
    pub experiment: Experiment,
    pub level: usize,
    pub n_triangles: usize,
    pub n_vertices: usize,
    pub h_max: f64,
    pub h_min: f64,
    pub conforming: bool,
    /// Triangles coarser than the grading rule allows (always 0 for the square).
    pub grading_violations: usize,
}

pub fn experiment_mesh(
    experiment: Experiment,
    level: usize,
    grading: &GradingParams,
) -> Result<TriMesh> {
    match experiment {
        Experiment::Square => uniform_square_mesh(level),
        Experiment::Lshape => graded_lshape_mesh(level, grading),
    }
}

pub fn mesh_report(experiment: Experiment, mesh: &TriMesh, grading: &GradingParams) -> MeshReport {
    let stats = mesh.stats();
    MeshReport {
        experiment,
        level: mesh.level,
        n_triangles: stats.n_triangles,
        n_vertices: stats.n_vertices,
        h_max: stats.h_max,
        h_min: stats.h_min,
        conforming: check_conformity(mesh).is_conforming(),
        grading_violations: match experiment {
            Experiment::Square => 0,
            Experiment::Lshape => check_grading(mesh, grading, mesh.level),
        },
    }
}

/// CSV `distance,diameter` with one line per triangle; the distance is
/// measured from the origin to the closest point of the triangle.
pub fn write_size_scatter<W: Write>(mesh: &TriMesh, mut out: W) -> std::io::Result<()> {
    writeln!(out, "distance,diameter")?;
    for t in 0..mesh.n_triangles() {
        writeln!(
            out,
            "{:?},{:?}",
            mesh.distance_to(t, Point2::new(0.0, 0.0)),
            mesh.diameter(t)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports() {
        let g = GradingParams::default();
        let m = experiment_mesh(Experiment::Square, 1, &g).unwrap();
        let r = mesh_report(Experiment::Square, &m, &g);
        assert_eq!((r.n_triangles, r.n_vertices, r.conforming), (8, 9, true));
        let m = experiment_mesh(Experiment::Lshape, 3, &g).unwrap();
        let r = mesh_report(Experiment::Lshape, &m, &g);
        assert!(r.conforming);
        assert_eq!((r.level, r.grading_violations), (3, 0));
        let mut buf = Vec::new();
        write_size_scatter(&m, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().lines().count(),
            m.n_triangles() + 1
        );
    }
}
