//! Plain-text mesh dumps:
//!
//! ```text
//! vertices N triangles M
//! x y boundary_flag        (N lines)
//! i0 i1 i2 refedge         (M lines)
//! ```
//!
//! Coordinates are written with the shortest representation that round-trips.

use std::io::{BufRead, Write};

use super::{Point2, TriMesh};
use crate::error::{Error, Result};

pub fn write_mesh<W: Write>(mesh: &TriMesh, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "vertices {} triangles {}",
        mesh.n_vertices(),
        mesh.n_triangles()
    )?;
    for (p, &b) in mesh.vertices.iter().zip(&mesh.boundary_vertex) {
        writeln!(out, "{:?} {:?} {}", p.x, p.y, u8::from(b))?;
    }
    for (tri, &r) in mesh.triangles.iter().zip(&mesh.refinement_edge) {
        writeln!(out, "{} {} {} {}", tri[0], tri[1], tri[2], r)?;
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("expected {what}"),
        })
}

/// Reads a dump written by [`write_mesh`]. The level is not stored and is
/// returned as 0.
pub fn read_mesh<R: BufRead>(input: R) -> Result<TriMesh> {
    let mut lines = input.lines().enumerate();
    let mut next = || -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i + 1, l)),
            Some((i, Err(e))) => Err(Error::Parse {
                line: i + 1,
                message: e.to_string(),
            }),
            None => Err(Error::Parse {
                line: 0,
                message: "unexpected end of file".into(),
            }),
        }
    };

    let (ln, header) = next()?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("vertices") {
        return Err(Error::Parse {
            line: ln,
            message: "header must start with `vertices`".into(),
        });
    }
    let n: usize = parse(tok.next(), ln, "vertex count")?;
    if tok.next() != Some("triangles") {
        return Err(Error::Parse {
            line: ln,
            message: "missing `triangles` in header".into(),
        });
    }
    let m: usize = parse(tok.next(), ln, "triangle count")?;

    let mut vertices = Vec::with_capacity(n);
    let mut boundary_vertex = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, l) = next()?;
        let mut tok = l.split_whitespace();
        let x = parse(tok.next(), ln, "x")?;
        let y = parse(tok.next(), ln, "y")?;
        let b: u8 = parse(tok.next(), ln, "boundary flag")?;
        vertices.push(Point2::new(x, y));
        boundary_vertex.push(b != 0);
    }
    let mut triangles = Vec::with_capacity(m);
    let mut refinement_edge = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, l) = next()?;
        let mut tok = l.split_whitespace();
        let mut tri = [0usize; 3];
        for v in &mut tri {
            *v = parse(tok.next(), ln, "vertex index")?;
            if *v >= n {
                return Err(Error::Parse {
                    line: ln,
                    message: format!("vertex index {v} out of range"),
                });
            }
        }
        let r: u8 = parse(tok.next(), ln, "refinement edge")?;
        if r > 2 {
            return Err(Error::Parse {
                line: ln,
                message: format!("refinement edge {r} not in 0..=2"),
            });
        }
        triangles.push(tri);
        refinement_edge.push(r);
    }
    Ok(TriMesh {
        vertices,
        triangles,
        boundary_vertex,
        refinement_edge,
        level: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{graded_lshape_mesh, GradingParams};

    #[test]
    fn dump_round_trips_exactly() {
        let m = graded_lshape_mesh(2, &GradingParams::default()).unwrap();
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        let back = read_mesh(buf.as_slice()).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.boundary_vertex, m.boundary_vertex);
        assert_eq!(back.refinement_edge, m.refinement_edge);
    }

    #[test]
    fn header_format() {
        let m = crate::mesh::uniform_square_mesh(0).unwrap();
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("vertices 4 triangles 2\n"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn malformed_input() {
        assert!(read_mesh("".as_bytes()).is_err());
        assert!(read_mesh("vertices 1 triangles 0\n0 0\n".as_bytes()).is_err());
        assert!(read_mesh("vertices 1 triangles 1\n0 0 1\n0 0 5 0\n".as_bytes()).is_err());
    }
}
