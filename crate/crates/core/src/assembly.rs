//! P1 assembly on triangles.
//!
//! Gradients of the hat functions are constant on each triangle, so the
//! element stiffness for a coefficient `A` is `(∫_T A) · ∇λ_a·∇λ_b`. An
//! [`AssembledProblem`] therefore keeps every mode matrix in factored form:
//! one integral `∫_T φ_j` per triangle and mode, plus a shared scatter map.
//! Combining `s` modes for one sample costs `O(#T · s)` followed by one
//! scatter into the common sparsity pattern.

use crate::coefficient::{CoefficientExpansion, ParamVector};
use crate::error::{Error, Result};
use crate::mesh::{barycentric, signed_area, BoxRegion, Point2, PointLocator, TriMesh};
use crate::quadrature::{gauss_legendre_unit, TriangleRule};
use crate::sparse::{CsrMatrix, DenseVector};

const NONE: usize = usize::MAX;

/// Numbering of the interior (non-Dirichlet) vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    vertex_dof: Vec<usize>,
    dof_vertex: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &TriMesh) -> Self {
        let mut vertex_dof = vec![NONE; mesh.n_vertices()];
        let mut dof_vertex = Vec::new();
        for (v, &b) in mesh.boundary_vertex.iter().enumerate() {
            if !b {
                vertex_dof[v] = dof_vertex.len();
                dof_vertex.push(v);
            }
        }
        Self {
            vertex_dof,
            dof_vertex,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_vertex.len()
    }

    pub fn dof(&self, vertex: usize) -> Option<usize> {
        let d = self.vertex_dof[vertex];
        (d != NONE).then_some(d)
    }

    pub fn vertex(&self, dof: usize) -> usize {
        self.dof_vertex[dof]
    }

    pub fn restrict(&self, nodal: &[f64]) -> DenseVector {
        self.dof_vertex.iter().map(|&v| nodal[v]).collect()
    }

    /// Nodal vector with zeros on the Dirichlet boundary.
    pub fn extend(&self, dofs: &[f64]) -> Vec<f64> {
        let mut nodal = vec![0.0; self.vertex_dof.len()];
        for (d, &v) in self.dof_vertex.iter().enumerate() {
            nodal[v] = dofs[d];
        }
        nodal
    }
}

/// Sparsity pattern over interior dofs plus, per triangle, the value slots of
/// its 3×3 element matrix and the gradient products `∇λ_a·∇λ_b`.
#[derive(Debug, Clone)]
pub struct StiffnessLayout {
    template: CsrMatrix,
    slots: Vec<[usize; 9]>,
    grads: Vec<[f64; 9]>,
}

impl StiffnessLayout {
    pub fn new(mesh: &TriMesh, dofs: &DofMap) -> Result<Self> {
        let n = dofs.n_dofs();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for tri in &mesh.triangles {
            for &a in tri {
                if let Some(i) = dofs.dof(a) {
                    for &b in tri {
                        if let Some(j) = dofs.dof(b) {
                            rows[i].push(j);
                        }
                    }
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let template = CsrMatrix::from_pattern(n, row_ptr, col_idx);

        let mut slots = Vec::with_capacity(mesh.n_triangles());
        let mut grads = Vec::with_capacity(mesh.n_triangles());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let corners = mesh.corners(t);
            let area = signed_area(corners);
            let diam = mesh.diameter(t);
            if !(area > 1e-14 * diam * diam) {
                return Err(Error::DegenerateTriangle { index: t, area });
            }
            let g = hat_gradients(corners, area);
            let mut slot = [NONE; 9];
            let mut prod = [0.0; 9];
            for a in 0..3 {
                for b in 0..3 {
                    prod[3 * a + b] = g[a][0] * g[b][0] + g[a][1] * g[b][1];
                    if let (Some(i), Some(j)) = (dofs.dof(tri[a]), dofs.dof(tri[b])) {
                        slot[3 * a + b] = template.position(i, j).expect("pattern covers element");
                    }
                }
            }
            slots.push(slot);
            grads.push(prod);
        }
        Ok(Self {
            template,
            slots,
            grads,
        })
    }

    pub fn template(&self) -> &CsrMatrix {
        &self.template
    }

    /// Writes `Σ_T c_T ∇λ_a·∇λ_b` into `out`, which must share the pattern.
    pub fn scatter_into(&self, element_coefficients: &[f64], out: &mut CsrMatrix) {
        out.values.iter_mut().for_each(|v| *v = 0.0);
        for (t, &c) in element_coefficients.iter().enumerate() {
            let (slot, g) = (&self.slots[t], &self.grads[t]);
            for k in 0..9 {
                if slot[k] != NONE {
                    out.values[slot[k]] += c * g[k];
                }
            }
        }
    }

    pub fn scatter(&self, element_coefficients: &[f64]) -> CsrMatrix {
        let mut m = self.template.clone();
        self.scatter_into(element_coefficients, &mut m);
        m
    }
}

fn hat_gradients([p0, p1, p2]: [Point2; 3], area: f64) -> [[f64; 2]; 3] {
    let s = 0.5 / area;
    [
        [(p1.y - p2.y) * s, (p2.x - p1.x) * s],
        [(p2.y - p0.y) * s, (p0.x - p2.x) * s],
        [(p0.y - p1.y) * s, (p1.x - p0.x) * s],
    ]
}

/// Which coefficient a single stiffness matrix is built for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeSpec {
    Constant(f64),
    /// 0-based index into the expansion's modes, weight included.
    Mode(usize),
}

/// Stiffness matrix `∫_D φ ∇v_i·∇v_j` over interior dofs for a general
/// coefficient, element integrals by `rule`.
pub fn assemble_stiffness(
    mesh: &TriMesh,
    coefficient: impl Fn(Point2) -> f64,
    rule: &TriangleRule,
) -> Result<CsrMatrix> {
    let dofs = DofMap::new(mesh);
    let layout = StiffnessLayout::new(mesh, &dofs)?;
    let c: Vec<f64> = (0..mesh.n_triangles())
        .map(|t| rule.integrate(mesh.corners(t), &coefficient))
        .collect();
    Ok(layout.scatter(&c))
}

pub fn assemble_mode_matrix(
    mesh: &TriMesh,
    expansion: &CoefficientExpansion,
    mode: ModeSpec,
    rule: &TriangleRule,
) -> Result<CsrMatrix> {
    match mode {
        ModeSpec::Constant(phi) => assemble_stiffness(mesh, |_| phi, rule),
        ModeSpec::Mode(j) => {
            if j >= expansion.n_modes() {
                return Err(Error::Dimension(format!(
                    "mode {j} not stored ({} modes)",
                    expansion.n_modes()
                )));
            }
            assemble_stiffness(mesh, |p| expansion.mode_value(j, p), rule)
        }
    }
}

/// `∫_T φ_j` for every triangle and the first `n_modes` modes, row-major by
/// triangle. Sines are tabulated once per quadrature point.
fn mode_integrals(
    mesh: &TriMesh,
    expansion: &CoefficientExpansion,
    n_modes: usize,
    rule: &TriangleRule,
) -> Vec<f64> {
    use std::f64::consts::PI;
    let modes = &expansion.modes[..n_modes];
    let kx = modes.iter().map(|m| m.k1).max().unwrap_or(0) as usize;
    let ky = modes.iter().map(|m| m.k2).max().unwrap_or(0) as usize;
    let weights: Vec<f64> = (0..n_modes).map(|j| expansion.weight(j)).collect();
    let mut out = vec![0.0; mesh.n_triangles() * n_modes];
    let mut sx = vec![0.0; kx + 1];
    let mut sy = vec![0.0; ky + 1];
    let mut acc = vec![0.0; n_modes];
    for t in 0..mesh.n_triangles() {
        let corners = mesh.corners(t);
        let area = signed_area(corners).abs();
        acc.iter_mut().for_each(|a| *a = 0.0);
        for q in 0..rule.len() {
            let p = rule.map(corners, q);
            for k in 1..=kx {
                sx[k] = (k as f64 * PI * p.x).sin();
            }
            for k in 1..=ky {
                sy[k] = (k as f64 * PI * p.y).sin();
            }
            let w = rule.weights[q];
            for (a, m) in acc.iter_mut().zip(modes) {
                *a += w * sx[m.k1 as usize] * sy[m.k2 as usize];
            }
        }
        let row = &mut out[t * n_modes..(t + 1) * n_modes];
        for j in 0..n_modes {
            row[j] = area * weights[j] * acc[j];
        }
    }
    out
}

/// Everything needed to solve for any realization on one mesh level.
#[derive(Debug, Clone)]
pub struct AssembledProblem {
    pub mesh: TriMesh,
    pub dofs: DofMap,
    layout: StiffnessLayout,
    areas: Vec<f64>,
    phi0: f64,
    n_modes: usize,
    mode_integrals: Vec<f64>,
    pub load: DenseVector,
    pub qoi: DenseVector,
}

impl AssembledProblem {
    /// `load_nodal` and `qoi_nodal` are indexed by vertex; they are
    /// restricted to interior dofs here.
    pub fn new(
        mesh: TriMesh,
        expansion: &CoefficientExpansion,
        n_modes: usize,
        load_nodal: &[f64],
        qoi_nodal: &[f64],
        rule: &TriangleRule,
    ) -> Result<Self> {
        if n_modes > expansion.n_modes() {
            return Err(Error::Dimension(format!(
                "{n_modes} modes requested, expansion stores {}",
                expansion.n_modes()
            )));
        }
        if load_nodal.len() != mesh.n_vertices() || qoi_nodal.len() != mesh.n_vertices() {
            return Err(Error::Dimension(
                "nodal vectors must match the vertex count".into(),
            ));
        }
        let dofs = DofMap::new(&mesh);
        let layout = StiffnessLayout::new(&mesh, &dofs)?;
        let areas = (0..mesh.n_triangles()).map(|t| mesh.area(t)).collect();
        let mode_integrals = mode_integrals(&mesh, expansion, n_modes, rule);
        let load = dofs.restrict(load_nodal);
        let qoi = dofs.restrict(qoi_nodal);
        Ok(Self {
            mesh,
            dofs,
            layout,
            areas,
            phi0: expansion.phi0,
            n_modes,
            mode_integrals,
            load,
            qoi,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn layout(&self) -> &StiffnessLayout {
        &self.layout
    }

    /// The constant-part matrix `A0` for `φ₀`.
    pub fn constant_matrix(&self) -> CsrMatrix {
        let c: Vec<f64> = self.areas.iter().map(|a| self.phi0 * a).collect();
        self.layout.scatter(&c)
    }

    /// Matrix of mode `j` (0-based), weight included.
    pub fn mode_matrix(&self, j: usize) -> Result<CsrMatrix> {
        if j >= self.n_modes {
            return Err(Error::Dimension(format!("mode {j} not assembled")));
        }
        let c: Vec<f64> = (0..self.areas.len())
            .map(|t| self.mode_integrals[t * self.n_modes + j])
            .collect();
        Ok(self.layout.scatter(&c))
    }

    /// `∫_T A^s(·, ω)` for every triangle.
    pub fn element_coefficients(&self, omega: &ParamVector, s: usize) -> Result<Vec<f64>> {
        if s > self.n_modes || s > omega.len() {
            return Err(Error::Dimension(format!(
                "truncation {s} exceeds assembled modes {} or parameter length {}",
                self.n_modes,
                omega.len()
            )));
        }
        let w = &omega.as_slice()[..s];
        Ok(self
            .areas
            .iter()
            .enumerate()
            .map(|(t, &area)| {
                let row = &self.mode_integrals[t * self.n_modes..t * self.n_modes + s];
                let mut c = self.phi0 * area;
                for (wj, ij) in w.iter().zip(row) {
                    c += wj * ij;
                }
                c
            })
            .collect())
    }

    /// `A0 + Σ_{j<s} ω_j A_j` written into `out` (same pattern).
    pub fn combine_into(&self, omega: &ParamVector, s: usize, out: &mut CsrMatrix) -> Result<()> {
        let c = self.element_coefficients(omega, s)?;
        self.layout.scatter_into(&c, out);
        Ok(())
    }

    pub fn combine(&self, omega: &ParamVector, s: usize) -> Result<CsrMatrix> {
        let c = self.element_coefficients(omega, s)?;
        Ok(self.layout.scatter(&c))
    }

    /// `G(u_h) = qoi · x`.
    pub fn functional(&self, x: &[f64]) -> f64 {
        crate::sparse::dot(&self.qoi, x)
    }
}

pub fn combine(problem: &AssembledProblem, omega: &ParamVector, s: usize) -> Result<CsrMatrix> {
    problem.combine(omega, s)
}

/// Nodal load `√2 ∫₀¹ t v_i(t, 1 − t) dt` of the weighted line functional on
/// the anti-diagonal of the unit square.
pub fn load_diagonal_nodal(mesh: &TriMesh) -> Result<Vec<f64>> {
    let start = Point2::new(0.0, 1.0);
    let end = Point2::new(1.0, 0.0);
    let at = |t: f64| Point2::new(t, 1.0 - t);

    // parameter interval of Γ inside each triangle
    let mut pieces: Vec<(f64, f64, usize)> = Vec::new();
    for t in 0..mesh.n_triangles() {
        let tri = mesh.corners(t);
        let l0 = barycentric(tri, start);
        let l1 = barycentric(tri, end);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for k in 0..3 {
            let (a, slope) = (l0[k], l1[k] - l0[k]);
            // a + slope t ≥ 0
            if slope.abs() < 1e-15 {
                if a < -1e-12 {
                    hi = -1.0;
                }
            } else if slope > 0.0 {
                lo = lo.max(-a / slope);
            } else {
                hi = hi.min(-a / slope);
            }
        }
        if hi - lo > 1e-13 {
            pieces.push((lo, hi, t));
        }
    }
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut breaks: Vec<f64> = pieces.iter().flat_map(|p| [p.0, p.1]).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if breaks.first().is_none_or(|&b| b > 1e-12) || breaks.last().is_none_or(|&b| b < 1.0 - 1e-12) {
        return Err(Error::Geometry("mesh does not cover the diagonal".into()));
    }

    let gauss = gauss_legendre_unit(2);
    let mut nodal = vec![0.0; mesh.n_vertices()];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        // last piece starting at or before `mid`, then scan back for one covering it
        let first_after = pieces.partition_point(|p| p.0 <= mid);
        let piece = pieces[..first_after]
            .iter()
            .rev()
            .find(|p| p.1 >= mid)
            .ok_or_else(|| Error::Geometry(format!("diagonal not covered near t = {mid}")))?;
        let tri_idx = piece.2;
        let tri = mesh.corners(tri_idx);
        let verts = mesh.triangles[tri_idx];
        for &(g, gw) in &gauss {
            let t = a + (b - a) * g;
            let lam = barycentric(tri, at(t));
            let weight = 2f64.sqrt() * t * gw * (b - a);
            for k in 0..3 {
                nodal[verts[k]] += weight * lam[k];
            }
        }
    }
    Ok(nodal)
}

/// Nodal load `∫_D v_i` for `f = 1`.
pub fn load_constant_nodal(mesh: &TriMesh) -> Vec<f64> {
    let mut nodal = vec![0.0; mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let third = mesh.area(t) / 3.0;
        for &v in &mesh.triangles[t] {
            nodal[v] += third;
        }
    }
    nodal
}

/// Nodal load `∫_D f v_i` by element quadrature.
pub fn load_function_nodal(
    mesh: &TriMesh,
    f: impl Fn(Point2) -> f64,
    rule: &TriangleRule,
) -> Vec<f64> {
    let mut nodal = vec![0.0; mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let tri = mesh.corners(t);
        let area = mesh.area(t);
        for q in 0..rule.len() {
            let fq = rule.weights[q] * area * f(rule.map(tri, q));
            for k in 0..3 {
                nodal[mesh.triangles[t][k]] += fq * rule.points[q][k];
            }
        }
    }
    nodal
}

fn clip_polygon(poly: &[Point2], inside: impl Fn(Point2) -> f64) -> Vec<Point2> {
    // Sutherland–Hodgman against the half-plane inside(p) ≥ 0 (inside is affine)
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (fp, fq) = (inside(p), inside(q));
        if fp >= 0.0 {
            out.push(p);
        }
        if (fp >= 0.0) != (fq >= 0.0) {
            let s = fp / (fp - fq);
            out.push(Point2::new(p.x + s * (q.x - p.x), p.y + s * (q.y - p.y)));
        }
    }
    out
}

/// Nodal quantity-of-interest vector `∫_{box ∩ D} v_i`, exact: each triangle
/// is clipped against the box and the linear hats are integrated over a fan
/// of the clip polygon with the centroid rule.
pub fn qoi_box_nodal(mesh: &TriMesh, region: &BoxRegion) -> Vec<f64> {
    let mut nodal = vec![0.0; mesh.n_vertices()];
    if region.area() <= 0.0 {
        return nodal;
    }
    for t in 0..mesh.n_triangles() {
        let tri = mesh.corners(t);
        let mut poly = tri.to_vec();
        poly = clip_polygon(&poly, |p| p.x - region.x0);
        poly = clip_polygon(&poly, |p| region.x1 - p.x);
        poly = clip_polygon(&poly, |p| p.y - region.y0);
        poly = clip_polygon(&poly, |p| region.y1 - p.y);
        if poly.len() < 3 {
            continue;
        }
        for k in 1..poly.len() - 1 {
            let sub = [poly[0], poly[k], poly[k + 1]];
            let area = signed_area(sub).abs();
            if area == 0.0 {
                continue;
            }
            let c = Point2::new(
                (sub[0].x + sub[1].x + sub[2].x) / 3.0,
                (sub[0].y + sub[1].y + sub[2].y) / 3.0,
            );
            let lam = barycentric(tri, c);
            for v in 0..3 {
                nodal[mesh.triangles[t][v]] += area * lam[v];
            }
        }
    }
    nodal
}

pub fn assemble_load_diagonal(mesh: &TriMesh) -> Result<DenseVector> {
    Ok(DofMap::new(mesh).restrict(&load_diagonal_nodal(mesh)?))
}

pub fn assemble_load_constant(mesh: &TriMesh) -> DenseVector {
    DofMap::new(mesh).restrict(&load_constant_nodal(mesh))
}

pub fn assemble_qoi(mesh: &TriMesh, region: &BoxRegion) -> DenseVector {
    DofMap::new(mesh).restrict(&qoi_box_nodal(mesh, region))
}

/// P1 interpolation of a coarse nodal field at the vertices of a nested
/// finer mesh.
pub fn prolongate(coarse: &TriMesh, coarse_nodal: &[f64], fine: &TriMesh) -> Result<Vec<f64>> {
    let locator = PointLocator::new(coarse);
    fine.vertices
        .iter()
        .map(|&p| {
            let t = locator.locate(p).ok_or_else(|| {
                Error::Geometry(format!(
                    "fine vertex ({}, {}) outside coarse mesh",
                    p.x, p.y
                ))
            })?;
            let lam = barycentric(coarse.corners(t), p);
            let tri = coarse.triangles[t];
            Ok((0..3).map(|k| lam[k] * coarse_nodal[tri[k]]).sum())
        })
        .collect()
}

/// `(‖u − u_h‖_{L²}, |u − u_h|_{H¹})` for a nodal P1 field.
pub fn error_norms(
    mesh: &TriMesh,
    uh_nodal: &[f64],
    u: impl Fn(Point2) -> f64,
    grad_u: impl Fn(Point2) -> [f64; 2],
    rule: &TriangleRule,
) -> (f64, f64) {
    let (mut l2, mut h1) = (0.0, 0.0);
    for t in 0..mesh.n_triangles() {
        let tri = mesh.corners(t);
        let area = signed_area(tri);
        let g = hat_gradients(tri, area);
        let vals = mesh.triangles[t].map(|v| uh_nodal[v]);
        let grad_h = [
            vals[0] * g[0][0] + vals[1] * g[1][0] + vals[2] * g[2][0],
            vals[0] * g[0][1] + vals[1] * g[1][1] + vals[2] * g[2][1],
        ];
        for q in 0..rule.len() {
            let p = rule.map(tri, q);
            let lam = rule.points[q];
            let uh = lam[0] * vals[0] + lam[1] * vals[1] + lam[2] * vals[2];
            let gu = grad_u(p);
            let w = rule.weights[q] * area;
            l2 += w * (u(p) - uh).powi(2);
            h1 += w * ((gu[0] - grad_h[0]).powi(2) + (gu[1] - grad_h[1]).powi(2));
        }
    }
    (l2.sqrt(), h1.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{
        graded_lshape_mesh, lshape_initial_mesh, uniform_square_mesh, GradingParams,
    };

    /// Dense P1 stiffness over all vertices, assembled entry by entry.
    fn dense_laplacian(mesh: &TriMesh) -> Vec<Vec<f64>> {
        let n = mesh.n_vertices();
        let mut k = vec![vec![0.0; n]; n];
        for t in 0..mesh.n_triangles() {
            let tri = mesh.corners(t);
            let area = signed_area(tri);
            let g = hat_gradients(tri, area);
            for a in 0..3 {
                for b in 0..3 {
                    k[mesh.triangles[t][a]][mesh.triangles[t][b]] +=
                        area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
        }
        k
    }

    #[test]
    fn constant_mode_is_scaled_laplacian() {
        let mesh = uniform_square_mesh(1).unwrap();
        let e = CoefficientExpansion::new(0.5, 4);
        let a = assemble_mode_matrix(&mesh, &e, ModeSpec::Constant(0.5), &TriangleRule::degree5())
            .unwrap();
        let dense = dense_laplacian(&mesh);
        let dofs = DofMap::new(&mesh);
        for i in 0..dofs.n_dofs() {
            for j in 0..dofs.n_dofs() {
                let want = 0.5 * dense[dofs.vertex(i)][dofs.vertex(j)];
                assert!((a.get(i, j) - want).abs() <= 1e-12);
            }
        }
        // level 1 has one interior node of valence 6: the 5-point stencil value 4
        assert_eq!(a.n(), 1);
        assert!((a.get(0, 0) - 0.5 * 4.0).abs() < 1e-14);
        // full-vertex rows of the unit Laplacian sum to zero
        for row in &dense {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn stiffness_is_exactly_symmetric() {
        let mesh = graded_lshape_mesh(2, &GradingParams::default()).unwrap();
        let e = CoefficientExpansion::new(0.5, 6);
        let p = AssembledProblem::new(
            mesh.clone(),
            &e,
            6,
            &load_constant_nodal(&mesh),
            &qoi_box_nodal(&mesh, &BoxRegion::new(0.0, 0.5, 0.0, 0.5)),
            &TriangleRule::degree5(),
        )
        .unwrap();
        let omega = ParamVector::new(vec![0.3, -0.2, 0.45, -0.5, 0.1, 0.0]).unwrap();
        let m = p.combine(&omega, 6).unwrap();
        assert!(m.asymmetry() <= 1e-14 * m.max_abs());
        for j in 0..6 {
            let mj = p.mode_matrix(j).unwrap();
            assert!(mj.same_pattern(&m));
            assert!(mj.asymmetry() <= 1e-14 * mj.max_abs());
        }
    }

    #[test]
    fn mode_matrix_matches_high_order_reference() {
        let mesh = uniform_square_mesh(2).unwrap();
        let e = CoefficientExpansion::new(0.5, 1);
        let base =
            assemble_mode_matrix(&mesh, &e, ModeSpec::Mode(0), &TriangleRule::with_degree(9))
                .unwrap();
        let raised =
            assemble_mode_matrix(&mesh, &e, ModeSpec::Mode(0), &TriangleRule::with_degree(13))
                .unwrap();
        let diff = base.add_scaled(-1.0, &raised).unwrap().frobenius_norm();
        assert!(
            diff <= 1e-10 * raised.frobenius_norm(),
            "relative {}",
            diff / raised.frobenius_norm()
        );
    }

    #[test]
    fn combine_matches_direct_assembly() {
        let mesh = uniform_square_mesh(3).unwrap();
        let e = CoefficientExpansion::new(0.5, 3);
        let rule = TriangleRule::degree5();
        let nodal = vec![0.0; mesh.n_vertices()];
        let p = AssembledProblem::new(mesh.clone(), &e, 3, &nodal, &nodal, &rule).unwrap();
        let omega = ParamVector::new(vec![0.41, -0.37, 0.22]).unwrap();
        let combined = p.combine(&omega, 3).unwrap();
        let direct =
            assemble_stiffness(&mesh, |x| e.evaluate(&omega, 3, x).unwrap(), &rule).unwrap();
        let x: Vec<f64> = (0..p.n_dofs())
            .map(|i| ((i * 7919) % 13) as f64 - 6.0)
            .collect();
        let (y1, y2) = (combined.matvec(&x), direct.matvec(&x));
        let num: f64 = y1
            .iter()
            .zip(&y2)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = y2.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(num <= 1e-10 * den);
        assert_eq!(
            p.combine(&ParamVector::zeros(3), 3).unwrap(),
            p.constant_matrix()
        );
        assert_eq!(p.combine(&omega, 0).unwrap(), p.constant_matrix());
        assert!(matches!(p.combine(&omega, 4), Err(Error::Dimension(_))));
    }

    #[test]
    fn diagonal_load_partition_of_unity() {
        for level in 0..5 {
            let mesh = uniform_square_mesh(level).unwrap();
            let nodal = load_diagonal_nodal(&mesh).unwrap();
            let total: f64 = nodal.iter().sum();
            assert!(
                (total - 2f64.sqrt() / 2.0).abs() < 1e-14,
                "level {level}: {total}"
            );
        }
        // level 0: only the diagonal endpoints carry load
        let mesh = uniform_square_mesh(0).unwrap();
        let nodal = load_diagonal_nodal(&mesh).unwrap();
        for (v, p) in mesh.vertices.iter().enumerate() {
            let on_gamma = (p.x + p.y - 1.0).abs() < 1e-14;
            assert_eq!(nodal[v] != 0.0, on_gamma);
        }
        assert!(assemble_load_diagonal(&mesh).unwrap().is_empty());
    }

    #[test]
    fn diagonal_load_matches_midpoint_oracle() {
        let mesh = uniform_square_mesh(3).unwrap();
        let nodal = load_diagonal_nodal(&mesh).unwrap();
        let locator = PointLocator::new(&mesh);
        let n = 100_000;
        let mut oracle = vec![0.0; mesh.n_vertices()];
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64;
            let p = Point2::new(t, 1.0 - t);
            let tri = locator.locate(p).unwrap();
            let lam = barycentric(mesh.corners(tri), p);
            for k in 0..3 {
                oracle[mesh.triangles[tri][k]] += 2f64.sqrt() * t * lam[k] / n as f64;
            }
        }
        let worst = nodal
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-10, "max abs diff {worst}");
    }

    #[test]
    fn diagonal_load_needs_coverage() {
        let mesh = lshape_initial_mesh();
        // the anti-diagonal of the unit square passes through the L-shape only partly
        let mut shifted = mesh.clone();
        for p in &mut shifted.vertices {
            p.x += 5.0;
        }
        assert!(matches!(
            load_diagonal_nodal(&shifted),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn constant_load_examples() {
        let lshape = graded_lshape_mesh(3, &GradingParams::default()).unwrap();
        assert!((load_constant_nodal(&lshape).iter().sum::<f64>() - 3.0).abs() < 1e-13);
        let single = TriMesh {
            vertices: vec![
                Point2::new(0.0, 0.0),
                Point2::new(2.0, 0.0),
                Point2::new(0.0, 3.0),
            ],
            triangles: vec![[0, 1, 2]],
            boundary_vertex: vec![true; 3],
            refinement_edge: vec![0],
            level: 0,
        };
        assert_eq!(load_constant_nodal(&single), vec![1.0; 3]);
        let m1 = uniform_square_mesh(1).unwrap();
        let load = assemble_load_constant(&m1);
        // the centre node touches six triangles of area 1/8
        assert!((load[0] - 6.0 * 0.125 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn qoi_examples() {
        let mesh = uniform_square_mesh(3).unwrap();
        let whole = qoi_box_nodal(&mesh, &BoxRegion::new(0.0, 1.0, 0.0, 1.0));
        let load = load_constant_nodal(&mesh);
        for (a, b) in whole.iter().zip(&load) {
            assert!((a - b).abs() < 1e-15);
        }
        let quarter = qoi_box_nodal(&mesh, &BoxRegion::new(0.5, 1.0, 0.5, 1.0));
        assert!((quarter.iter().sum::<f64>() - 0.25).abs() < 1e-14);
        let empty = qoi_box_nodal(&mesh, &BoxRegion::new(0.3, 0.3, 0.0, 1.0));
        assert!(empty.iter().all(|&v| v == 0.0));
        // a box not aligned with the mesh
        let odd = qoi_box_nodal(&mesh, &BoxRegion::new(0.13, 0.71, 0.05, 0.333));
        assert!((odd.iter().sum::<f64>() - 0.58 * 0.283).abs() < 1e-14);
        let lshape = graded_lshape_mesh(2, &GradingParams::default()).unwrap();
        let clipped = qoi_box_nodal(&lshape, &BoxRegion::new(-1.0, 1.0, -1.0, 1.0));
        assert!((clipped.iter().sum::<f64>() - 3.0).abs() < 1e-13);
    }

    #[test]
    fn prolongation_reproduces_linear_functions() {
        let coarse = uniform_square_mesh(2).unwrap();
        let fine = uniform_square_mesh(4).unwrap();
        let f = |p: Point2| 1.0 + 2.0 * p.x - 3.0 * p.y;
        let c: Vec<f64> = coarse.vertices.iter().map(|&p| f(p)).collect();
        let fine_vals = prolongate(&coarse, &c, &fine).unwrap();
        for (v, &p) in fine.vertices.iter().enumerate() {
            assert!((fine_vals[v] - f(p)).abs() < 1e-13);
        }
    }
}
