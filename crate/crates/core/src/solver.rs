//! Jacobi-preconditioned conjugate gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix};

/// Iteration limits and the relative residual target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol_base: f64,
    pub tol_floor: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_base: 1e-10,
            tol_floor: 1e-14,
            max_iter: 20_000,
        }
    }
}

impl SolverSettings {
    /// `tol_base · 4^{−level}`, clamped below at `tol_floor`.
    pub fn tolerance(&self, level: usize) -> f64 {
        (self.tol_base * 0.25f64.powi(level.min(1000) as i32)).max(self.tol_floor)
    }
}

pub fn default_tolerance(level: usize) -> f64 {
    SolverSettings::default().tolerance(level)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖b − Ax‖₂ / ‖b‖₂`, recomputed from `x`.
    pub relative_residual: f64,
    /// The requested tolerance was below the rounding floor and the floor
    /// was used instead.
    pub floor_limited: bool,
}

pub fn solve(matrix: &CsrMatrix, rhs: &[f64], tol: f64, max_iter: usize) -> Result<Solution> {
    solve_with_guess(matrix, rhs, None, tol, max_iter)
}

/// PCG from an optional initial iterate.
///
/// Convergence is judged on the true residual, evaluated with compensated
/// row sums. When the recursive residual has converged but the true one has
/// not, the iteration restarts from the current iterate. A target below what
/// an `f64` iterate can represent is replaced by the rounding floor
/// `ROUNDING_FLOOR · ε · ‖ |A||x| + |b| ‖₂`; [`Solution::floor_limited`]
/// records when that happened.
pub fn solve_with_guess(
    matrix: &CsrMatrix,
    rhs: &[f64],
    guess: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<Solution> {
    let n = matrix.n();
    if rhs.len() != n || guess.is_some_and(|g| g.len() != n) {
        return Err(Error::Dimension(format!(
            "system of size {n}, right-hand side {}",
            rhs.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!(
            "solver tolerance must be positive, got {tol}"
        )));
    }
    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            floor_limited: false,
        });
    }
    let target = tol * b_norm;
    let inv_diag: Vec<f64> = matrix
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = guess.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    let accept = |x: Vec<f64>, res: f64, iterations: usize, floor: f64| {
        Ok(Solution {
            x,
            iterations,
            relative_residual: res / b_norm,
            floor_limited: res > target && res <= floor,
        })
    };

    compensated_residual(matrix, &x, rhs, &mut r);
    let mut res = norm2(&r);
    history.push(res / b_norm);
    for _restart in 0..MAX_RESTARTS {
        let floor = rounding_floor(matrix, &x, rhs);
        if res <= target.max(floor) {
            return accept(x, res, iterations, floor);
        }
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        let mut rec = res;
        while rec > target.max(floor) && iterations < max_iter {
            matrix.matvec_into(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                break;
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            rec = norm2(&r);
            iterations += 1;
            history.push(rec / b_norm);
        }
        compensated_residual(matrix, &x, rhs, &mut r);
        res = norm2(&r);
        if iterations >= max_iter {
            let floor = rounding_floor(matrix, &x, rhs);
            if res <= target.max(floor) {
                return accept(x, res, iterations, floor);
            }
            break;
        }
    }
    Err(Error::Convergence {
        iterations,
        residual_history: history,
    })
}

const MAX_RESTARTS: usize = 20;

/// Multiple of the unit roundoff in the attainable-residual estimate.
pub const ROUNDING_FLOOR: f64 = 1.0;

/// `ROUNDING_FLOOR · ε · ‖ |A||x| + |b| ‖₂`: below this the residual of an
/// `f64` vector is dominated by the representation error of `x` itself.
pub fn rounding_floor(matrix: &CsrMatrix, x: &[f64], rhs: &[f64]) -> f64 {
    let (row_ptr, col_idx) = (matrix.row_ptr(), matrix.col_idx());
    let mut acc = 0.0;
    for i in 0..matrix.n() {
        let mut s = rhs[i].abs();
        for k in row_ptr[i]..row_ptr[i + 1] {
            s += (matrix.values[k] * x[col_idx[k]]).abs();
        }
        acc += s * s;
    }
    ROUNDING_FLOOR * f64::EPSILON * acc.sqrt()
}

/// `r = b − A x` with every row accumulated in error-free transformed
/// arithmetic, so the computed residual is accurate to a few ulps of itself
/// rather than of `|A||x|`.
pub fn compensated_residual(matrix: &CsrMatrix, x: &[f64], rhs: &[f64], r: &mut [f64]) {
    let (row_ptr, col_idx) = (matrix.row_ptr(), matrix.col_idx());
    for i in 0..matrix.n() {
        let (mut s, mut c) = (rhs[i], 0.0);
        for k in row_ptr[i]..row_ptr[i + 1] {
            let p = -matrix.values[k] * x[col_idx[k]];
            let p_err = (-matrix.values[k]).mul_add(x[col_idx[k]], -p);
            let t = s + p;
            let z = t - s;
            c += (s - (t - z)) + (p - z) + p_err;
            s = t;
        }
        r[i] = s + c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn tolerance_examples() {
        assert_eq!(default_tolerance(0), 1e-10);
        assert!((default_tolerance(2) - 6.25e-12).abs() < 1e-26);
        assert_eq!(default_tolerance(10), 1e-14);
        assert_eq!(default_tolerance(usize::MAX), 1e-14);
    }

    #[test]
    fn zero_rhs_and_identity() {
        let a = laplacian_1d(5);
        let s = solve(&a, &[0.0; 5], 1e-12, 10).unwrap();
        assert_eq!((s.x, s.iterations), (vec![0.0; 5], 0));
        let b = [1.0, -2.0, 3.0];
        let s = solve(&CsrMatrix::identity(3), &b, 1e-14, 10).unwrap();
        assert!(s.iterations <= 1);
        assert_eq!(s.x, b.to_vec());
    }

    #[test]
    fn residual_contract_and_warm_start() {
        let a = laplacian_1d(200);
        let b: Vec<f64> = (0..200).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let cold = solve(&a, &b, 1e-12, 1000).unwrap();
        let r: Vec<f64> = a
            .matvec(&cold.x)
            .iter()
            .zip(&b)
            .map(|(ax, bi)| bi - ax)
            .collect();
        assert!(norm2(&r) <= 1e-12 * norm2(&b));
        let warm = solve_with_guess(&a, &b, Some(&cold.x), 1e-12, 1000).unwrap();
        assert_eq!(warm.iterations, 0);
    }

    #[test]
    fn iteration_cap_reports_history() {
        let a = laplacian_1d(100);
        let b = vec![1.0; 100];
        match solve(&a, &b, 1e-14, 3) {
            Err(Error::Convergence {
                iterations,
                residual_history,
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(residual_history.len(), 4);
            }
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            solve(&CsrMatrix::identity(3), &[1.0], 1e-10, 10),
            Err(Error::Dimension(_))
        ));
    }
}
