//! Quadrature on triangles and intervals.

use crate::mesh::Point2;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Newton iteration on P_n from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// A rule in barycentric coordinates; weights sum to one and are scaled by
/// the triangle area when applied.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// The 7-point rule exact for polynomials of degree 5.
    pub fn degree5() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        let mut points = vec![[1.0 / 3.0; 3]];
        let mut weights = vec![9.0 / 40.0];
        for (a, w) in [(a1, w1), (a2, w2)] {
            let b = 1.0 - 2.0 * a;
            points.extend([[a, a, b], [a, b, a], [b, a, a]]);
            weights.extend([w; 3]);
        }
        Self {
            points,
            weights,
            degree: 5,
        }
    }

    /// Collapsed (Duffy) tensor Gauss–Legendre rule with `n × n` points,
    /// exact for polynomials of degree `2n − 2`.
    pub fn collapsed_gauss(n: usize) -> Self {
        let gl = gauss_legendre_unit(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for &(u, wu) in &gl {
            for &(v, wv) in &gl {
                let l1 = u;
                let l2 = v * (1.0 - u);
                points.push([1.0 - l1 - l2, l1, l2]);
                weights.push(2.0 * wu * wv * (1.0 - u));
            }
        }
        Self {
            points,
            weights,
            degree: 2 * n - 2,
        }
    }

    /// Cheapest available rule exact to at least `degree`.
    pub fn with_degree(degree: usize) -> Self {
        if degree <= 5 {
            Self::degree5()
        } else {
            Self::collapsed_gauss((degree + 3) / 2)
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn map(&self, tri: [Point2; 3], k: usize) -> Point2 {
        let l = self.points[k];
        Point2::new(
            l[0] * tri[0].x + l[1] * tri[1].x + l[2] * tri[2].x,
            l[0] * tri[0].y + l[1] * tri[1].y + l[2] * tri[2].y,
        )
    }

    pub fn integrate(&self, tri: [Point2; 3], f: impl Fn(Point2) -> f64) -> f64 {
        let area = crate::mesh::signed_area(tri).abs();
        let mut s = 0.0;
        for k in 0..self.len() {
            s += self.weights[k] * f(self.map(tri, k));
        }
        area * s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_exact(p: u32, q: u32) -> f64 {
        // ∫ over the unit right triangle of x^p y^q = p! q! / (p + q + 2)!
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        fact(p) * fact(q) / fact(p + q + 2)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..8 {
            let rule = gauss_legendre_unit(n);
            assert!((rule.iter().map(|r| r.1).sum::<f64>() - 1.0).abs() < 1e-14);
            for d in 0..2 * n {
                let s: f64 = rule.iter().map(|&(x, w)| w * x.powi(d as i32)).sum();
                assert!((s - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn triangle_rules_are_exact_to_their_degree() {
        let tri = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        for rule in [
            TriangleRule::degree5(),
            TriangleRule::collapsed_gauss(4),
            TriangleRule::with_degree(9),
        ] {
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for p in 0..=rule.degree as u32 {
                for q in 0..=(rule.degree as u32 - p) {
                    let got = rule.integrate(tri, |x| x.x.powi(p as i32) * x.y.powi(q as i32));
                    assert!(
                        (got - monomial_exact(p, q)).abs() < 1e-14,
                        "deg {} p={p} q={q}",
                        rule.degree
                    );
                }
            }
        }
    }
}
