use std::sync::OnceLock;

use crate::mesh::Point2;

/// Quadrature on triangles in barycentric form. Weights sum to one and are
/// scaled by the element area on use.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Symmetric six-point rule, exact for polynomials of degree 4.
    pub fn degree4() -> &'static QuadratureRule {
        static RULE: OnceLock<QuadratureRule> = OnceLock::new();
        RULE.get_or_init(|| {
            let s10 = 10f64.sqrt();
            let r = (38.0 - 44.0 * (0.4f64).sqrt()).sqrt();
            let a = (8.0 - s10 + r) / 18.0;
            let b = (8.0 - s10 - r) / 18.0;
            let q = (213125.0 - 53320.0 * s10).sqrt();
            let wa = (620.0 + q) / 3720.0;
            let wb = (620.0 - q) / 3720.0;
            let mut points = Vec::with_capacity(6);
            let mut weights = Vec::with_capacity(6);
            for (c, w) in [(a, wa), (b, wb)] {
                let d = 1.0 - 2.0 * c;
                for p in [[d, c, c], [c, d, c], [c, c, d]] {
                    points.push(p);
                    weights.push(w);
                }
            }
            QuadratureRule {
                points,
                weights,
                degree: 4,
            }
        })
    }

    /// Collapsed tensor Gauss rule with `n * n` points, exact to degree
    /// `2n - 2`.
    pub fn collapsed_gauss(n: usize) -> QuadratureRule {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let u = x[i];
                let v = (1.0 - u) * x[j];
                points.push([1.0 - u - v, u, v]);
                weights.push(2.0 * w[i] * w[j] * (1.0 - u));
            }
        }
        QuadratureRule {
            points,
            weights,
            degree: 2 * n - 2,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical coordinates of the quadrature points on `tri`.
    pub fn map(&self, tri: &[Point2; 3]) -> impl Iterator<Item = (Point2, [f64; 3], f64)> + '_ {
        let tri = *tri;
        self.points.iter().zip(&self.weights).map(move |(l, &w)| {
            let p = Point2::new(
                l[0] * tri[0].x + l[1] * tri[1].x + l[2] * tri[2].x,
                l[0] * tri[0].y + l[1] * tri[1].y + l[2] * tri[2].y,
            );
            (p, *l, w)
        })
    }

    /// ∫_tri f dx.
    pub fn integrate(&self, tri: &[Point2; 3], mut f: impl FnMut(Point2) -> f64) -> f64 {
        let area = 0.5 * crate::mesh::orient(tri[0], tri[1], tri[2]);
        area * self.map(tri).map(|(p, _, w)| w * f(p)).sum::<f64>()
    }
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration on P_n from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> [Point2; 3] {
        [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ]
    }

    // ∫_ref x^a y^b = a! b! / (a + b + 2)!
    fn monomial(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn degree4_rule_properties() {
        let rule = QuadratureRule::degree4();
        assert_eq!(rule.len(), 6);
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for p in &rule.points {
            assert!(p.iter().all(|&l| l > 0.0 && l < 1.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        let v = rule.integrate(&reference(), |p| p.x * p.x * p.y * p.y);
        assert!((v - 1.0 / 180.0).abs() < 1e-14);
        for a in 0..=4 {
            for b in 0..=(4 - a) {
                let v = rule.integrate(&reference(), |p| p.x.powi(a as i32) * p.y.powi(b as i32));
                assert!((v - monomial(a, b)).abs() < 1e-15, "x^{a} y^{b}");
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..=24 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for k in 0..(2 * n) {
                let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn collapsed_rule_exactness() {
        let rule = QuadratureRule::collapsed_gauss(6);
        for a in 0..=10u32 {
            for b in 0..=(10 - a) {
                let v = rule.integrate(&reference(), |p| p.x.powi(a as i32) * p.y.powi(b as i32));
                assert!((v - monomial(a, b)).abs() < 1e-15);
            }
        }
    }
}
