use std::sync::OnceLock;

use crate::error::Result;
use crate::fem::{checked_potential, gauss_legendre, Potential, QuadratureRule};
use crate::mesh::{barycentric, orient, Point2};

fn collapsed8() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| QuadratureRule::collapsed_gauss(8))
}

fn diameter(tri: &[Point2; 3]) -> f64 {
    tri[0].dist(tri[1]).max(tri[1].dist(tri[2])).max(tri[2].dist(tri[0]))
}

/// Distance from `p` to the closed triangle.
fn distance_to_triangle(tri: &[Point2; 3], p: Point2) -> f64 {
    if barycentric(tri, p).iter().all(|&l| l >= 0.0) {
        return 0.0;
    }
    (0..3)
        .map(|k| {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let ab = b.sub(a);
            let t = ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / (ab.x * ab.x + ab.y * ab.y);
            let t = t.clamp(0.0, 1.0);
            p.dist(Point2::new(a.x + t * ab.x, a.y + t * ab.y))
        })
        .fold(f64::INFINITY, f64::min)
}

/// V(x) = 1 / (2|x|), singular at the origin.
#[derive(Clone, Copy, Debug, Default)]
pub struct CoulombPotential;

impl CoulombPotential {
    /// Gauss points along the edges in the singular integration.
    const EDGE_POINTS: usize = 32;

    fn far_matrix(&self, tri: &[Point2; 3]) -> Result<[[f64; 3]; 3]> {
        let origin = Point2::new(0.0, 0.0);
        let mut m = [[0.0; 3]; 3];
        let mut stack = vec![*tri];
        while let Some(piece) = stack.pop() {
            if distance_to_triangle(&piece, origin) < 16.0 * diameter(&piece) {
                let [a, b, c] = piece;
                let (ab, bc, ca) = (a.midpoint(b), b.midpoint(c), c.midpoint(a));
                stack.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [bc, ca, ab]]);
                continue;
            }
            let area = 0.5 * orient(piece[0], piece[1], piece[2]);
            for (p, _, w) in collapsed8().map(&piece) {
                let v = self.value(p) * w * area;
                let l = barycentric(tri, p);
                for a in 0..3 {
                    for b in 0..3 {
                        m[a][b] += v * l[a] * l[b];
                    }
                }
            }
        }
        Ok(m)
    }
}

impl Potential for CoulombPotential {
    fn value(&self, p: Point2) -> f64 {
        0.5 / p.norm()
    }

    /// Away from the origin the element is split until each piece is far
    /// from the singularity relative to its size. Near it the triangle is written as a signed sum of triangles with apex at the
    /// origin; in polar-like coordinates from the apex the 1/|x| factor
    /// cancels against the Jacobian and the remaining integrand is smooth.
    fn element_matrix(&self, tri: &[Point2; 3]) -> Result<[[f64; 3]; 3]> {
        let origin = Point2::new(0.0, 0.0);
        if distance_to_triangle(tri, origin) >= 2.0 * diameter(tri) {
            return self.far_matrix(tri);
        }
        static EDGE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
        let (tx, tw) = EDGE.get_or_init(|| gauss_legendre(Self::EDGE_POINTS));
        let (sx, sw) = (
            [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()],
            [0.5, 0.5],
        );
        let mut m = [[0.0; 3]; 3];
        for k in 0..3 {
            let (p, q) = (tri[k], tri[(k + 1) % 3]);
            let area = 0.5 * p.cross(q);
            if area == 0.0 {
                continue;
            }
            // t = t* + (d/L) sinh u turns dt/|e(t)| into du/L, where t* is
            // the foot of the origin on the edge line and d its distance
            let pq = q.sub(p);
            let len = pq.norm();
            let foot = -(p.x * pq.x + p.y * pq.y) / (len * len);
            let d = (2.0 * area).abs() / len;
            let (u0, u1) = ((-foot * len / d).asinh(), ((1.0 - foot) * len / d).asinh());
            for (&x, &wx) in tx.iter().zip(tw) {
                let u = u0 + x * (u1 - u0);
                let t = foot + d / len * u.sinh();
                let e = Point2::new(p.x + t * pq.x, p.y + t * pq.y);
                let scale = wx * (u1 - u0) / len * area;
                for (&s, &ws) in sx.iter().zip(&sw) {
                    let l = barycentric(tri, Point2::new(s * e.x, s * e.y));
                    let f = scale * ws;
                    for a in 0..3 {
                        for b in 0..3 {
                            m[a][b] += f * l[a] * l[b];
                        }
                    }
                }
            }
        }
        Ok(m)
    }
}

/// Sum of Gaussian wells lifted by a constant shift:
/// V(x) = shift − a Σ_i exp(−|x − c_i|² / (2σ²)), clipped at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianWells {
    pub centers: Vec<Point2>,
    pub amplitude: f64,
    pub width: f64,
    pub shift: f64,
}

impl Default for GaussianWells {
    fn default() -> Self {
        use std::f64::consts::PI;
        GaussianWells {
            centers: vec![
                Point2::new(PI / 2.0, PI / 2.0),
                Point2::new(3.0 * PI / 2.0, PI / 2.0),
                Point2::new(PI / 2.0, 3.0 * PI / 2.0),
                Point2::new(3.0 * PI / 2.0, 3.0 * PI / 2.0),
            ],
            amplitude: 100.0,
            width: 0.4,
            shift: 100.0,
        }
    }
}

impl Potential for GaussianWells {
    fn value(&self, p: Point2) -> f64 {
        let s2 = 2.0 * self.width * self.width;
        let wells: f64 = self
            .centers
            .iter()
            .map(|c| (-(p.x - c.x).powi(2) / s2 - (p.y - c.y).powi(2) / s2).exp())
            .sum();
        // the bells overlap by ~1e-14 at their centres
        (self.shift - self.amplitude * wells).max(0.0)
    }

    /// Splits the element until its pieces are small against σ, then applies
    /// a high-order rule on each piece.
    fn element_matrix(&self, tri: &[Point2; 3]) -> Result<[[f64; 3]; 3]> {
        let limit = 0.25 * self.width;
        let rule = collapsed8();
        let mut m = [[0.0; 3]; 3];
        let mut stack = vec![*tri];
        while let Some(piece) = stack.pop() {
            if diameter(&piece) > limit {
                let [a, b, c] = piece;
                let (ab, bc, ca) = (a.midpoint(b), b.midpoint(c), c.midpoint(a));
                stack.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [bc, ca, ab]]);
                continue;
            }
            let area = 0.5 * orient(piece[0], piece[1], piece[2]);
            for (p, _, w) in rule.map(&piece) {
                let v = checked_potential(p, self.value(p))? * w * area;
                let l = barycentric(tri, p);
                for a in 0..3 {
                    for b in 0..3 {
                        m[a][b] += v * l[a] * l[b];
                    }
                }
            }
        }
        Ok(m)
    }
}
