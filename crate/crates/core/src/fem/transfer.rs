//! Moving finite element functions between meshes.

use rayon::prelude::*;

use super::{FeSpace, NO_DOF};
use crate::error::{Error, Result};
use crate::mesh::{barycentric, orient, Mesh, Point2, PointLocator, RefinementMap};

/// Coefficients of the same function on the refined space.
pub fn prolongate(
    coeffs: &[f64],
    old_space: &FeSpace,
    new_space: &FeSpace,
    map: &RefinementMap,
) -> Result<Vec<f64>> {
    if coeffs.len() != old_space.n_dofs() {
        return Err(Error::InvalidMap(format!(
            "{} coefficients for {} dofs",
            coeffs.len(),
            old_space.n_dofs()
        )));
    }
    if map.coarse_vertices != old_space.mesh().n_vertices()
        || map.fine_vertices() != new_space.mesh().n_vertices()
    {
        return Err(Error::InvalidMap("refinement map does not connect these meshes".into()));
    }
    let mut values = old_space.to_vertex_values(coeffs);
    values.reserve(map.new_vertex_parents.len());
    for &(a, b) in &map.new_vertex_parents {
        values.push(0.5 * (values[a] + values[b]));
    }
    Ok(new_space.from_vertex_values(&values))
}

const MAX_POLY: usize = 12;

#[derive(Clone, Copy)]
struct Poly {
    pts: [Point2; MAX_POLY],
    len: usize,
}

impl Poly {
    fn from_triangle(t: &[Point2; 3]) -> Poly {
        let mut pts = [Point2::default(); MAX_POLY];
        pts[..3].copy_from_slice(t);
        Poly { pts, len: 3 }
    }

    fn push(&mut self, p: Point2) {
        if self.len < MAX_POLY {
            self.pts[self.len] = p;
            self.len += 1;
        }
    }

    /// Keeps the part left of the directed line a -> b.
    fn clip(&self, a: Point2, b: Point2) -> Poly {
        let mut out = Poly {
            pts: [Point2::default(); MAX_POLY],
            len: 0,
        };
        for i in 0..self.len {
            let p = self.pts[i];
            let q = self.pts[(i + 1) % self.len];
            let sp = orient(a, b, p);
            let sq = orient(a, b, q);
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push(Point2::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)));
            }
        }
        out
    }

    fn area(&self) -> f64 {
        (1..self.len.saturating_sub(1))
            .map(|i| 0.5 * orient(self.pts[0], self.pts[i], self.pts[i + 1]))
            .sum()
    }
}

fn intersect(donor: &[Point2; 3], target: &[Point2; 3]) -> Poly {
    let mut poly = Poly::from_triangle(donor);
    for k in 0..3 {
        if poly.len < 3 {
            break;
        }
        poly = poly.clip(target[k], target[(k + 1) % 3]);
    }
    poly
}

/// Load vector `∫ u φ_j` of a donor finite element function `u` against the
/// hat functions of `target`, integrated exactly over the overlay of the two
/// meshes. Both meshes must cover the same domain.
pub fn cross_mesh_load(donor: &FeSpace, donor_coeffs: &[f64], target: &FeSpace) -> Result<Vec<f64>> {
    let dmesh = donor.mesh();
    let tmesh = target.mesh();
    let values = donor.to_vertex_values(donor_coeffs);
    let locator = PointLocator::new(dmesh);

    let locals: Vec<[f64; 3]> = (0..tmesh.n_triangles())
        .into_par_iter()
        .map_init(
            || (0usize, Vec::new(), Vec::new()),
            |(hint, visited, pieces), t| {
                let tri = tmesh.triangle_points(t);
                let centroid = Point2::new(
                    (tri[0].x + tri[1].x + tri[2].x) / 3.0,
                    (tri[0].y + tri[1].y + tri[2].y) / 3.0,
                );
                let start = locator.locate_near(centroid, *hint)?;
                *hint = start;
                overlay(dmesh, start, &tri, visited, pieces);
                pieces.sort_unstable_by_key(|&(d, _)| d);

                let area_t = 0.5 * orient(tri[0], tri[1], tri[2]);
                let mut covered = 0.0;
                let mut r = [0.0; 3];
                for (d, poly) in pieces.iter() {
                    covered += poly.area();
                    let dtri = dmesh.triangle_points(*d);
                    let dv = dmesh.triangles()[*d].map(|v| values[v]);
                    integrate_piece(poly, &dtri, &dv, &tri, &mut r);
                }
                if (covered - area_t).abs() > 1e-9 * area_t {
                    return Err(Error::InvalidArgument(format!(
                        "donor mesh covers {covered:e} of target triangle {t} with area {area_t:e}"
                    )));
                }
                Ok(r)
            },
        )
        .collect::<Result<_>>()?;

    let mut b = vec![0.0; target.n_dofs()];
    for (t, r) in locals.iter().enumerate() {
        for (a, &d) in target.element_dofs(t).iter().enumerate() {
            if d != NO_DOF {
                b[d] += r[a];
            }
        }
    }
    Ok(b)
}

/// Collects the donor triangles overlapping `tri` with their intersection
/// polygons, by flooding outwards from `start`.
fn overlay(
    mesh: &Mesh,
    start: usize,
    tri: &[Point2; 3],
    visited: &mut Vec<usize>,
    pieces: &mut Vec<(usize, Poly)>,
) {
    visited.clear();
    pieces.clear();
    let mut stack = vec![start];
    visited.push(start);
    while let Some(d) = stack.pop() {
        let dtri = mesh.triangle_points(d);
        let poly = intersect(&dtri, tri);
        let area = poly.area();
        let scale = mesh.area(d).min(0.5 * orient(tri[0], tri[1], tri[2]));
        let overlaps = poly.len >= 3 && area > 1e-10 * scale;
        if overlaps {
            pieces.push((d, poly));
        }
        if overlaps || d == start {
            for &n in &mesh.neighbors()[d] {
                if n != crate::mesh::BOUNDARY && !visited.contains(&n) {
                    visited.push(n);
                    stack.push(n);
                }
            }
        }
    }
}

/// Adds ∫_poly u λ_a over the polygon, where u is linear on `dtri` with
/// vertex values `dv` and λ are the barycentric coordinates of `ttri`. The
/// integrand is quadratic, so the edge-midpoint rule on each fan triangle is
/// exact.
fn integrate_piece(poly: &Poly, dtri: &[Point2; 3], dv: &[f64; 3], ttri: &[Point2; 3], r: &mut [f64; 3]) {
    let p0 = poly.pts[0];
    for i in 1..poly.len - 1 {
        let (p1, p2) = (poly.pts[i], poly.pts[i + 1]);
        let area = 0.5 * orient(p0, p1, p2);
        if area <= 0.0 {
            continue;
        }
        for q in [p0.midpoint(p1), p1.midpoint(p2), p2.midpoint(p0)] {
            let ld = barycentric(dtri, q);
            let u = ld[0] * dv[0] + ld[1] * dv[1] + ld[2] * dv[2];
            let lt = barycentric(ttri, q);
            for a in 0..3 {
                r[a] += area / 3.0 * u * lt[a];
            }
        }
    }
}
