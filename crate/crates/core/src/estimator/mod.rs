//! Residual a posteriori estimator for an approximate eigenpair.
//!
//! η_K² = h_K² ‖(V − e_ψ) ψ‖²_{L²(K)} + ½ h_K Σ_{e ⊂ ∂K∖Γ} |e| ⟦∂ψ/∂n⟧²,
//! with h_K the diameter of K.

use rayon::prelude::*;

use crate::error::Result;
use crate::fem::{barycentric_gradients, FeSpace, Potential, QuadratureRule};
use crate::gflow::{apply_g, Operators};
use crate::mesh::{Mesh, Point2, BOUNDARY};

#[derive(Clone, Debug)]
pub struct EstimatorReport {
    pub per_element: Vec<f64>,
    pub total_bound: f64,
    pub c_interp: f64,
    pub e_psi: f64,
}

fn gradient(mesh: &Mesh, values: &[f64], t: usize) -> Point2 {
    let g = barycentric_gradients(&mesh.triangle_points(t));
    let v = mesh.triangles()[t].map(|i| values[i]);
    Point2::new(
        v[0] * g[0].x + v[1] * g[1].x + v[2] * g[2].x,
        v[0] * g[0].y + v[1] * g[1].y + v[2] * g[2].y,
    )
}

/// Normal gradient jump of ψ across local edge `k` of `t`, and the edge
/// length; `None` on the domain boundary.
pub fn edge_jump(mesh: &Mesh, values: &[f64], t: usize, k: usize) -> Option<(f64, f64)> {
    let n = mesh.neighbors()[t][k];
    if n == BOUNDARY {
        return None;
    }
    let (p, q) = mesh.edge_vertices(t, k);
    let (p, q) = (mesh.vertices()[p], mesh.vertices()[q]);
    let len = p.dist(q);
    // outward unit normal of a counterclockwise triangle
    let normal = Point2::new((q.y - p.y) / len, (p.x - q.x) / len);
    let (gt, gn) = (gradient(mesh, values, t), gradient(mesh, values, n));
    let jump = (gt.x - gn.x) * normal.x + (gt.y - gn.y) * normal.y;
    Some((jump, len))
}

/// η_K² for one element; `values` holds ψ at every mesh vertex.
pub fn element_eta_sq<P: Potential + ?Sized>(
    mesh: &Mesh,
    values: &[f64],
    e_psi: f64,
    potential: &P,
    element: usize,
) -> f64 {
    let tri = mesh.triangle_points(element);
    let h = mesh.diameter(element);
    let v = mesh.triangles()[element].map(|i| values[i]);
    let rule = QuadratureRule::degree4();
    let area = mesh.area(element);
    let volume: f64 = rule
        .map(&tri)
        .map(|(p, l, w)| {
            let psi = l[0] * v[0] + l[1] * v[1] + l[2] * v[2];
            let r = (potential.value(p) - e_psi) * psi;
            w * r * r
        })
        .sum::<f64>()
        * area;
    let jumps: f64 = (0..3)
        .filter_map(|k| edge_jump(mesh, values, element, k))
        .map(|(j, len)| len * j * j)
        .sum();
    h * h * volume + 0.5 * h * jumps
}

/// Estimator for ψ given on the space of `ops`.
pub fn global_bound<P: Potential + ?Sized>(
    ops: &Operators,
    psi: &[f64],
    potential: &P,
    c_interp: f64,
) -> Result<EstimatorReport> {
    let g = apply_g(ops, psi)?;
    let e_psi = 1.0 / ops.l2_inner(&g, psi);
    Ok(report(ops.space(), psi, e_psi, potential, c_interp))
}

/// Estimator for a given e_ψ.
pub fn report<P: Potential + ?Sized>(
    space: &FeSpace,
    psi: &[f64],
    e_psi: f64,
    potential: &P,
    c_interp: f64,
) -> EstimatorReport {
    let mesh = space.mesh();
    let values = space.to_vertex_values(psi);
    let per_element: Vec<f64> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| element_eta_sq(mesh, &values, e_psi, potential, t))
        .collect();
    let total_bound = c_interp * per_element.iter().sum::<f64>().sqrt();
    EstimatorReport {
        per_element,
        total_bound,
        c_interp,
        e_psi,
    }
}
