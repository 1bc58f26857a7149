//! Energy-based refinement indicators on virtual patches, and Dörfler
//! marking.
//!
//! For each element the local space is spanned by the hat functions of the
//! interior nodes of its red-green patch together with the current iterate
//! ψ. One GFI step with τ = 1 in that space gives a local approximation ψ̃;
//! the indicator is the energy it gains, 𝖤(ψ) − 𝖤(ψ̃).
//!
//! With known states ψ_i the local change δ is corrected globally to
//! δ − Σ (δ, ψ_i) ψ_i. For eigenfunctions ψ_i with a(ψ_i, v) = μ_i (ψ_i, v)
//! this turns the local problem into the deflated pencil
//! H − Σ μ_i l_i l_iᵀ, M − Σ l_i l_iᵀ with l_i the loads (ξ_j, ψ_i), so a
//! patch keeps its full local freedom however many states are deflated.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{h_local, mass_local, Potential};
use crate::mesh::{build_virtual_patch, Mesh, PatchNode, VirtualPatch};

/// Global data shared by all local problems of one sweep.
pub struct IndicatorContext<'a, P: ?Sized> {
    pub mesh: &'a Mesh,
    pub potential: &'a P,
    /// ψ at every mesh vertex (zero on the boundary).
    pub psi: Vec<f64>,
    /// 𝖤(ψ) on the global space.
    pub energy: f64,
    /// Each constraint representative at every mesh vertex.
    pub constraints: Vec<Vec<f64>>,
    /// (ψ, ψ_i)_{L²} on the global space.
    pub constraint_overlaps: Vec<f64>,
    /// (ψ_i, ψ_i)_H of each (L²-normalized) representative.
    pub constraint_energies: Vec<f64>,
}

/// Gram matrices of the local space. The last basis member is ψ.
#[derive(Clone, Debug)]
pub struct LocalSpace {
    pub patch: VirtualPatch,
    pub h_local: DMatrix<f64>,
    pub m_local: DMatrix<f64>,
    /// For each constraint, its L² products with the basis.
    pub constraint_loads: Vec<DVector<f64>>,
    /// (ψ_i, ψ_i)_H for each constraint.
    pub constraint_energies: Vec<f64>,
}

impl LocalSpace {
    pub fn dim(&self) -> usize {
        self.h_local.nrows()
    }
}

/// Values at the patch nodes of a function given at mesh vertices.
fn node_value(mesh: &Mesh, element: usize, values: &[f64], node: PatchNode) -> f64 {
    match node {
        PatchNode::Vertex(v) => values[v],
        PatchNode::Midpoint(k) => {
            let (p, q) = mesh.edge_vertices(element, k);
            0.5 * (values[p] + values[q])
        }
    }
}

pub fn build_local_space<P: Potential + ?Sized>(ctx: &IndicatorContext<'_, P>, element: usize) -> Result<LocalSpace> {
    let mesh = ctx.mesh;
    let patch = build_virtual_patch(mesh, element);
    let m = patch.interior_nodes.len();
    if m == 0 {
        return Err(Error::EmptyLocalSpace);
    }
    let dim = m + 1;
    let mut h = DMatrix::zeros(dim, dim);
    let mut mm = DMatrix::zeros(dim, dim);
    let mut loads = vec![DVector::zeros(dim); ctx.constraints.len()];

    for (i, tri_nodes) in patch.elements.iter().enumerate() {
        let pts = patch.element_points(mesh, i);
        let hl = h_local(ctx.potential, &pts)?;
        let ml = mass_local(&pts);
        let idx = tri_nodes.map(|n| patch.interior_nodes.iter().position(|&q| q == n));
        let psi = tri_nodes.map(|n| node_value(mesh, element, &ctx.psi, n));
        let reps: Vec<[f64; 3]> = ctx
            .constraints
            .iter()
            .map(|r| tri_nodes.map(|n| node_value(mesh, element, r, n)))
            .collect();
        for a in 0..3 {
            let Some(ia) = idx[a] else { continue };
            for b in 0..3 {
                if let Some(ib) = idx[b] {
                    h[(ia, ib)] += hl[a][b];
                    mm[(ia, ib)] += ml[a][b];
                }
                h[(ia, m)] += psi[b] * hl[b][a];
                mm[(ia, m)] += psi[b] * ml[b][a];
                for (load, r) in loads.iter_mut().zip(&reps) {
                    load[ia] += r[b] * ml[b][a];
                }
            }
        }
    }
    for i in 0..m {
        h[(m, i)] = h[(i, m)];
        mm[(m, i)] = mm[(i, m)];
    }
    h[(m, m)] = 2.0 * ctx.energy;
    mm[(m, m)] = 1.0;
    for (load, &o) in loads.iter_mut().zip(&ctx.constraint_overlaps) {
        load[m] = o;
    }
    Ok(LocalSpace {
        patch,
        h_local: h,
        m_local: mm,
        constraint_loads: loads,
        constraint_energies: ctx.constraint_energies.clone(),
    })
}

/// Gram matrices with the known states deflated.
fn deflated(local: &LocalSpace) -> (DMatrix<f64>, DMatrix<f64>) {
    let (mut h, mut m) = (local.h_local.clone(), local.m_local.clone());
    for (l, &mu) in local.constraint_loads.iter().zip(&local.constraint_energies) {
        let outer = l * l.transpose();
        h -= &outer * mu;
        m -= outer;
    }
    (h, m)
}

/// Unclamped local energy 𝖤(ψ̃) after one τ = 1 step, or `None` when the
/// local problem is singular.
pub fn local_step_energy(local: &LocalSpace) -> Option<f64> {
    let dim = local.dim();
    let (h, m) = deflated(local);
    let mut e_psi = DVector::zeros(dim);
    e_psi[dim - 1] = 1.0;
    let rhs = &m * &e_psi;
    let c = h.clone().cholesky()?.solve(&rhs);
    let norm2 = c.dot(&(&m * &c));
    if !(norm2 > 0.0) {
        return None;
    }
    Some(0.5 * c.dot(&(&h * &c)) / norm2)
}

/// Δ𝖤(κ) = max(0, 𝖤(ψ) − 𝖤(ψ̃)).
pub fn local_indicator(local: &LocalSpace, energy: f64) -> f64 {
    match local_step_energy(local) {
        Some(e) => (energy - e).max(0.0),
        None => {
            log::warn!("singular local problem on element {}", local.patch.parent_element);
            0.0
        }
    }
}

/// Indicator of every element, computed in parallel.
pub fn compute_indicators<P: Potential + ?Sized>(ctx: &IndicatorContext<'_, P>) -> Vec<f64> {
    (0..ctx.mesh.n_triangles())
        .into_par_iter()
        .map(|t| match build_local_space(ctx, t) {
            Ok(local) => local_indicator(&local, ctx.energy),
            Err(Error::EmptyLocalSpace) => 0.0,
            Err(e) => {
                log::warn!("indicator on element {t} failed: {e}");
                0.0
            }
        })
        .collect()
}

/// Smallest set of elements carrying a θ fraction of the total indicator,
/// largest first with ties broken by index.
pub fn dorfler_mark(field: &[f64], theta: f64) -> Vec<usize> {
    let total: f64 = field.iter().sum();
    if !(total > 0.0) {
        return vec![0];
    }
    let mut order: Vec<usize> = (0..field.len()).collect();
    order.sort_by(|&a, &b| field[b].total_cmp(&field[a]).then(a.cmp(&b)));
    let goal = theta * total;
    let mut sum = 0.0;
    let mut marked = Vec::new();
    for t in order {
        marked.push(t);
        sum += field[t];
        if sum >= goal {
            break;
        }
    }
    marked
}
