//! P1 finite elements with homogeneous Dirichlet conditions.

mod quadrature;
mod solver;
mod sparse;
mod transfer;

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{orient, Mesh, Point2};

pub use quadrature::{gauss_legendre, QuadratureRule};
pub use solver::{solve_spd, SpdSolver, DEFAULT_REL_TOL};
pub use sparse::{dot, norm2, SparseSymMatrix};
pub use transfer::{cross_mesh_load, prolongate};

/// Marker for vertices without a degree of freedom.
pub const NO_DOF: usize = usize::MAX;

/// A nonnegative potential V. Implementations may override
/// [`Potential::element_matrix`] when the default quadrature is too coarse.
pub trait Potential: Sync {
    fn value(&self, p: Point2) -> f64;

    /// Local matrix ∫_T V λ_a λ_b dx over the triangle `tri`.
    fn element_matrix(&self, tri: &[Point2; 3]) -> Result<[[f64; 3]; 3]> {
        quadrature_potential_matrix(self, tri, QuadratureRule::degree4())
    }

    /// Skips the potential term entirely.
    fn is_zero(&self) -> bool {
        false
    }
}

impl<F: Fn(Point2) -> f64 + Sync> Potential for F {
    fn value(&self, p: Point2) -> f64 {
        self(p)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPotential;

impl Potential for ZeroPotential {
    fn value(&self, _: Point2) -> f64 {
        0.0
    }

    fn element_matrix(&self, _: &[Point2; 3]) -> Result<[[f64; 3]; 3]> {
        Ok([[0.0; 3]; 3])
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Checks that a potential value is finite and nonnegative.
pub fn checked_potential(p: Point2, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidPotential { x: p.x, y: p.y, value })
    }
}

/// ∫_T V λ_a λ_b by the given rule.
pub fn quadrature_potential_matrix<P: Potential + ?Sized>(
    pot: &P,
    tri: &[Point2; 3],
    rule: &QuadratureRule,
) -> Result<[[f64; 3]; 3]> {
    let area = 0.5 * orient(tri[0], tri[1], tri[2]);
    let mut m = [[0.0; 3]; 3];
    for (p, l, w) in rule.map(tri) {
        let v = checked_potential(p, pot.value(p))? * w * area;
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += v * l[a] * l[b];
            }
        }
    }
    Ok(m)
}

/// Gradients of the barycentric coordinates on `tri`.
pub fn barycentric_gradients(tri: &[Point2; 3]) -> [Point2; 3] {
    let det = orient(tri[0], tri[1], tri[2]);
    let g = |i: usize| {
        let (p, q) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
        Point2::new((p.y - q.y) / det, (q.x - p.x) / det)
    };
    [g(0), g(1), g(2)]
}

/// ∫_T ∇λ_a·∇λ_b dx.
pub fn stiffness_local(tri: &[Point2; 3]) -> [[f64; 3]; 3] {
    let area = 0.5 * orient(tri[0], tri[1], tri[2]);
    let g = barycentric_gradients(tri);
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = area * (g[a].x * g[b].x + g[a].y * g[b].y);
        }
    }
    k
}

/// ∫_T λ_a λ_b dx = |T|/12 · (1 + δ_ab).
pub fn mass_local(tri: &[Point2; 3]) -> [[f64; 3]; 3] {
    let s = 0.5 * orient(tri[0], tri[1], tri[2]) / 12.0;
    let mut m = [[s; 3]; 3];
    for (a, row) in m.iter_mut().enumerate() {
        row[a] = 2.0 * s;
    }
    m
}

/// Local matrix of (u, v)_H = ∫ ½∇u·∇v + V u v.
pub fn h_local<P: Potential + ?Sized>(pot: &P, tri: &[Point2; 3]) -> Result<[[f64; 3]; 3]> {
    let mut k = stiffness_local(tri);
    let v = if pot.is_zero() {
        [[0.0; 3]; 3]
    } else {
        pot.element_matrix(tri)?
    };
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = 0.5 * k[a][b] + v[a][b];
        }
    }
    Ok(k)
}

struct Pattern {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// Position in the value array of each local entry (a, b) of each
    /// triangle, `NO_DOF` where a or b is a boundary vertex.
    slots: Vec<[usize; 9]>,
}

/// The P1 space on a mesh with degrees of freedom at interior vertices.
pub struct FeSpace {
    mesh: Arc<Mesh>,
    dof_of_vertex: Vec<usize>,
    vertex_of_dof: Vec<usize>,
    pattern: OnceLock<Pattern>,
}

impl std::fmt::Debug for FeSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeSpace")
            .field("n_vertices", &self.mesh.n_vertices())
            .field("n_dofs", &self.n_dofs())
            .finish()
    }
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>) -> FeSpace {
        let mut dof_of_vertex = vec![NO_DOF; mesh.n_vertices()];
        let mut vertex_of_dof = Vec::with_capacity(mesh.n_interior_vertices());
        for (v, &b) in mesh.boundary_vertex().iter().enumerate() {
            if !b {
                dof_of_vertex[v] = vertex_of_dof.len();
                vertex_of_dof.push(v);
            }
        }
        FeSpace {
            mesh,
            dof_of_vertex,
            vertex_of_dof,
            pattern: OnceLock::new(),
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.vertex_of_dof.len()
    }

    pub fn dof_of_vertex(&self, v: usize) -> Option<usize> {
        let d = self.dof_of_vertex[v];
        (d != NO_DOF).then_some(d)
    }

    pub fn vertex_of_dof(&self) -> &[usize] {
        &self.vertex_of_dof
    }

    /// Dof indices of the vertices of triangle `t`, `NO_DOF` on the boundary.
    pub fn element_dofs(&self, t: usize) -> [usize; 3] {
        self.mesh.triangles()[t].map(|v| self.dof_of_vertex[v])
    }

    /// Values at all mesh vertices, zero on the boundary.
    pub fn to_vertex_values(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.n_dofs());
        self.dof_of_vertex
            .iter()
            .map(|&d| if d == NO_DOF { 0.0 } else { coeffs[d] })
            .collect()
    }

    /// Restricts vertex values to the dofs.
    pub fn from_vertex_values(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.mesh.n_vertices());
        self.vertex_of_dof.iter().map(|&v| values[v]).collect()
    }

    /// Evaluates the finite element function at `p` inside triangle `t`.
    pub fn evaluate_in(&self, coeffs: &[f64], t: usize, p: Point2) -> f64 {
        let l = crate::mesh::barycentric(&self.mesh.triangle_points(t), p);
        self.element_dofs(t)
            .iter()
            .zip(l)
            .map(|(&d, l)| if d == NO_DOF { 0.0 } else { l * coeffs[d] })
            .sum()
    }

    fn pattern(&self) -> &Pattern {
        self.pattern.get_or_init(|| {
            let n = self.n_dofs();
            let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
            for t in 0..self.mesh.n_triangles() {
                let d = self.element_dofs(t);
                for &i in d.iter().filter(|&&i| i != NO_DOF) {
                    rows[i].extend(d.iter().filter(|&&j| j != NO_DOF));
                }
            }
            let mut row_ptr = Vec::with_capacity(n + 1);
            let mut col_idx = Vec::new();
            row_ptr.push(0);
            for r in &mut rows {
                r.sort_unstable();
                r.dedup();
                col_idx.extend_from_slice(r);
                row_ptr.push(col_idx.len());
            }
            let slots = (0..self.mesh.n_triangles())
                .map(|t| {
                    let d = self.element_dofs(t);
                    let mut s = [NO_DOF; 9];
                    for a in 0..3 {
                        for b in 0..3 {
                            if d[a] != NO_DOF && d[b] != NO_DOF {
                                let r = row_ptr[d[a]]..row_ptr[d[a] + 1];
                                let k = col_idx[r.clone()]
                                    .binary_search(&d[b])
                                    .expect("entry in pattern");
                                s[3 * a + b] = r.start + k;
                            }
                        }
                    }
                    s
                })
                .collect();
            Pattern {
                row_ptr,
                col_idx,
                slots,
            }
        })
    }

    /// Assembles a global matrix from one local matrix per triangle. Locals
    /// are computed in parallel and summed in triangle order.
    pub fn assemble<F>(&self, local: F) -> Result<SparseSymMatrix>
    where
        F: Fn(&[Point2; 3]) -> Result<[[f64; 3]; 3]> + Sync,
    {
        let locals: Vec<[[f64; 3]; 3]> = (0..self.mesh.n_triangles())
            .into_par_iter()
            .map(|t| local(&self.mesh.triangle_points(t)))
            .collect::<Result<_>>()?;
        let pat = self.pattern();
        let mut values = vec![0.0; pat.col_idx.len()];
        for (m, s) in locals.iter().zip(&pat.slots) {
            for a in 0..3 {
                for b in 0..3 {
                    let k = s[3 * a + b];
                    if k != NO_DOF {
                        values[k] += m[a][b];
                    }
                }
            }
        }
        Ok(SparseSymMatrix::from_parts_unchecked(
            self.n_dofs(),
            pat.row_ptr.clone(),
            pat.col_idx.clone(),
            values,
        ))
    }

    /// Load vector ∫ f φ_i by a quadrature rule.
    pub fn load_vector<F>(&self, f: F, rule: &QuadratureRule) -> Vec<f64>
    where
        F: Fn(Point2) -> f64 + Sync,
    {
        let locals: Vec<[f64; 3]> = (0..self.mesh.n_triangles())
            .into_par_iter()
            .map(|t| {
                let tri = self.mesh.triangle_points(t);
                let area = 0.5 * orient(tri[0], tri[1], tri[2]);
                let mut r = [0.0; 3];
                for (p, l, w) in rule.map(&tri) {
                    let v = f(p) * w * area;
                    for a in 0..3 {
                        r[a] += v * l[a];
                    }
                }
                r
            })
            .collect();
        let mut b = vec![0.0; self.n_dofs()];
        for (t, r) in locals.iter().enumerate() {
            for (a, &d) in self.element_dofs(t).iter().enumerate() {
                if d != NO_DOF {
                    b[d] += r[a];
                }
            }
        }
        b
    }
}

/// Matrix of (·,·)_H on the space.
pub fn assemble_h_matrix<P: Potential + ?Sized>(space: &FeSpace, potential: &P) -> Result<SparseSymMatrix> {
    space.assemble(|tri| h_local(potential, tri))
}

pub fn assemble_mass_matrix(space: &FeSpace) -> SparseSymMatrix {
    space
        .assemble(|tri| Ok(mass_local(tri)))
        .expect("mass assembly cannot fail")
}

/// Nodal interpolation at the interior vertices.
pub fn interpolate(space: &FeSpace, f: impl Fn(Point2) -> f64) -> Result<Vec<f64>> {
    space
        .vertex_of_dof()
        .iter()
        .map(|&v| {
            let p = space.mesh().vertices()[v];
            let value = f(p);
            if value.is_finite() {
                Ok(value)
            } else {
                Err(Error::InvalidFunction { x: p.x, y: p.y, value })
            }
        })
        .collect()
}
