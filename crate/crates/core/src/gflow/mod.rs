//! Sobolev gradient flow iteration with deflation against known states.
//!
//! All vectors are coefficient vectors over the dofs of one [`FeSpace`]; the
//! H inner product is `uᵀAv` and the L² inner product `uᵀMv`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_h_matrix, assemble_mass_matrix, cross_mesh_load, dot, FeSpace, Potential,
    SparseSymMatrix, SpdSolver,
};

/// Tolerance of the mass-matrix solves used for L² projections.
pub const MASS_SOLVE_TOL: f64 = 1e-14;

/// A trial step is accepted only if it lowers the energy by more than this
/// multiple of the energy, so that roundoff is not mistaken for descent.
pub const DESCENT_NOISE: f64 = 8.0 * f64::EPSILON;

/// Coefficient vector in a finite element space.
#[derive(Clone, Debug)]
pub struct WaveFunction {
    pub space: Arc<FeSpace>,
    pub coeffs: Vec<f64>,
}

impl WaveFunction {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<f64>) -> WaveFunction {
        assert_eq!(coeffs.len(), space.n_dofs());
        WaveFunction { space, coeffs }
    }

    pub fn vertex_values(&self) -> Vec<f64> {
        self.space.to_vertex_values(&self.coeffs)
    }
}

#[derive(Clone, Debug)]
pub struct GfiParams {
    pub tau_max: f64,
    pub backtrack_cap: u32,
    pub gamma_stop: f64,
    pub theta: f64,
    pub solver_tol: f64,
}

impl Default for GfiParams {
    fn default() -> Self {
        GfiParams {
            tau_max: 1.0,
            backtrack_cap: 30,
            gamma_stop: 0.1,
            theta: 0.5,
            solver_tol: 1e-10,
        }
    }
}

impl GfiParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.tau_max > 0.0 && self.tau_max <= 1.0) {
            return bad(format!("tau_max {} outside (0, 1]", self.tau_max));
        }
        if !(self.gamma_stop > 0.0 && self.gamma_stop < 1.0) {
            return bad(format!("gamma {} outside (0, 1)", self.gamma_stop));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta {} outside (0, 1)", self.theta));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol <= 1e-6) {
            return bad(format!("solver_tol {} outside (0, 1e-6]", self.solver_tol));
        }
        Ok(())
    }
}

/// H and mass matrices of one space with their preconditioned solvers.
pub struct Operators {
    space: Arc<FeSpace>,
    a: SpdSolver,
    m: SpdSolver,
    solver_tol: f64,
}

impl Operators {
    pub fn new<P: Potential + ?Sized>(space: Arc<FeSpace>, potential: &P, solver_tol: f64) -> Result<Operators> {
        let a = assemble_h_matrix(&space, potential)?;
        let m = assemble_mass_matrix(&space);
        Ok(Operators::from_matrices(space, a, m, solver_tol))
    }

    pub fn from_matrices(space: Arc<FeSpace>, a: SparseSymMatrix, m: SparseSymMatrix, solver_tol: f64) -> Operators {
        Operators {
            space,
            a: SpdSolver::ic0(a),
            m: SpdSolver::jacobi(m),
            solver_tol,
        }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn a(&self) -> &SparseSymMatrix {
        self.a.matrix()
    }

    pub fn m(&self) -> &SparseSymMatrix {
        self.m.matrix()
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    pub fn l2_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.m().bilinear(u, v)
    }

    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        self.m().quad_form(u).max(0.0).sqrt()
    }

    /// Solves M x = b.
    pub fn solve_mass(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.m.solve(b, None, MASS_SOLVE_TOL)
    }
}

/// g = 𝖦(ψ): the solution of A g = M u.
pub fn apply_g(ops: &Operators, u: &[f64]) -> Result<Vec<f64>> {
    let mu = ops.m().mul_vec(u);
    // for a near-eigenfunction g ≈ u (uᵀMu)/(uᵀAu)
    let (num, den) = (dot(u, &mu), ops.a().quad_form(u));
    let x0: Option<Vec<f64>> = (den > 0.0).then(|| u.iter().map(|v| v * num / den).collect());
    ops.a.solve(&mu, x0.as_deref(), ops.solver_tol)
}

/// 𝖤(ψ) = ½ uᵀAu.
pub fn energy(a: &SparseSymMatrix, u: &[f64]) -> f64 {
    0.5 * a.quad_form(u)
}

/// uᵀAu, the eigenvalue estimate of an L²-normalized iterate.
pub fn eigenvalue_estimate(a: &SparseSymMatrix, _m: &SparseSymMatrix, u: &[f64]) -> f64 {
    a.quad_form(u)
}

/// Flips the sign so that the entry of largest magnitude is positive (the
/// first such entry on ties).
pub fn fix_sign(u: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &v in u.iter() {
        if v.abs() > best {
            best = v.abs();
            sign = v.signum();
        }
    }
    if sign < 0.0 {
        u.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Known states to deflate, with their L²-orthonormal representatives in the
/// current space.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    pub donors: Vec<WaveFunctionDonor>,
    pub representatives: Vec<Vec<f64>>,
    /// M times each representative.
    mass_representatives: Vec<Vec<f64>>,
}

/// A previously computed state on its own mesh.
#[derive(Clone, Debug)]
pub struct WaveFunctionDonor {
    pub state: WaveFunction,
    pub eigenvalue: f64,
}

impl ConstraintSet {
    pub fn empty() -> ConstraintSet {
        ConstraintSet::default()
    }

    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    /// (u, ψ_i)_{L²} for each representative.
    pub fn overlaps(&self, u: &[f64]) -> Vec<f64> {
        self.mass_representatives.iter().map(|mr| dot(u, mr)).collect()
    }

    /// Largest |(u, ψ_i)_{L²}| over the representatives.
    pub fn max_overlap(&self, u: &[f64]) -> f64 {
        self.mass_representatives
            .iter()
            .map(|mr| dot(u, mr).abs())
            .fold(0.0, f64::max)
    }
}

/// Subtracts the components along the representatives and L²-normalizes.
pub fn project_and_normalize(psi_hat: &[f64], constraints: &ConstraintSet, m: &SparseSymMatrix) -> Result<Vec<f64>> {
    let mut u = psi_hat.to_vec();
    // two sweeps of modified Gram-Schmidt
    for _ in 0..2 {
        for (r, mr) in constraints.representatives.iter().zip(&constraints.mass_representatives) {
            let c = dot(&u, mr);
            for (ui, ri) in u.iter_mut().zip(r) {
                *ui -= c * ri;
            }
        }
    }
    let norm = m.quad_form(&u).max(0.0).sqrt();
    if !(norm >= 1e-14) {
        return Err(Error::DegenerateIterate);
    }
    u.iter_mut().for_each(|v| *v /= norm);
    fix_sign(&mut u);
    Ok(u)
}

/// Precomputed direction of one GFI step, so that several time steps can be
/// tried with a single G solve.
pub struct GfiDirection<'a> {
    u: &'a [f64],
    /// γ 𝖦(ψ), with γ = 1/(𝖦(ψ), ψ)_{L²}.
    scaled_g: Vec<f64>,
}

impl<'a> GfiDirection<'a> {
    pub fn new(ops: &Operators, u: &'a [f64]) -> Result<GfiDirection<'a>> {
        let g = apply_g(ops, u)?;
        let gu = ops.l2_inner(&g, u);
        if !(gu > 0.0) {
            return Err(Error::Internal(format!("(G psi, psi) = {gu:e} is not positive")));
        }
        let gamma = 1.0 / gu;
        Ok(GfiDirection {
            u,
            scaled_g: g.iter().map(|v| gamma * v).collect(),
        })
    }

    /// ψ̂(τ) = (1 − τ) u + τ γ g, projected and normalized.
    pub fn step(&self, tau: f64, constraints: &ConstraintSet, m: &SparseSymMatrix) -> Result<Vec<f64>> {
        let hat: Vec<f64> = self
            .u
            .iter()
            .zip(&self.scaled_g)
            .map(|(u, g)| (1.0 - tau) * u + tau * g)
            .collect();
        project_and_normalize(&hat, constraints, m)
    }
}

/// One GFI step with a fixed time step.
pub fn gfi_step(u: &[f64], tau: f64, ops: &Operators, constraints: &ConstraintSet) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!("time step {tau} outside (0, 1]")));
    }
    GfiDirection::new(ops, u)?.step(tau, constraints, ops.m())
}

/// Outcome of an accepted step.
#[derive(Clone, Debug)]
pub struct AcceptedStep {
    pub tau: f64,
    pub coeffs: Vec<f64>,
    pub energy: f64,
}

/// Largest τ = τ_max 2^{-k}, k = 0..=cap, that strictly decreases the energy.
pub fn select_time_step(
    u: &[f64],
    ops: &Operators,
    constraints: &ConstraintSet,
    params: &GfiParams,
) -> Result<AcceptedStep> {
    let e0 = energy(ops.a(), u);
    let dir = GfiDirection::new(ops, u)?;
    let mut tau = params.tau_max;
    for _ in 0..=params.backtrack_cap {
        let v = dir.step(tau, constraints, ops.m())?;
        let e = energy(ops.a(), &v);
        if e < e0 - DESCENT_NOISE * e0.abs() {
            return Ok(AcceptedStep {
                tau,
                coeffs: v,
                energy: e,
            });
        }
        tau *= 0.5;
    }
    Err(Error::Stagnation)
}

/// Representatives of the donors in the space of `ops`: L² projections,
/// orthonormalized by modified Gram-Schmidt in donor order.
pub fn project_constraints_to_space(constraints: &ConstraintSet, ops: &Operators) -> Result<ConstraintSet> {
    let mut reps: Vec<Vec<f64>> = Vec::with_capacity(constraints.donors.len());
    let mut mreps: Vec<Vec<f64>> = Vec::with_capacity(constraints.donors.len());
    for (index, donor) in constraints.donors.iter().enumerate() {
        let b = cross_mesh_load(&donor.state.space, &donor.state.coeffs, ops.space())?;
        let mut x = if b.iter().all(|&v| v == 0.0) {
            b
        } else {
            ops.solve_mass(&b)?
        };
        for _ in 0..2 {
            for (r, mr) in reps.iter().zip(&mreps) {
                let c = dot(&x, mr);
                for (xi, ri) in x.iter_mut().zip(r) {
                    *xi -= c * ri;
                }
            }
        }
        let norm = ops.l2_norm(&x);
        if !(norm >= 1e-10) {
            return Err(Error::DegenerateConstraint { index });
        }
        x.iter_mut().for_each(|v| *v /= norm);
        mreps.push(ops.m().mul_vec(&x));
        reps.push(x);
    }
    Ok(ConstraintSet {
        donors: constraints.donors.clone(),
        representatives: reps,
        mass_representatives: mreps,
    })
}

impl ConstraintSet {
    /// Constraint set for `donors`, represented in the space of `ops`.
    pub fn from_donors(donors: Vec<WaveFunctionDonor>, ops: &Operators) -> Result<ConstraintSet> {
        let raw = ConstraintSet {
            donors,
            ..ConstraintSet::default()
        };
        project_constraints_to_space(&raw, ops)
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fem::{interpolate, ZeroPotential};
    use crate::mesh::{generate_initial, refine_twice, DomainId, Point2};

    fn ops(domain: DomainId, n: usize) -> Operators {
        let space = Arc::new(FeSpace::new(Arc::new(generate_initial(domain, n).unwrap())));
        Operators::new(space, &ZeroPotential, 1e-12).unwrap()
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn one_dof_examples() {
        let o = ops(DomainId::UnitSquare, 2);
        let g = apply_g(&o, &[1.0]).unwrap();
        assert!((g[0] - 0.0625).abs() < 1e-15);
        assert_eq!(apply_g(&o, &[0.0]).unwrap(), vec![0.0]);
        assert!((energy(o.a(), &[1.0]) - 1.0).abs() < 1e-15);
        let u = [1.0 / 0.125f64.sqrt()];
        assert!((eigenvalue_estimate(o.a(), o.m(), &u) - 16.0).abs() < 1e-13);
        for tau in [1.0, 0.5, 0.125] {
            let v = gfi_step(&[3.0], tau, &o, &ConstraintSet::empty()).unwrap();
            assert!((v[0] - u[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn g_is_linear_and_self_adjoint() {
        let o = ops(DomainId::LShape, 4);
        let n = o.n_dofs();
        let (u, v) = (random(n, 1), random(n, 2));
        let (gu, gv) = (apply_g(&o, &u).unwrap(), apply_g(&o, &v).unwrap());
        let lhs = dot(&gu, &o.m().mul_vec(&v));
        let rhs = dot(&o.m().mul_vec(&u), &gv);
        assert!((lhs - rhs).abs() <= 1e-10);
        let u3: Vec<f64> = u.iter().map(|x| 3.0 * x).collect();
        let g3 = apply_g(&o, &u3).unwrap();
        for (a, b) in g3.iter().zip(&gu) {
            assert!((a - 3.0 * b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn energy_scales_quadratically() {
        let o = ops(DomainId::CenteredSquare, 4);
        let u = random(o.n_dofs(), 5);
        let u2: Vec<f64> = u.iter().map(|x| -2.5 * x).collect();
        assert!((energy(o.a(), &u2) - 6.25 * energy(o.a(), &u)).abs() < 1e-12 * energy(o.a(), &u2));
        assert_eq!(energy(o.a(), &vec![0.0; o.n_dofs()]), 0.0);
        let w = project_and_normalize(&u, &ConstraintSet::empty(), o.m()).unwrap();
        assert!((eigenvalue_estimate(o.a(), o.m(), &w) - 2.0 * energy(o.a(), &w)).abs() < 1e-12);
    }

    #[test]
    fn tau_one_is_inverse_iteration() {
        let o = ops(DomainId::Square0To2Pi, 4);
        let u = project_and_normalize(&random(o.n_dofs(), 9), &ConstraintSet::empty(), o.m()).unwrap();
        let v = gfi_step(&u, 1.0, &o, &ConstraintSet::empty()).unwrap();
        let w = project_and_normalize(&apply_g(&o, &u).unwrap(), &ConstraintSet::empty(), o.m()).unwrap();
        for (a, b) in v.iter().zip(&w) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    fn donor_of(o: &Operators, coeffs: Vec<f64>) -> WaveFunctionDonor {
        WaveFunctionDonor {
            state: WaveFunction::new(o.space().clone(), coeffs),
            eigenvalue: 0.0,
        }
    }

    #[test]
    fn projection_examples() {
        let o = ops(DomainId::LShape, 3);
        let pi = std::f64::consts::PI;
        let d = interpolate(o.space(), |p: Point2| (pi * p.x / 2.0).sin() * (pi * p.y / 2.0).sin()).unwrap();
        let cs = ConstraintSet::from_donors(vec![donor_of(&o, d.clone())], &o).unwrap();
        assert!((o.l2_norm(&cs.representatives[0]) - 1.0).abs() < 1e-12);
        // same space: representative is the normalized donor
        let norm = o.l2_norm(&d);
        for (r, v) in cs.representatives[0].iter().zip(&d) {
            assert!((r - v / norm).abs() < 1e-12);
        }
        assert!(matches!(
            project_and_normalize(&cs.representatives[0], &cs, o.m()),
            Err(Error::DegenerateIterate)
        ));
        let u = project_and_normalize(&random(o.n_dofs(), 4), &cs, o.m()).unwrap();
        assert!((o.l2_norm(&u) - 1.0).abs() < 1e-12);
        assert!(cs.max_overlap(&u) < 1e-12);
        let again = project_and_normalize(&u, &cs, o.m()).unwrap();
        for (a, b) in again.iter().zip(&u) {
            assert!((a - b).abs() < 1e-14);
        }
        // linearly dependent donors
        let twice = vec![donor_of(&o, d.clone()), donor_of(&o, d.iter().map(|v| 2.0 * v).collect())];
        assert!(matches!(
            ConstraintSet::from_donors(twice, &o),
            Err(Error::DegenerateConstraint { index: 1 })
        ));
    }

    #[test]
    fn projection_from_finer_mesh_satisfies_normal_equations() {
        let coarse = ops(DomainId::UnitSquare, 4);
        let (fine_mesh, _) = refine_twice(coarse.space().mesh(), &[1, 5, 8, 17]).unwrap();
        let fine_space = Arc::new(FeSpace::new(Arc::new(fine_mesh)));
        let fine = Operators::new(fine_space.clone(), &ZeroPotential, 1e-12).unwrap();
        let d = interpolate(&fine_space, |p| p.x * (1.0 - p.x) * p.y * (1.0 - p.y) * (1.0 + 5.0 * p.x * p.y)).unwrap();
        let nd = fine.l2_norm(&d);
        let d: Vec<f64> = d.iter().map(|v| v / nd).collect();
        let cs = ConstraintSet::from_donors(vec![donor_of(&fine, d.clone())], &coarse).unwrap();
        let b = cross_mesh_load(&fine_space, &d, coarse.space()).unwrap();
        let x = &cs.representatives[0];
        // x is b's projection up to normalization: M x ∥ b
        let mx = coarse.m().mul_vec(x);
        let s = dot(&mx, &b) / dot(&mx, &mx);
        let res: f64 = b.iter().zip(&mx).map(|(b, m)| (b - s * m).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-12 * crate::fem::norm2(&b));
    }

    #[test]
    fn time_step_selection() {
        let o = ops(DomainId::Square0To2Pi, 6);
        let u = project_and_normalize(&random(o.n_dofs(), 11), &ConstraintSet::empty(), o.m()).unwrap();
        let step = select_time_step(&u, &o, &ConstraintSet::empty(), &GfiParams::default()).unwrap();
        assert_eq!(step.tau, 1.0);
        assert!(step.energy < energy(o.a(), &u));
        // iterate to a discrete eigenfunction, then no step helps
        let mut v = step.coeffs;
        for _ in 0..400 {
            v = gfi_step(&v, 1.0, &o, &ConstraintSet::empty()).unwrap();
        }
        assert!(matches!(
            select_time_step(&v, &o, &ConstraintSet::empty(), &GfiParams::default()),
            Err(Error::Stagnation)
        ));
    }

    #[test]
    fn params_validation() {
        assert!(GfiParams::default().validate().is_ok());
        let bad = GfiParams {
            theta: 1.0,
            ..GfiParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
