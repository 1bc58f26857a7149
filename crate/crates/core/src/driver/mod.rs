//! The adaptive loop: gradient flow on a fixed mesh until the energy
//! increments stall, then local refinement, then again. Also the
//! sequential multi-state runner and the state-file checks.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

pub use config::ConfigFile;
pub use output::{emit_outputs, write_csv, write_vtk, SavedState, CSV_HEADER, STATE_HEADER};

use crate::adapt::{compute_indicators, dorfler_mark, IndicatorContext};
use crate::error::{Error, Result};
use crate::estimator::global_bound;
use crate::fem::{cross_mesh_load, dot, prolongate, FeSpace, Potential};
use crate::gflow::{
    energy, eigenvalue_estimate, project_and_normalize, project_constraints_to_space, select_time_step,
    ConstraintSet, GfiParams, Operators, WaveFunction, WaveFunctionDonor,
};
use crate::mesh::{generate_initial, refine_twice, Mesh};
use crate::problems::{make_initial_guess, make_problem, InitialGuessSpec, ProblemDef, ProblemName, ProblemOverrides};

pub const DEFAULT_MAX_DOFS: usize = 100_000;
pub const DEFAULT_STEP_CAP: usize = 10_000;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: ProblemName,
    /// 1 for the ground state, k for the (k−1)-th excited state.
    pub state_index: usize,
    pub params: GfiParams,
    pub max_dofs: usize,
    /// Cells per unit length of the initial mesh; the problem default if unset.
    pub initial_n: Option<usize>,
    /// The problem's default for the state if unset.
    pub guess: Option<InitialGuessSpec>,
    pub constraint_files: Vec<PathBuf>,
    /// Known states passed in memory, deflated after those from files.
    pub donors: Vec<SavedState>,
    pub out_dir: Option<PathBuf>,
    pub overrides: ProblemOverrides,
    pub c_interp: f64,
    pub max_steps_per_loop: usize,
}

impl RunConfig {
    pub fn new(problem: ProblemName, state_index: usize) -> RunConfig {
        RunConfig {
            problem,
            state_index,
            params: GfiParams::default(),
            max_dofs: DEFAULT_MAX_DOFS,
            initial_n: None,
            guess: None,
            constraint_files: Vec::new(),
            donors: Vec::new(),
            out_dir: None,
            overrides: ProblemOverrides::default(),
            c_interp: 1.0,
            max_steps_per_loop: DEFAULT_STEP_CAP,
        }
    }

    /// Applies the settings of a config file.
    pub fn apply_file(&mut self, file: &ConfigFile) -> Result<()> {
        if let Some(v) = file.get("theta")? {
            self.params.theta = v;
        }
        if let Some(v) = file.get("gamma")? {
            self.params.gamma_stop = v;
        }
        if let Some(v) = file.get("solver_tol")? {
            self.params.solver_tol = v;
        }
        if let Some(v) = file.get("tau_max")? {
            self.params.tau_max = v;
        }
        if let Some(v) = file.get("backtrack_cap")? {
            self.params.backtrack_cap = v;
        }
        if let Some(v) = file.get("max_dofs")? {
            self.max_dofs = v;
        }
        if let Some(v) = file.get("initial_n")? {
            self.initial_n = Some(v);
        }
        if let Some(v) = file.get("c_interp")? {
            self.c_interp = v;
        }
        if let Some(v) = file.get("max_steps_per_loop")? {
            self.max_steps_per_loop = v;
        }
        if let Some(g) = file.gaussian_wells()? {
            self.overrides.gaussian = Some(g);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.state_index == 0 {
            return Err(Error::InvalidArgument("state index starts at 1".into()));
        }
        let known = self.constraint_files.len() + self.donors.len();
        if known != self.state_index - 1 {
            return Err(Error::InvalidArgument(format!(
                "state {} needs {} known states, got {known}",
                self.state_index,
                self.state_index - 1
            )));
        }
        if !(self.c_interp > 0.0) {
            return Err(Error::InvalidArgument(format!("c_interp {} must be positive", self.c_interp)));
        }
        if self.max_steps_per_loop == 0 {
            return Err(Error::InvalidArgument("max_steps_per_loop must be positive".into()));
        }
        Ok(())
    }
}

/// One row of `run.csv`: the state at the end of the flow on one mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub loop_index: usize,
    pub n_dofs: usize,
    pub gfi_steps: usize,
    pub energy: f64,
    pub eigenvalue: f64,
    pub estimator: f64,
    pub inc: f64,
    pub delta_e: f64,
    pub wall_ms: u128,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceKind {
    /// The normalized initial guess.
    Initial,
    /// An accepted gradient flow step.
    Gfi,
    /// The prolongated and re-projected iterate on a new mesh.
    Embedding,
}

/// Diagnostics of one iterate.
#[derive(Clone, Debug)]
pub struct TraceEntry {
    pub kind: TraceKind,
    pub loop_index: usize,
    pub energy: f64,
    /// For embeddings, the energy on the coarse mesh; otherwise the energy
    /// of the previous iterate (NaN for the initial guess).
    pub previous_energy: f64,
    /// |‖ψ‖ − 1|.
    pub norm_deviation: f64,
    /// max_i |(ψ, ψ_i)| against the constraint representatives.
    pub max_overlap: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub problem: ProblemName,
    pub state: WaveFunction,
    pub energy: f64,
    pub eigenvalue: f64,
    pub records: Vec<RunRecord>,
    pub trace: Vec<TraceEntry>,
    pub constraints: ConstraintSet,
}

impl RunOutput {
    pub fn saved(&self) -> SavedState {
        SavedState {
            mesh: self.state.space.mesh().clone(),
            values: self.state.vertex_values(),
            eigenvalue: self.eigenvalue,
            energy: self.energy,
        }
    }
}

/// A saved state as a deflation donor of `problem`.
pub fn donor_from_saved(saved: &SavedState, problem: &ProblemDef) -> Result<WaveFunctionDonor> {
    let area: f64 = (0..saved.mesh.n_triangles()).map(|t| saved.mesh.area(t)).sum();
    let expected = problem.domain.area();
    if (area - expected).abs() > 1e-10 * expected {
        return Err(Error::InvalidArgument(format!(
            "saved state covers area {area}, the domain of {} has {expected}",
            problem.name
        )));
    }
    let space = Arc::new(FeSpace::new(Arc::new(saved.mesh.clone())));
    let coeffs = space.from_vertex_values(&saved.values);
    Ok(WaveFunctionDonor {
        state: WaveFunction::new(space, coeffs),
        eigenvalue: saved.eigenvalue,
    })
}

fn diagnostics(
    kind: TraceKind,
    loop_index: usize,
    u: &[f64],
    e: f64,
    previous: f64,
    ops: &Operators,
    cs: &ConstraintSet,
) -> TraceEntry {
    TraceEntry {
        kind,
        loop_index,
        energy: e,
        previous_energy: previous,
        norm_deviation: (ops.l2_norm(u) - 1.0).abs(),
        max_overlap: cs.max_overlap(u),
    }
}

fn indicator_context<'a>(
    mesh: &'a Mesh,
    potential: &'a (dyn Potential + Send + 'a),
    ops: &Operators,
    cs: &ConstraintSet,
    u: &[f64],
    e: f64,
) -> IndicatorContext<'a, dyn Potential + Send + 'a> {
    let space = ops.space();
    IndicatorContext {
        mesh,
        potential,
        psi: space.to_vertex_values(u),
        energy: e,
        constraints: cs.representatives.iter().map(|r| space.to_vertex_values(r)).collect(),
        constraint_overlaps: cs.overlaps(u),
        constraint_energies: cs.representatives.iter().map(|r| 2.0 * energy(ops.a(), r)).collect(),
    }
}

/// Runs the adaptive gradient flow for one state.
pub fn run_adaptive(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let start = Instant::now();
    let problem = make_problem(config.problem, &config.overrides);
    let potential: &(dyn Potential + Send) = &*problem.potential;
    let params = &config.params;

    let mut donors = Vec::with_capacity(config.state_index - 1);
    for path in &config.constraint_files {
        donors.push(donor_from_saved(&SavedState::load(path)?, &problem)?);
    }
    for saved in &config.donors {
        donors.push(donor_from_saved(saved, &problem)?);
    }

    let n0 = config.initial_n.unwrap_or(problem.initial_n);
    let mut mesh = Arc::new(generate_initial(problem.domain, n0)?);
    let mut space = Arc::new(FeSpace::new(mesh.clone()));
    if config.max_dofs <= space.n_dofs() {
        return Err(Error::InvalidArgument(format!(
            "max_dofs {} does not exceed the {} initial dofs",
            config.max_dofs,
            space.n_dofs()
        )));
    }
    let mut ops = Operators::new(space.clone(), potential, params.solver_tol)?;
    let mut cs = ConstraintSet::from_donors(donors, &ops)?;
    let guess = config.guess.clone().unwrap_or_else(|| problem.default_guess(config.state_index));
    let mut u = make_initial_guess(&guess, &ops, &cs)?;
    let mut e = energy(ops.a(), &u);

    let mut trace = vec![diagnostics(TraceKind::Initial, 0, &u, e, f64::NAN, &ops, &cs)];
    let mut records = Vec::new();
    let mut level = 0;
    loop {
        let e_start = e;
        let (mut steps, mut delta_e) = (0usize, 0.0);
        let mut inc: f64;
        loop {
            match select_time_step(&u, &ops, &cs, params) {
                Ok(step) => {
                    inc = e - step.energy;
                    delta_e = e_start - step.energy;
                    log::debug!("loop {level} step {}: tau {:e}, energy {:.16e}", steps + 1, step.tau, step.energy);
                    trace.push(diagnostics(TraceKind::Gfi, level, &step.coeffs, step.energy, e, &ops, &cs));
                    u = step.coeffs;
                    e = step.energy;
                    steps += 1;
                }
                Err(Error::Stagnation) => {
                    inc = 0.0;
                    break;
                }
                Err(err) => return Err(err),
            }
            if inc <= params.gamma_stop * delta_e {
                break;
            }
            if steps >= config.max_steps_per_loop {
                return Err(Error::CapExceeded { level, steps });
            }
        }

        let bound = global_bound(&ops, &u, potential, config.c_interp)?;
        let record = RunRecord {
            loop_index: level,
            n_dofs: space.n_dofs(),
            gfi_steps: steps,
            energy: e,
            eigenvalue: problem.report_scaling * eigenvalue_estimate(ops.a(), ops.m(), &u),
            estimator: bound.total_bound,
            inc,
            delta_e,
            wall_ms: start.elapsed().as_millis(),
        };
        log::info!(
            "{} state {} loop {}: {} dofs, {} steps, eigenvalue {:.10}, estimator {:.3e}",
            problem.name,
            config.state_index,
            level,
            record.n_dofs,
            steps,
            record.eigenvalue,
            record.estimator
        );
        records.push(record);
        if space.n_dofs() > config.max_dofs {
            break;
        }

        let ctx = indicator_context(&mesh, potential, &ops, &cs, &u, e);
        let marked = dorfler_mark(&compute_indicators(&ctx), params.theta);
        drop(ctx);
        let (fine, map) = refine_twice(&mesh, &marked)?;
        let fine_mesh = Arc::new(fine);
        let fine_space = Arc::new(FeSpace::new(fine_mesh.clone()));
        let fine_u = prolongate(&u, &space, &fine_space, &map)?;
        ops = Operators::new(fine_space.clone(), potential, params.solver_tol)?;
        cs = project_constraints_to_space(&cs, &ops)?;
        u = project_and_normalize(&fine_u, &cs, ops.m())?;
        level += 1;
        let coarse_e = e;
        e = energy(ops.a(), &u);
        trace.push(diagnostics(TraceKind::Embedding, level, &u, e, coarse_e, &ops, &cs));
        mesh = fine_mesh;
        space = fine_space;
    }

    let eigenvalue = problem.report_scaling * eigenvalue_estimate(ops.a(), ops.m(), &u);
    let out = RunOutput {
        problem: problem.name,
        state: WaveFunction::new(space, u),
        energy: e,
        eigenvalue,
        records,
        trace,
        constraints: cs,
    };
    if let Some(dir) = &config.out_dir {
        emit_outputs(&out.records, &out.saved(), dir)?;
    }
    Ok(out)
}

/// L² product of two states on different meshes, integrated exactly on the
/// overlay of the meshes.
pub fn cross_overlap(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    let load = cross_mesh_load(&a.space, &a.coeffs, &b.space)?;
    Ok(dot(&load, &b.coeffs))
}

#[derive(Clone, Debug)]
pub struct SequenceOutput {
    pub states: Vec<RunOutput>,
    /// (i, j, (ψ_i, ψ_j)) for i < j, zero-based.
    pub overlaps: Vec<(usize, usize, f64)>,
}

/// States 1..=k in turn, each deflating the ones before it. With an output
/// directory, state j is written to `<out>/state_j`.
pub fn run_sequence(base: &RunConfig, k_states: usize) -> Result<SequenceOutput> {
    if k_states == 0 {
        return Err(Error::InvalidArgument("need at least one state".into()));
    }
    let mut states: Vec<RunOutput> = Vec::with_capacity(k_states);
    for j in 1..=k_states {
        let mut cfg = base.clone();
        cfg.state_index = j;
        cfg.constraint_files.clear();
        cfg.donors = states.iter().map(RunOutput::saved).collect();
        cfg.out_dir = base.out_dir.as_ref().map(|d| d.join(format!("state_{j}")));
        states.push(run_adaptive(&cfg)?);
    }
    let mut overlaps = Vec::new();
    for j in 0..k_states {
        for i in 0..j {
            overlaps.push((i, j, cross_overlap(&states[i].state, &states[j].state)?));
        }
    }
    Ok(SequenceOutput { states, overlaps })
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub n_dofs: usize,
    pub recorded_energy: f64,
    pub energy: f64,
    pub recorded_eigenvalue: f64,
    pub eigenvalue: f64,
    pub l2_norm: f64,
    /// (ψ, φ_i) for each given constraint state.
    pub overlaps: Vec<f64>,
}

/// Reloads a state and recomputes its energy, eigenvalue, norm and overlaps
/// with other saved states.
pub fn verify(
    state_path: &Path,
    problem: ProblemName,
    overrides: &ProblemOverrides,
    constraint_files: &[PathBuf],
) -> Result<VerifyReport> {
    let def = make_problem(problem, overrides);
    let saved = SavedState::load(state_path)?;
    let donor = donor_from_saved(&saved, &def)?;
    let ops = Operators::new(donor.state.space.clone(), &*def.potential, GfiParams::default().solver_tol)?;
    let u = &donor.state.coeffs;
    let mut overlaps = Vec::with_capacity(constraint_files.len());
    for path in constraint_files {
        let other = donor_from_saved(&SavedState::load(path)?, &def)?;
        overlaps.push(cross_overlap(&other.state, &donor.state)?);
    }
    Ok(VerifyReport {
        n_dofs: ops.n_dofs(),
        recorded_energy: saved.energy,
        energy: energy(ops.a(), u),
        recorded_eigenvalue: saved.eigenvalue,
        eigenvalue: def.report_scaling * eigenvalue_estimate(ops.a(), ops.m(), u),
        l2_norm: ops.l2_norm(u),
        overlaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(problem: ProblemName, state: usize, max_dofs: usize) -> RunConfig {
        let mut c = RunConfig::new(problem, state);
        c.max_dofs = max_dofs;
        c
    }

    #[test]
    fn config_validation() {
        assert!(small(ProblemName::LShapeLaplace, 2, 500).validate().is_err());
        assert!(small(ProblemName::LShapeLaplace, 0, 500).validate().is_err());
        let mut c = small(ProblemName::LShapeLaplace, 1, 500);
        c.params.theta = 1.0;
        assert!(c.validate().is_err());
        let mut c = small(ProblemName::LShapeLaplace, 1, 10);
        c.initial_n = Some(4);
        assert!(matches!(run_adaptive(&c), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn lshape_ground_state_small_run() {
        let out = run_adaptive(&small(ProblemName::LShapeLaplace, 1, 2000)).unwrap();
        let r = &out.records;
        assert!(r.len() >= 3);
        assert!(r.last().unwrap().n_dofs > 2000);
        for w in out.trace.windows(2) {
            match w[1].kind {
                TraceKind::Gfi => assert!(w[1].energy < w[0].energy),
                TraceKind::Embedding => {
                    let rel = (w[1].energy - w[1].previous_energy).abs() / w[1].previous_energy;
                    assert!(rel <= 1e-12, "embedding drift {rel}");
                }
                TraceKind::Initial => unreachable!(),
            }
        }
        for w in r.windows(2) {
            assert!(w[1].energy <= w[0].energy);
        }
        // conforming Galerkin eigenvalues lie above the exact one
        let lambda = r.last().unwrap().eigenvalue;
        assert!(lambda > 9.6397238 && lambda < 9.6397238 * 1.02, "{lambda}");
    }

    #[test]
    fn first_step_of_a_loop_starts_from_the_loop_baseline() {
        let out = run_adaptive(&small(ProblemName::LShapeLaplace, 1, 300)).unwrap();
        // inc of the first step is measured from the embedded iterate, which
        // is also the ΔE baseline
        for w in out.trace.windows(2) {
            if w[0].kind != TraceKind::Gfi && w[1].kind == TraceKind::Gfi {
                assert_eq!(w[1].previous_energy, w[0].energy);
            }
        }
        for r in &out.records {
            assert!(r.inc <= r.delta_e);
            assert!(r.gfi_steps < 2 || r.inc <= 0.1 * r.delta_e);
        }
    }

    #[test]
    fn sequence_of_one_matches_run() {
        let c = small(ProblemName::LShapeLaplace, 1, 400);
        let a = run_adaptive(&c).unwrap();
        let s = run_sequence(&c, 1).unwrap();
        assert!(s.overlaps.is_empty());
        assert_eq!(a.state.coeffs, s.states[0].state.coeffs);
        let strip = |r: &[RunRecord]| r.iter().map(|x| RunRecord { wall_ms: 0, ..x.clone() }).collect::<Vec<_>>();
        assert_eq!(strip(&a.records), strip(&s.states[0].records));
    }

    #[test]
    fn saved_state_verifies_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(ProblemName::CoulombSingular, 1, 300);
        c.out_dir = Some(dir.path().to_path_buf());
        let out = run_adaptive(&c).unwrap();
        let path = dir.path().join("state.gflow");
        let rep = verify(&path, ProblemName::CoulombSingular, &ProblemOverrides::default(), &[]).unwrap();
        assert_eq!(rep.energy, out.energy);
        assert_eq!(rep.recorded_energy, out.energy);
        assert_eq!(rep.eigenvalue, out.eigenvalue);
        assert!((rep.l2_norm - 1.0).abs() < 1e-12);
        // wrong domain
        assert!(verify(&path, ProblemName::LShapeLaplace, &ProblemOverrides::default(), &[]).is_err());
    }
}
