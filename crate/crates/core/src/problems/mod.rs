//! Built-in experiments: domain, potential, initial guesses and reference
//! values.

mod potentials;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{interpolate, Potential, ZeroPotential};
use crate::gflow::{project_and_normalize, ConstraintSet, Operators};
use crate::mesh::{DomainId, Point2};

pub use potentials::{CoulombPotential, GaussianWells};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemName {
    LShapeLaplace,
    GaussianWells,
    CoulombSingular,
}

impl ProblemName {
    pub const ALL: [ProblemName; 3] = [
        ProblemName::LShapeLaplace,
        ProblemName::GaussianWells,
        ProblemName::CoulombSingular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemName::LShapeLaplace => "lshape_laplace",
            ProblemName::GaussianWells => "gaussian_wells",
            ProblemName::CoulombSingular => "coulomb_singular",
        }
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemName::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownProblem(s.to_string()))
    }
}

/// How the first iterate is formed before projection and normalization.
#[derive(Clone)]
pub enum InitialGuessSpec {
    /// Nodal interpolant of a function.
    Function {
        label: &'static str,
        f: Arc<dyn Fn(Point2) -> f64 + Send + Sync>,
    },
    /// The same value at every interior node.
    Constant(f64),
}

impl fmt::Debug for InitialGuessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialGuessSpec::Function { label, .. } => write!(f, "Function({label})"),
            InitialGuessSpec::Constant(c) => write!(f, "Constant({c})"),
        }
    }
}

impl InitialGuessSpec {
    /// `|sin πx sin πy| sign(y − 1)`, odd about y = 1.
    pub fn lshape_antisymmetric() -> Self {
        use std::f64::consts::PI;
        InitialGuessSpec::Function {
            label: "a",
            f: Arc::new(|p: Point2| {
                let s = ((PI * p.x).sin() * (PI * p.y).sin()).abs();
                if p.y > 1.0 {
                    s
                } else if p.y < 1.0 {
                    -s
                } else {
                    0.0
                }
            }),
        }
    }

    /// `sin πx sin πy`.
    pub fn lshape_product() -> Self {
        use std::f64::consts::PI;
        InitialGuessSpec::Function {
            label: "b",
            f: Arc::new(|p: Point2| (PI * p.x).sin() * (PI * p.y).sin()),
        }
    }

    pub fn constant() -> Self {
        InitialGuessSpec::Constant(1.0)
    }

    /// Parses `a`, `b` or `c` (constant).
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Self::lshape_antisymmetric()),
            "b" => Ok(Self::lshape_product()),
            "c" | "constant" => Ok(Self::constant()),
            other => Err(Error::InvalidArgument(format!("unknown initial guess `{other}`"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            InitialGuessSpec::Function { label, .. } => label,
            InitialGuessSpec::Constant(_) => "c",
        }
    }
}

/// Parameters that may be overridden from a config file.
#[derive(Clone, Debug, Default)]
pub struct ProblemOverrides {
    pub gaussian: Option<GaussianWells>,
}

pub struct ProblemDef {
    pub name: ProblemName,
    pub domain: DomainId,
    pub potential: Arc<dyn Potential + Send>,
    /// Default cells per unit length of the initial mesh.
    pub initial_n: usize,
    /// Reference eigenvalues on the reporting scale, lowest first.
    pub references: Vec<f64>,
    /// Reported eigenvalue = scaling · uᵀAu.
    pub report_scaling: f64,
}

impl fmt::Debug for ProblemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDef")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("initial_n", &self.initial_n)
            .finish()
    }
}

impl ProblemDef {
    /// The guess used for a state when none is requested explicitly.
    pub fn default_guess(&self, state_index: usize) -> InitialGuessSpec {
        match (self.name, state_index) {
            (ProblemName::LShapeLaplace, 2) => InitialGuessSpec::lshape_antisymmetric(),
            (ProblemName::LShapeLaplace, 3) => InitialGuessSpec::lshape_product(),
            _ => InitialGuessSpec::constant(),
        }
    }
}

pub fn make_problem(name: ProblemName, overrides: &ProblemOverrides) -> ProblemDef {
    match name {
        ProblemName::LShapeLaplace => ProblemDef {
            name,
            domain: DomainId::LShape,
            potential: Arc::new(ZeroPotential),
            initial_n: 4,
            references: reference_eigenvalues(name),
            report_scaling: 2.0,
        },
        ProblemName::GaussianWells => ProblemDef {
            name,
            domain: DomainId::Square0To2Pi,
            potential: Arc::new(overrides.gaussian.clone().unwrap_or_default()),
            initial_n: 8,
            references: Vec::new(),
            report_scaling: 1.0,
        },
        ProblemName::CoulombSingular => ProblemDef {
            name,
            domain: DomainId::CenteredSquare,
            potential: Arc::new(CoulombPotential),
            initial_n: 8,
            references: Vec::new(),
            report_scaling: 1.0,
        },
    }
}

/// Lowest eigenvalues of −Δ on the L-shape (0,2)² ∖ [1,2]×[0,1]; empty for
/// the other problems.
pub fn reference_eigenvalues(name: ProblemName) -> Vec<f64> {
    match name {
        ProblemName::LShapeLaplace => vec![
            9.6397238,
            15.1972519,
            2.0 * std::f64::consts::PI * std::f64::consts::PI,
            29.5214811,
        ],
        _ => Vec::new(),
    }
}

/// Interpolates the guess, removes the constraint components and normalizes.
pub fn make_initial_guess(
    guess: &InitialGuessSpec,
    ops: &Operators,
    constraints: &ConstraintSet,
) -> Result<Vec<f64>> {
    let raw = match guess {
        InitialGuessSpec::Function { f, .. } => interpolate(ops.space(), |p| f(p))?,
        InitialGuessSpec::Constant(c) => vec![*c; ops.n_dofs()],
    };
    project_and_normalize(&raw, constraints, ops.m())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FeSpace;
    use crate::gflow::{WaveFunction, WaveFunctionDonor};
    use crate::mesh::generate_initial;

    fn ops_on(domain: DomainId, n: usize, pot: &dyn Potential) -> Operators {
        let space = Arc::new(FeSpace::new(Arc::new(generate_initial(domain, n).unwrap())));
        Operators::new(space, pot, 1e-12).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for p in ProblemName::ALL {
            assert_eq!(p.name().parse::<ProblemName>().unwrap(), p);
        }
        assert!(matches!("nope".parse::<ProblemName>(), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn potentials_of_problems() {
        let o = ProblemOverrides::default();
        let c = make_problem(ProblemName::CoulombSingular, &o);
        assert_eq!(c.potential.value(Point2::new(0.5, 0.0)), 1.0);
        let l = make_problem(ProblemName::LShapeLaplace, &o);
        assert_eq!(l.potential.value(Point2::new(0.3, 1.7)), 0.0);
        assert_eq!(l.report_scaling, 2.0);
        assert!(reference_eigenvalues(ProblemName::GaussianWells).is_empty());
        let r = reference_eigenvalues(ProblemName::LShapeLaplace);
        assert!((r[2] - 19.7392088).abs() < 1e-7);
    }

    #[test]
    fn constant_guess_on_one_dof() {
        let o = ops_on(DomainId::UnitSquare, 2, &ZeroPotential);
        let u = make_initial_guess(&InitialGuessSpec::constant(), &o, &ConstraintSet::empty()).unwrap();
        assert!((u[0] - 1.0 / 0.125f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn guesses_on_lshape() {
        let o = ops_on(DomainId::LShape, 4, &ZeroPotential);
        let b = make_initial_guess(&InitialGuessSpec::lshape_product(), &o, &ConstraintSet::empty()).unwrap();
        assert!((o.l2_norm(&b) - 1.0).abs() < 1e-12);
        let raw = interpolate(o.space(), |p| {
            (std::f64::consts::PI * p.x).sin() * (std::f64::consts::PI * p.y).sin()
        })
        .unwrap();
        let n = o.l2_norm(&raw);
        let mut scaled: Vec<f64> = raw.iter().map(|v| v / n).collect();
        crate::gflow::fix_sign(&mut scaled);
        for (x, y) in b.iter().zip(&scaled) {
            assert!((x - y).abs() < 1e-14);
        }
        // deflating a ground-state-like donor
        let ground = make_initial_guess(&InitialGuessSpec::constant(), &o, &ConstraintSet::empty()).unwrap();
        let cs = ConstraintSet::from_donors(
            vec![WaveFunctionDonor {
                state: WaveFunction::new(o.space().clone(), ground),
                eigenvalue: 0.0,
            }],
            &o,
        )
        .unwrap();
        let a = make_initial_guess(&InitialGuessSpec::lshape_antisymmetric(), &o, &cs).unwrap();
        assert!(cs.max_overlap(&a) < 1e-12);
        assert!(matches!(
            make_initial_guess(&InitialGuessSpec::constant(), &o, &cs),
            Err(Error::DegenerateIterate)
        ));
    }

    #[test]
    fn guess_parsing() {
        assert_eq!(InitialGuessSpec::parse("a").unwrap().label(), "a");
        assert_eq!(InitialGuessSpec::parse("constant").unwrap().label(), "c");
        assert!(InitialGuessSpec::parse("z").is_err());
    }
}
