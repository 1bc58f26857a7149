use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gflow::driver::{run_adaptive, run_sequence, verify, ConfigFile, RunConfig};
use gflow::problems::{InitialGuessSpec, ProblemName, ProblemOverrides};
use gflow::Result;

#[derive(Parser)]
#[command(name = "gflow", version, about = "Adaptive gradient flow eigensolver for Schrodinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one state.
    Run {
        #[command(flatten)]
        common: Common,
        /// 1 for the ground state, k for the (k-1)-th excited state.
        #[arg(long, default_value_t = 1)]
        state: usize,
        /// Saved lower states to deflate, one per known state.
        #[arg(long, num_args = 1..)]
        constraints: Vec<PathBuf>,
    },
    /// Compute states 1..=k in turn, each deflating the previous ones.
    Sequence {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        states: usize,
    },
    /// Reload a saved state and recompute its diagnostics.
    Verify {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        problem: ProblemName,
        /// Other saved states to measure overlaps against.
        #[arg(long, num_args = 1..)]
        constraints: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    problem: ProblemName,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    max_dofs: Option<usize>,
    #[arg(long)]
    initial_n: Option<usize>,
    /// Initial guess: a, b or c (constant).
    #[arg(long)]
    guess: Option<String>,
    /// key = value file with potential parameters and solver settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn to_config(&self, state: usize) -> Result<RunConfig> {
        let mut c = RunConfig::new(self.problem, state);
        if let Some(path) = &self.config {
            c.apply_file(&ConfigFile::load(path)?)?;
        }
        if let Some(v) = self.theta {
            c.params.theta = v;
        }
        if let Some(v) = self.gamma {
            c.params.gamma_stop = v;
        }
        if let Some(v) = self.max_dofs {
            c.max_dofs = v;
        }
        if self.initial_n.is_some() {
            c.initial_n = self.initial_n;
        }
        if let Some(g) = &self.guess {
            c.guess = Some(InitialGuessSpec::parse(g)?);
        }
        c.out_dir = self.out.clone();
        Ok(c)
    }
}

fn print_final(label: &str, out: &gflow::driver::RunOutput) {
    let last = out.records.last().expect("at least one loop");
    println!(
        "{label}: eigenvalue {:.12} energy {:.16e} dofs {} loops {} estimator {:.6e}",
        out.eigenvalue,
        out.energy,
        last.n_dofs,
        out.records.len(),
        last.estimator
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            common,
            state,
            constraints,
        } => {
            let mut c = common.to_config(state)?;
            c.constraint_files = constraints;
            let out = run_adaptive(&c)?;
            print_final(&format!("state {state}"), &out);
        }
        Command::Sequence { common, states } => {
            let seq = run_sequence(&common.to_config(1)?, states)?;
            for (j, out) in seq.states.iter().enumerate() {
                print_final(&format!("state {}", j + 1), out);
            }
            for (i, j, v) in &seq.overlaps {
                println!("overlap ({}, {}) = {:.3e}", i + 1, j + 1, v);
            }
        }
        Command::Verify {
            state,
            problem,
            constraints,
            config,
        } => {
            let mut overrides = ProblemOverrides::default();
            if let Some(path) = config {
                overrides.gaussian = ConfigFile::load(&path)?.gaussian_wells()?;
            }
            let r = verify(&state, problem, &overrides, &constraints)?;
            println!("dofs        {}", r.n_dofs);
            println!("energy      {:.16e} (recorded {:.16e})", r.energy, r.recorded_energy);
            println!("eigenvalue  {:.16e} (recorded {:.16e})", r.eigenvalue, r.recorded_eigenvalue);
            println!("l2 norm     {:.16e}", r.l2_norm);
            for (path, v) in constraints.iter().zip(&r.overlaps) {
                println!("overlap     {:.3e} with {}", v, path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
