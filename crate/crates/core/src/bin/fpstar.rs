use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fpstar::kkt::{self, SolverConfig, SolverKind};
use fpstar::report::{self, Resolution, DEFAULT_PROFILE_TIMES};
use fpstar::verify::{self, Suite};
use fpstar::{builtin_example, load_problem, Error, StarProblem};

const EXIT_NONCONVERGED: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser)]
#[command(name = "fpstar", version, about = "Drift control of a diffusion on a star network by wavelet collocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Discretization {
    #[arg(long = "J1", default_value_t = 2)]
    j1: u32,
    #[arg(long = "J2", default_value_t = 2)]
    j2: u32,
    #[arg(long = "M1", default_value_t = 4)]
    m1: usize,
    #[arg(long = "M2", default_value_t = 4)]
    m2: usize,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// newton or sweep
    #[arg(long, default_value = "sweep")]
    solver: SolverKind,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Newton iteration cap
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Sweep iteration cap
    #[arg(long, default_value_t = 500)]
    max_sweeps: usize,
    /// Sweep relaxation
    #[arg(long, default_value_t = 0.7)]
    omega: f64,
    /// Anderson depth of the sweep (0 = plain relaxed sweep)
    #[arg(long, default_value_t = 20)]
    anderson: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            max_sweeps: self.max_sweeps,
            omega: self.omega,
            anderson: self.anderson,
            ..SolverConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        disc: Discretization,
        #[command(flatten)]
        solver: SolverArgs,
        /// Number of perturbed starts; all distinct converged costs are listed
        #[arg(long, default_value_t = 1)]
        multistart: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV report path (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a built-in example and print its error report
    Example {
        #[arg(long)]
        id: u32,
        #[command(flatten)]
        disc: Discretization,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep all (J1, J2) pairs of a level list for a built-in example
    Table {
        #[arg(long)]
        id: u32,
        /// Comma-separated levels, used for both J1 and J2
        #[arg(long, value_delimiter = ',', default_values_t = [2u32, 3])]
        levels: Vec<u32>,
        #[arg(long = "M", default_value_t = 4)]
        m: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run property suites
    Verify {
        /// basis, dsl, scheme, adjoint, kkt, oracle or all
        #[arg(long, default_value = "all")]
        suite: Suite,
    },
    /// Write state and control profiles at fixed times
    Profiles {
        /// Built-in example id (ignored when --problem is given)
        #[arg(long, default_value_t = 1)]
        id: u32,
        #[arg(long)]
        problem: Option<PathBuf>,
        #[command(flatten)]
        disc: Discretization,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_PROFILE_TIMES)]
        times: Vec<f64>,
        #[arg(long, default_value = "profiles")]
        out: PathBuf,
    },
}

enum Failure {
    Invalid(String),
    Nonconverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain { .. }
            | Error::InvalidSpec(_)
            | Error::DegreeTooLarge(_)
            | Error::DimensionMismatch(_)
            | Error::Parse { .. }
            | Error::NonFinite { .. }
            | Error::InvalidProblem(_)
            | Error::Compatibility { .. }
            | Error::UnknownExample(_)
            | Error::InvalidConfig(_)
            | Error::Io(_)
            | Error::Json(_) => Failure::Invalid(e.to_string()),
            Error::SingularDenominator { .. } | Error::SingularSystem { .. } => Failure::Nonconverged(e.to_string()),
        }
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Invalid(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn resolution(d: &Discretization) -> Resolution {
    Resolution::new(d.j1, d.j2, d.m1, d.m2)
}

fn summarize(run: &report::Run) {
    let r = &run.report;
    eprintln!(
        "{} {} iterations, residual {:.3e}, sigma {:.6e}, {:.2} s",
        r.solver, r.iterations, r.residual, r.sigma, r.wall_time_s
    );
    for (i, (er, eu)) in r.e_rho.iter().zip(&r.e_u).enumerate() {
        eprintln!("  edge {}: e_rho {:.4e}  e_u {:.4e}", i + 1, er, eu);
    }
    if let Some(m) = &run.solve.message {
        eprintln!("  {m}");
    }
}

fn converged(run: &report::Run) -> Result<(), Failure> {
    if run.report.converged {
        Ok(())
    } else {
        Err(Failure::Nonconverged(
            run.solve.message.clone().unwrap_or_else(|| "solver did not converge".into()),
        ))
    }
}

fn solve_problem(
    problem: &StarProblem,
    disc: &Discretization,
    solver: &SolverArgs,
    multistart: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let config = solver.config();
    config.validate()?;
    let run = report::run_problem(problem, resolution(disc), solver.solver, &config)?;
    summarize(&run);
    write_output(out, &run.report.to_csv())?;
    if multistart > 1 {
        let (starts, distinct) = kkt::multistart(&run.collocation, solver.solver, &config, multistart, seed)?;
        for s in &starts {
            eprintln!(
                "  start {}: converged {} after {} iterations, cost {:.12e}",
                s.start, s.converged, s.iterations, s.cost
            );
        }
        eprintln!("distinct converged costs: {}", distinct.len());
        for c in &distinct {
            eprintln!("  {c:.12e}");
        }
    }
    converged(&run)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve {
            problem,
            disc,
            solver,
            multistart,
            seed,
            out,
        } => {
            if multistart == 0 {
                return Err(Failure::Invalid("--multistart must be at least 1".into()));
            }
            let p = load_problem(&problem)?;
            solve_problem(&p, &disc, &solver, multistart, seed, out.as_deref())
        }
        Command::Example { id, disc, solver, out } => {
            let p = builtin_example(id)?;
            solve_problem(&p, &disc, &solver, 1, 0, out.as_deref())
        }
        Command::Table {
            id,
            levels,
            m,
            solver,
            out,
        } => {
            let config = solver.config();
            config.validate()?;
            let table = report::table_sweep(id, &levels, m, solver.solver, &config)?;
            eprint!("{}", table.render());
            write_output(out.as_deref(), &table.to_csv())?;
            if table.all_converged() {
                Ok(())
            } else {
                Err(Failure::Nonconverged("at least one row failed or did not converge".into()))
            }
        }
        Command::Verify { suite } => {
            let checks = verify::run_suite(suite);
            let failed = checks.iter().filter(|c| !c.passed()).count();
            for c in &checks {
                println!("{c}");
            }
            println!("{} checks, {} failed", checks.len(), failed);
            if failed == 0 {
                Ok(())
            } else {
                Err(Failure::Nonconverged(format!("{failed} checks failed")))
            }
        }
        Command::Profiles {
            id,
            problem,
            disc,
            solver,
            times,
            out,
        } => {
            let p = match problem {
                Some(path) => load_problem(&path)?,
                None => builtin_example(id)?,
            };
            let config = solver.config();
            config.validate()?;
            let run = report::run_problem(&p, resolution(&disc), solver.solver, &config)?;
            summarize(&run);
            let files = report::emit_profiles(&run.collocation, &run.solution, &times, &out)?;
            for f in &files {
                println!("{}", f.display());
            }
            converged(&run)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Nonconverged(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_NONCONVERGED)
        }
    }
}
