//! Experiment runs, error tables, CSV output and solution profiles.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::kkt::{self, DiscreteSolution, SolveReport, SolverConfig, SolverKind};
use crate::problem::{builtin_example, StarProblem};
use crate::scheme::Collocation;

/// Lossless scientific formatting (17 significant digits).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Discretization parameters of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub j1: u32,
    pub j2: u32,
    pub m1: usize,
    pub m2: usize,
}

impl Resolution {
    pub fn new(j1: u32, j2: u32, m1: usize, m2: usize) -> Self {
        Self { j1, j2, m1, m2 }
    }

    pub fn specs(&self) -> Result<(BasisSpec, BasisSpec)> {
        Ok((BasisSpec::new(self.j1, self.m1)?, BasisSpec::new(self.j2, self.m2)?))
    }
}

/// Errors, cost and solver metadata of one solve.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub resolution: Resolution,
    /// `max |rho_i - rho_i exact|` over the collocation grid; empty without an exact solution.
    pub e_rho: Vec<f64>,
    pub e_u: Vec<f64>,
    pub sigma: f64,
    pub solver: SolverKind,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub wall_time_s: f64,
}

impl ErrorReport {
    /// Per-edge CSV with columns `edge,e_rho,e_u` followed by one summary row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("J1,J2,M1,M2,edge,e_rho,e_u,sigma,iterations,converged\n");
        let r = self.resolution;
        for i in 0..self.e_rho.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.j1,
                r.j2,
                r.m1,
                r.m2,
                i + 1,
                fmt_float(self.e_rho[i]),
                fmt_float(self.e_u[i]),
                fmt_float(self.sigma),
                self.iterations,
                self.converged
            );
        }
        if self.e_rho.is_empty() {
            let _ = writeln!(
                s,
                "{},{},{},{},,,,{},{},{}",
                r.j1,
                r.j2,
                r.m1,
                r.m2,
                fmt_float(self.sigma),
                self.iterations,
                self.converged
            );
        }
        s
    }
}

/// A finished solve with everything needed for post-processing.
#[derive(Debug, Clone)]
pub struct Run {
    pub collocation: Collocation,
    pub solution: DiscreteSolution,
    pub solve: SolveReport,
    pub report: ErrorReport,
}

/// `l_inf` errors of state and control on the collocation grid.
pub fn grid_errors(coll: &Collocation, sol: &DiscreteSolution) -> Result<(Vec<f64>, Vec<f64>)> {
    if coll.problem.original.exact.is_none() {
        return Ok((Vec::new(), Vec::new()));
    }
    let ev = sol.evaluator(coll)?;
    let n = coll.num_edges();
    let mut e_rho = vec![0.0f64; n];
    let mut e_u = vec![0.0f64; n];
    for i in 0..n {
        let (rho, u) = match (coll.problem.exact_rho(i), coll.problem.exact_u(i)) {
            (Some(r), Some(u)) => (r, u),
            _ => continue,
        };
        for xp in &coll.grids.xs {
            for tp in &coll.grids.ts {
                let r = ev.rho(i, xp.x, tp.t)?.value;
                let c = ev.control(i, xp.x, tp.t)?.0;
                e_rho[i] = e_rho[i].max((r - rho.try_eval(xp.x, tp.t)?).abs());
                e_u[i] = e_u[i].max((c - u.try_eval(xp.x, tp.t)?).abs());
            }
        }
    }
    Ok((e_rho, e_u))
}

/// Solves `problem` at the given resolution and measures it.
pub fn run_problem(
    problem: &StarProblem,
    res: Resolution,
    solver: SolverKind,
    config: &SolverConfig,
) -> Result<Run> {
    let (sx, st) = res.specs()?;
    let coll = Collocation::new(problem.normalize(), sx, st)?.with_eps_den(config.eps_den);
    let start = Instant::now();
    let (solution, solve) = kkt::solve(&coll, solver, config)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let (e_rho, e_u) = grid_errors(&coll, &solution)?;
    let sigma = kkt::cost_sigma(&coll, &solution.a, &solution.u)?;
    let report = ErrorReport {
        resolution: res,
        e_rho,
        e_u,
        sigma,
        solver,
        iterations: solve.iterations,
        converged: solve.converged,
        residual: solve.final_residual,
        wall_time_s,
    };
    Ok(Run {
        collocation: coll,
        solution,
        solve,
        report,
    })
}

pub fn run_example(id: u32, res: Resolution, solver: SolverKind, config: &SolverConfig) -> Result<Run> {
    run_problem(&builtin_example(id)?, res, solver, config)
}

/// One row of a table sweep; failures are kept as messages.
#[derive(Debug, Clone)]
pub struct TableRow {
    pub j1: u32,
    pub j2: u32,
    pub outcome: std::result::Result<ErrorReport, String>,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub id: u32,
    pub rows: Vec<TableRow>,
}

pub const TABLE_HEADER: &str = "J1,J2,e_rho12,e_rho3,e_u12,e_u3,sigma,iterations,wall_time_s";

fn pair_max(v: &[f64], idx: &[usize]) -> f64 {
    idx.iter().filter_map(|&i| v.get(i)).fold(f64::NAN, |a, &b| if a.is_nan() { b } else { a.max(b) })
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{TABLE_HEADER}\n");
        for row in &self.rows {
            match &row.outcome {
                Ok(r) => {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{},{:.3}",
                        row.j1,
                        row.j2,
                        fmt_float(pair_max(&r.e_rho, &[0, 1])),
                        fmt_float(pair_max(&r.e_rho, &[2])),
                        fmt_float(pair_max(&r.e_u, &[0, 1])),
                        fmt_float(pair_max(&r.e_u, &[2])),
                        fmt_float(r.sigma),
                        r.iterations,
                        r.wall_time_s
                    );
                }
                Err(_) => {
                    let _ = writeln!(s, "{},{},,,,,,,", row.j1, row.j2);
                }
            }
        }
        s
    }

    /// Fixed-width rendering for the terminal.
    pub fn render(&self) -> String {
        let mut s = format!(
            "Example {}\n{:>3} {:>3} {:>12} {:>12} {:>12} {:>12} {:>12} {:>6} {:>9}\n",
            self.id, "J1", "J2", "e_rho1,2", "e_rho3", "e_u1,2", "e_u3", "sigma", "iter", "time[s]"
        );
        for row in &self.rows {
            match &row.outcome {
                Ok(r) => {
                    let _ = writeln!(
                        s,
                        "{:>3} {:>3} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>6} {:>9.2}",
                        row.j1,
                        row.j2,
                        pair_max(&r.e_rho, &[0, 1]),
                        pair_max(&r.e_rho, &[2]),
                        pair_max(&r.e_u, &[0, 1]),
                        pair_max(&r.e_u, &[2]),
                        r.sigma,
                        r.iterations,
                        r.wall_time_s
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "{:>3} {:>3} failed: {e}", row.j1, row.j2);
                }
            }
        }
        s
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| matches!(&r.outcome, Ok(rep) if rep.converged))
    }
}

/// Runs every `(J1, J2)` pair from `levels` for a built-in example.
pub fn table_sweep(id: u32, levels: &[u32], m: usize, solver: SolverKind, config: &SolverConfig) -> Result<Table> {
    if levels.is_empty() {
        return Err(Error::InvalidConfig("table sweep needs at least one level".into()));
    }
    let problem = builtin_example(id)?;
    let mut rows = Vec::new();
    for &j1 in levels {
        for &j2 in levels {
            let outcome = run_problem(&problem, Resolution::new(j1, j2, m, m), solver, config)
                .map(|r| r.report)
                .map_err(|e| e.to_string());
            rows.push(TableRow { j1, j2, outcome });
        }
    }
    Ok(Table { id, rows })
}

/// Sample times of the published profile figures.
pub const DEFAULT_PROFILE_TIMES: [f64; 2] = [0.075, 0.975];
pub const PROFILE_POINTS: usize = 201;

/// Writes `profile_edge{i}_t{t}.csv` for every edge and time with columns
/// `x,rho_approx,rho_exact,u_approx` (physical units, `rho_exact` empty
/// when the problem has no exact solution).
pub fn emit_profiles(coll: &Collocation, sol: &DiscreteSolution, times: &[f64], dir: &Path) -> Result<Vec<PathBuf>> {
    let horizon = coll.problem.horizon();
    for &t in times {
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::Domain { what: "profile time", value: t });
        }
    }
    if times.is_empty() {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(dir)?;
    let ev = sol.evaluator(coll)?;
    let mut written = Vec::new();
    for &t in times {
        for i in 0..coll.num_edges() {
            let l = coll.problem.coeffs[i].spec.l;
            let exact = coll.problem.exact_rho(i);
            let mut s = String::from("x,rho_approx,rho_exact,u_approx\n");
            for k in 0..PROFILE_POINTS {
                let xi = k as f64 / (PROFILE_POINTS - 1) as f64;
                let ts = t / horizon;
                let rho = ev.rho(i, xi, ts)?.value;
                let u = ev.control(i, xi, ts)?.0;
                let ex = match &exact {
                    Some(e) => fmt_float(e.try_eval(xi, ts)?),
                    None => String::new(),
                };
                let _ = writeln!(s, "{},{},{},{}", fmt_float(xi * l), fmt_float(rho), ex, fmt_float(u));
            }
            let path = dir.join(format!("profile_edge{}_t{}.csv", i + 1, t));
            std::fs::write(&path, s)?;
            written.push(path);
        }
    }
    Ok(written)
}
