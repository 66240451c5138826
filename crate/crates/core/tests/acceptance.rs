//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints one line; exits non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use fpstar::fd::{FdGrid, OuterCondition};
use fpstar::kkt::{self, SolverConfig, SolverKind};
use fpstar::report::{run_example, table_sweep, Resolution};
use fpstar::verify::{
    bound_active_problem, bump_problem, clamped_fraction, collocation, fd_gradient_check, fd_self_convergence,
    fd_taylor_check, integral_identity_error, orthonormality_error, polynomial_reproduction_error, probe_control,
    superposition_error, vi_violation, wavelet_fd_agreement, wavelet_gradient_check, wavelet_taylor_check,
};
use fpstar::{builtin_example, BasisSpec, Result};

// Pinned tolerances.
const C1_E_RHO: f64 = 1e-7;
const C1_E_U: f64 = 1e-4;
const C1_SIGMA: f64 = 1e-10;
const C1_SECONDS: f64 = 60.0;
const C2_REFERENCE: [(u32, f64); 3] = [(2, 1.5e-2), (3, 8.5e-4), (4, 5.7e-5)];
const C2_FACTOR: f64 = 10.0;
const C2_FINAL_SIGMA: f64 = 1e-6;
const C2_SECONDS: f64 = 300.0;
const C3_ORDER: f64 = 1.8;
const C3_RELATIVE: f64 = 1e-4;
const C4_ORDER: f64 = 1.8;
const C5_VIOLATION: f64 = 1e-10;
const C5_BOUND: f64 = 1e-3;
const C5_CLAMPED: f64 = 0.1;
const C6_SUPERPOSITION: f64 = 1e-9;
const C6_ORDER: f64 = 1.9;
const C6_AGREEMENT: f64 = 1e-4;
const C7_DRIFT: f64 = 1e-8;
const C7_IDENTITY: f64 = 1e-6;
const C8_IDENTITY: f64 = 1e-12;
const C8_REPRODUCTION: f64 = 1e-13;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn criterion_1() -> Result<Outcome> {
    let mut pass = true;
    let mut detail = Vec::new();
    for j in [2, 3] {
        let run = run_example(1, Resolution::new(j, j, 4, 4), SolverKind::Sweep, &SolverConfig::default())?;
        let r = &run.report;
        let e_rho = r.e_rho.iter().copied().fold(0.0, f64::max);
        let e_u = r.e_u.iter().copied().fold(0.0, f64::max);
        pass &= r.converged && e_rho <= C1_E_RHO && e_u <= C1_E_U && r.sigma <= C1_SIGMA && r.wall_time_s <= C1_SECONDS;
        detail.push(format!(
            "J={j}: e_rho {e_rho:.2e} e_u {e_u:.2e} sigma {:.2e} {:.1}s",
            r.sigma, r.wall_time_s
        ));
    }
    outcome(pass, detail.join("; "))
}

fn criterion_2() -> Result<Outcome> {
    let start = Instant::now();
    let table = table_sweep(2, &[2, 3, 4], 4, SolverKind::Sweep, &SolverConfig::default())?;
    let seconds = start.elapsed().as_secs_f64();
    let mut pass = table.rows.len() == 9 && table.all_converged() && seconds <= C2_SECONDS;
    let mut detail = Vec::new();
    let mut sigmas = Vec::new();
    for (j, reference) in C2_REFERENCE {
        let row = table.rows.iter().find(|r| r.j1 == j && r.j2 == j).expect("diagonal row");
        let r = row.outcome.as_ref().map_err(|e| fpstar::Error::InvalidConfig(e.clone()))?;
        let e = r.e_rho[0];
        pass &= e >= reference / C2_FACTOR && e <= reference * C2_FACTOR;
        sigmas.push(r.sigma);
        detail.push(format!("J={j}: e_rho1 {e:.2e} (ref {reference:.1e}) sigma {:.2e}", r.sigma));
    }
    pass &= sigmas.windows(2).all(|w| w[1] < w[0]) && sigmas[2] <= C2_FINAL_SIGMA;
    detail.push(format!("9 rows in {seconds:.1}s"));
    outcome(pass, detail.join("; "))
}

fn criterion_3() -> Result<Outcome> {
    let c = collocation(&builtin_example(1)?, 2, 2, 4)?;
    let w = wavelet_gradient_check(&c, 5, 11)?;
    let f = fd_gradient_check(&builtin_example(1)?, &FdGrid::new(20, 20, 0.5)?, 5, 13)?;
    let pass = w.min_order() >= C3_ORDER
        && w.worst_best_relative() <= C3_RELATIVE
        && f.min_order() >= C3_ORDER
        && f.worst_best_relative() <= C3_RELATIVE;
    outcome(
        pass,
        format!(
            "wavelet order {:.2} rel {:.1e}; FD order {:.2} rel {:.1e}",
            w.min_order(),
            w.worst_best_relative(),
            f.min_order(),
            f.worst_best_relative()
        ),
    )
}

fn criterion_4() -> Result<Outcome> {
    let c = collocation(&builtin_example(1)?, 2, 2, 4)?;
    let w = wavelet_taylor_check(&c, 3, 7)?;
    let f = fd_taylor_check(&builtin_example(1)?, &FdGrid::new(20, 20, 0.5)?, 3, 17)?;
    let pass = w.min_order() >= C4_ORDER && f.min_order() >= C4_ORDER;
    outcome(pass, format!("wavelet order {:.2}; FD order {:.2}", w.min_order(), f.min_order()))
}

fn criterion_5() -> Result<Outcome> {
    let config = SolverConfig::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for id in [1, 2] {
        let c = collocation(&builtin_example(id)?, 2, 2, 4)?;
        let (sol, rep) = kkt::solve(&c, SolverKind::Sweep, &config)?;
        let v = vi_violation(&c, &sol)?;
        pass &= rep.converged && v <= C5_VIOLATION;
        detail.push(format!("Example {id} violation {v:.1e}"));
    }
    let c = collocation(&bound_active_problem(C5_BOUND)?, 2, 2, 4)?;
    let (sol, rep) = kkt::solve(&c, SolverKind::Sweep, &config)?;
    let v = vi_violation(&c, &sol)?;
    let f = clamped_fraction(&c, &sol)?;
    pass &= rep.converged && v <= C5_VIOLATION && f >= C5_CLAMPED;
    detail.push(format!("bounds +-{C5_BOUND:.0e}: violation {v:.1e}, clamped {:.0}%", 100.0 * f));
    outcome(pass, detail.join("; "))
}

fn criterion_6() -> Result<Outcome> {
    let s = superposition_error(2, 4)?;
    let orders = fd_self_convergence(&[25, 50, 100, 200], 100)?;
    let order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let a = wavelet_fd_agreement(2, 4, 200, 100)?;
    let pass = s <= C6_SUPERPOSITION && order >= C6_ORDER && a <= C6_AGREEMENT;
    outcome(pass, format!("superposition {s:.1e}; FD order {order:.2}; wavelet vs FD {a:.1e}"))
}

fn criterion_7() -> Result<Outcome> {
    let p = bump_problem()?;
    let grid = FdGrid::new(100, 200, 0.5)?;
    let u = fpstar::fd::FdField::sample(&p, &grid, &vec![probe_control(); 3])?;
    let r = fpstar::fd::mass_balance(&p, &u, &grid.with_outer(OuterCondition::Reflecting))?;
    let d = fpstar::fd::mass_balance(&p, &u, &grid)?;
    let drift = r.drift / (1.0 + r.mass[0].abs());
    let pass = drift <= C7_DRIFT && d.identity_error <= C7_IDENTITY;
    outcome(pass, format!("reflecting drift {drift:.1e}; Dirichlet identity {:.1e}", d.identity_error))
}

fn criterion_8() -> Result<Outcome> {
    let mut worst_identity = 0.0f64;
    let mut worst_reproduction = 0.0f64;
    for (j, m) in [(1, 2), (1, 4), (2, 4), (3, 4), (2, 6), (4, 3)] {
        let spec = BasisSpec::new(j, m)?;
        worst_identity = worst_identity.max(orthonormality_error(spec)?).max(integral_identity_error(spec)?);
        worst_reproduction = worst_reproduction.max(polynomial_reproduction_error(spec)?);
    }
    let pass = worst_identity <= C8_IDENTITY && worst_reproduction <= C8_REPRODUCTION;
    outcome(pass, format!("identities {worst_identity:.1e}; reproduction {worst_reproduction:.1e}"))
}

fn criterion_9() -> Result<Outcome> {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_fpstar"))
            .args(["example", "--id", "1"])
            .output()
            .map_err(fpstar::Error::Io)
    };
    let (a, b) = (run()?, run()?);
    let pass = a.status.success() && b.status.success() && !a.stdout.is_empty() && a.stdout == b.stdout;
    outcome(pass, format!("{} bytes, identical: {}", a.stdout.len(), a.stdout == b.stdout))
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("Example 1 reproduction", criterion_1),
        ("Example 2 trend", criterion_2),
        ("gradient consistency", criterion_3),
        ("tangent consistency", criterion_4),
        ("VI sign conditions", criterion_5),
        ("well-posedness surrogates", criterion_6),
        ("mass conservation", criterion_7),
        ("basis exactness", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {} {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
