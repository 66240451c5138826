//! Newton and sweep solves of the optimality system on Example 2.
use fpstar::kkt::{SolverConfig, SolverKind};
use fpstar::report::{run_example, Resolution};

fn main() -> fpstar::Result<()> {
    let res = Resolution::new(2, 2, 4, 4);
    let config = SolverConfig::default();
    for kind in [SolverKind::Newton, SolverKind::Sweep] {
        let run = run_example(2, res, kind, &config)?;
        let r = &run.report;
        println!(
            "{kind:6} converged {} in {} iterations, residual {:.2e}, sigma {:.4e}, {:.2}s",
            r.converged, r.iterations, r.residual, r.sigma, r.wall_time_s
        );
        for (i, (er, eu)) in r.e_rho.iter().zip(&r.e_u).enumerate() {
            println!("  edge {}: e_rho {er:.3e}  e_u {eu:.3e}", i + 1);
        }
    }
    print!("{}", run_example(1, res, SolverKind::Newton, &config)?.report.to_csv());
    Ok(())
}
