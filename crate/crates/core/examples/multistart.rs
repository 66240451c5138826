//! Solves Example 2 from several perturbed initial controls.
use fpstar::kkt::{multistart, SolverConfig, SolverKind};
use fpstar::verify::collocation;
use fpstar::builtin_example;

fn main() -> fpstar::Result<()> {
    let coll = collocation(&builtin_example(2)?, 2, 2, 4)?;
    let (starts, distinct) = multistart(&coll, SolverKind::Sweep, &SolverConfig::default(), 5, 7)?;
    for s in &starts {
        println!("start {}: cost {:.12e}, converged {}, {} sweeps", s.start, s.cost, s.converged, s.iterations);
    }
    println!("distinct converged costs: {}", distinct.len());
    Ok(())
}
