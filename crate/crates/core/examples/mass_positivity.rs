//! Mass balance with Dirichlet and reflecting outer ends, and positivity of
//! the implicit scheme.
use fpstar::fd::{mass_balance, positivity_check, FdField, FdGrid, OuterCondition};
use fpstar::verify::{bump_problem, probe_control};

fn main() -> fpstar::Result<()> {
    let p = bump_problem()?;
    for outer in [OuterCondition::Dirichlet, OuterCondition::Reflecting] {
        let grid = FdGrid::new(100, 200, 0.5)?.with_outer(outer);
        let u = FdField::sample(&p, &grid, &vec![probe_control(); 3])?;
        let r = mass_balance(&p, &u, &grid)?;
        println!(
            "{outer:?}: mass {:.6} -> {:.6}, outflow {:.3e}, drift {:.3e}, identity error {:.3e}",
            r.mass[0],
            r.mass.last().unwrap(),
            r.outflow.last().unwrap(),
            r.drift,
            r.identity_error
        );
    }
    let grid = FdGrid::new(100, 200, 1.0)?;
    let r = positivity_check(&p, &FdField::zeros(3, 100, 200), &grid)?;
    println!("implicit Euler: nonnegative {}, min {:.3e}", r.nonnegative, r.min);
    Ok(())
}
