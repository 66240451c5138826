//! Adjoint solve, terminal data and the continuous gradient `alpha u - rho q_x`.
use fpstar::kkt::reduced_gradient;
use fpstar::scheme::adjoint::adjoint_solve;
use fpstar::scheme::state::{forward_solve, FieldEvaluator};
use fpstar::verify::{collocation, control_from_exprs};
use fpstar::{builtin_example, Expr};

fn main() -> fpstar::Result<()> {
    let p = builtin_example(2)?;
    let coll = collocation(&p, 2, 2, 4)?;
    let u = control_from_exprs(&coll, &vec![Expr::parse("x*(0.2*(1-x)*cos(t)+0.1)")?; 3])?;
    let a = forward_solve(&coll, &u)?;
    let b = adjoint_solve(&coll, &a, &u)?;

    let ev = FieldEvaluator::new(&coll, &a, &u)?.with_adjoint(&b)?;
    for t in [0.0, 0.5, 1.0] {
        let q = ev.adjoint(0, 0.5, t)?;
        println!("edge 1, x = 0.5, t = {t}: q = {:+.3e}, q_x = {:+.3e}", q.value, q.dx);
    }
    let g = reduced_gradient(&coll, &a, &b, &u)?;
    println!("max |gradient| on the collocation grid: {:.3e}", g.max_abs());
    Ok(())
}
