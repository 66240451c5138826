//! Forward state solve for a fixed control on Example 1.
use fpstar::scheme::state::{forward_solve, reconstruct_rho};
use fpstar::verify::{collocation, control_from_exprs, exact_state_error};
use fpstar::{builtin_example, Expr};

fn main() -> fpstar::Result<()> {
    let p = builtin_example(1)?;
    let coll = collocation(&p, 2, 2, 4)?;
    println!("max state error at the exact control: {:.2e}", exact_state_error(&coll)?);

    let u = control_from_exprs(&coll, &vec![Expr::parse("0.1*(1-x)*cos(t)")?; 3])?;
    let a = forward_solve(&coll, &u)?;
    for x in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let r: Vec<String> = (0..3)
            .map(|i| reconstruct_rho(&coll, &a, &u, x, 0.5, i).map(|v| format!("{v:+.6}")))
            .collect::<fpstar::Result<_>>()?;
        println!("x = {x:.2}  rho(x, 0.5) = [{}]", r.join(", "));
    }
    Ok(())
}
