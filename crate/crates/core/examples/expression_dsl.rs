//! Parsing, evaluating and differentiating data expressions.
use fpstar::{Expr, Var};

fn main() -> fpstar::Result<()> {
    let e = Expr::parse("exp(-t) * sin(pi*x) + x^2/2")?;
    println!("expr      {e}");
    println!("value     {}", e.eval(0.25, 0.5));
    let dx = e.differentiate(Var::X);
    let dxx = dx.differentiate(Var::X);
    let dt = e.differentiate(Var::T);
    println!("d/dx      {dx}");
    println!("d2/dx2    {dxx}");
    println!("d/dt      {dt}");
    println!("at t = 1  {}", e.fix_t(1.0));

    for bad in ["sin(x", "2 ** x", "y + 1"] {
        match Expr::parse(bad) {
            Ok(_) => println!("{bad:10} parsed"),
            Err(err) => println!("{bad:10} rejected: {err}"),
        }
    }
    Ok(())
}
