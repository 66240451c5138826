//! Finite-difference checks of the discrete gradient and the state tangent.
use fpstar::fd::FdGrid;
use fpstar::verify::{collocation, fd_gradient_check, wavelet_gradient_check, wavelet_taylor_check};
use fpstar::builtin_example;

fn main() -> fpstar::Result<()> {
    let p = builtin_example(1)?;
    let coll = collocation(&p, 2, 2, 4)?;
    let g = wavelet_gradient_check(&coll, 3, 11)?;
    println!("wavelet gradient: orders {:?}, best relative {:?}", g.orders, g.best_relative);
    let t = wavelet_taylor_check(&coll, 3, 11)?;
    println!("wavelet tangent:  orders {:?}", t.orders);
    let f = fd_gradient_check(&p, &FdGrid::new(20, 20, 0.5)?, 3, 11)?;
    println!("fd gradient:      orders {:?}, best relative {:?}", f.orders, f.best_relative);
    Ok(())
}
