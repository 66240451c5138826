//! Finite-volume reference solver: accuracy, self-convergence and agreement
//! with the wavelet scheme.
use fpstar::fd::{fd_adjoint, fd_forward, fd_reduced_cost, FdField, FdGrid};
use fpstar::verify::{fd_exact_error, fd_self_convergence, probe_control, wavelet_fd_agreement};
use fpstar::builtin_example;

fn main() -> fpstar::Result<()> {
    for (nx, nt) in [(25, 50), (50, 100), (100, 200)] {
        println!("Example 1, {nx} x {nt}: max error {:.3e}", fd_exact_error(nx, nt)?);
    }
    println!("observed spatial orders {:?}", fd_self_convergence(&[25, 50, 100], 100)?);

    let p = builtin_example(2)?;
    let grid = FdGrid::new(50, 100, 0.5)?;
    let u = FdField::sample(&p, &grid, &vec![probe_control(); 3])?;
    let rho = fd_forward(&p, &u, &grid)?;
    let adj = fd_adjoint(&p, &u, &rho, &grid)?;
    println!("Example 2: cost {:.6e}, max |q| {:.3e}", fd_reduced_cost(&p, &u, &grid)?, adj.q.max_abs());

    println!("wavelet vs finite volume (J=2, M=4): {:.3e}", wavelet_fd_agreement(2, 4, 200, 100)?);
    Ok(())
}
