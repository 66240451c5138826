//! Legendre wavelet basis: values, integrals and collocation points.
use fpstar::verify::{integral_identity_error, orthonormality_error, polynomial_reproduction_error};
use fpstar::{Basis, BasisSpec};

fn main() -> fpstar::Result<()> {
    let spec = BasisSpec::new(2, 4)?;
    let basis = Basis::new(spec)?;
    println!("J=2, M=4: {} functions on {} cells", basis.size(), spec.cells());

    let pts = basis.collocation_points();
    println!("first collocation points: {:?}", &pts.points[..4]);

    let t = 0.3;
    let psi = basis.eval(t)?;
    let p1 = basis.left_integral(t)?;
    println!("psi(0.3)[0..3] = {:?}", &psi.values[..3]);
    println!("P1(0.3)[0..3]  = {:?}", &p1.values[..3]);

    println!("orthonormality error      {:.2e}", orthonormality_error(spec)?);
    println!("integral identity error   {:.2e}", integral_identity_error(spec)?);
    println!("polynomial reproduction   {:.2e}", polynomial_reproduction_error(spec)?);
    Ok(())
}
