#![allow(dead_code)]

use fpstar::problem::{EdgeData, StarProblem};
use fpstar::{BasisSpec, Collocation, EdgeMatrices, EdgeSpec, Expr};
use rand::Rng;

/// Three unit edges with `D = 1` and the given data strings.
pub fn problem(rho0: [&str; 3], rho_d: [&str; 3], rho_t: [&str; 3], f: [&str; 3]) -> StarProblem {
    let data = (0..3)
        .map(|i| EdgeData {
            rho0: Expr::parse(rho0[i]).unwrap(),
            rho_d: Expr::parse(rho_d[i]).unwrap(),
            rho_t: Expr::parse(rho_t[i]).unwrap(),
            forcing: Expr::parse(f[i]).unwrap(),
        })
        .collect();
    StarProblem {
        edges: vec![EdgeSpec::unit(1.0); 3],
        horizon: 1.0,
        data,
        exact: None,
    }
}

pub fn zero_problem() -> StarProblem {
    problem(["0"; 3], ["0"; 3], ["0"; 3], ["0"; 3])
}

pub fn coll(p: &StarProblem, j: u32, m: usize) -> Collocation {
    Collocation::new(p.normalize(), BasisSpec::new(j, m).unwrap(), BasisSpec::new(j, m).unwrap()).unwrap()
}

pub fn random(c: &Collocation, rng: &mut impl Rng, scale: f64) -> EdgeMatrices {
    let mut m = c.zeros();
    for e in m.edges.iter_mut() {
        for v in e.iter_mut() {
            *v = scale * rng.gen_range(-1.0..1.0);
        }
    }
    m
}

/// Observed order from errors at steps `h` and `h / 2`; exact results count as passing.
pub fn order(e1: f64, e2: f64) -> f64 {
    if e1 < 1e-11 && e2 < 1e-11 {
        f64::INFINITY
    } else {
        (e1 / e2).log2()
    }
}
