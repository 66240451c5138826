mod common;

use common::{coll, order, problem, random, zero_problem};
use fpstar::builtin_example;
use fpstar::scheme::state::{
    forward_solve, reconstruct_rho, state_residual, vertex_value, vertex_x_derivative, FieldEvaluator,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(2024)
}

#[test]
fn zero_data_gives_zero_vertex() {
    let c = coll(&zero_problem(), 2, 3);
    let z = c.zeros();
    for tp in &c.grids.ts {
        assert_eq!(vertex_value(&c, &z, &z, tp.t).unwrap(), 0.0);
        assert_eq!(vertex_x_derivative(&c, &z, &z, tp.t, 1).unwrap(), 0.0);
    }
}

#[test]
fn vertex_value_of_flat_initial_profile() {
    let p = problem(["0.7*(1-x^2)"; 3], ["0"; 3], ["0"; 3], ["0"; 3]);
    let c = coll(&p, 2, 3);
    let z = c.zeros();
    for t in [0.1, 0.5, 0.9] {
        assert!((vertex_value(&c, &z, &z, t).unwrap() - 0.7).abs() < 1e-14);
    }
}

#[test]
fn example_one_vertex_and_slope_vanish() {
    let c = coll(&builtin_example(1).unwrap(), 2, 4);
    let u = c.zeros();
    let a = forward_solve(&c, &u).unwrap();
    for tp in &c.grids.ts {
        assert!(vertex_value(&c, &a, &u, tp.t).unwrap().abs() < 1e-8);
        assert!(vertex_x_derivative(&c, &a, &u, tp.t, 0).unwrap().abs() < 1e-8);
    }
}

#[test]
fn dirichlet_initial_and_vertex_conditions_hold_for_random_coefficients() {
    let p = problem(["x*(1-x)", "-x*(1-x)", "x^2*(1-x)"], ["0"; 3], ["0"; 3], ["sin(x+t)"; 3]);
    let c = coll(&p, 2, 3);
    let mut rng = rng();
    for _ in 0..5 {
        let a = random(&c, &mut rng, 1.0);
        let u = random(&c, &mut rng, 0.02);
        let ev = FieldEvaluator::new(&c, &a, &u).unwrap();
        for &t in &[0.0, 0.13, 0.5, 0.77, 1.0] {
            let mut flux = 0.0;
            let w = ev.rho(0, 0.0, t).unwrap().value;
            for i in 0..3 {
                assert!(ev.rho(i, 1.0, t).unwrap().value.abs() < 1e-12);
                let r0 = ev.rho(i, 0.0, t).unwrap();
                assert!((r0.value - w).abs() < 1e-12);
                flux += c.kappa()[i] * r0.dx + ev.control(i, 0.0, t).unwrap().0 * r0.value;
            }
            assert!(flux.abs() < 1e-12, "Kirchhoff defect {flux:e}");
        }
        for &x in &[0.0, 0.2, 0.5, 0.9] {
            for i in 0..3 {
                let exact = p.data[i].rho0.eval(x, 0.0);
                assert!((ev.rho(i, x, 0.0).unwrap().value - exact).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn derivative_family_matches_central_differences() {
    let p = problem(["x*(1-x)", "-x*(1-x)", "x^2*(1-x)"], ["0"; 3], ["0"; 3], ["0"; 3]);
    let c = coll(&p, 2, 4);
    let mut rng = rng();
    let a = random(&c, &mut rng, 1.0);
    let u = random(&c, &mut rng, 0.02);
    let ev = FieldEvaluator::new(&c, &a, &u).unwrap();
    let (x, t) = (0.3, 0.2);
    for i in 0..3 {
        let j = ev.rho(i, x, t).unwrap();
        let err = |h: f64| {
            let xp = ev.rho(i, x + h, t).unwrap();
            let xm = ev.rho(i, x - h, t).unwrap();
            let tp = ev.rho(i, x, t + h).unwrap();
            let tm = ev.rho(i, x, t - h).unwrap();
            [
                ((xp.value - xm.value) / (2.0 * h) - j.dx).abs(),
                ((xp.dx - xm.dx) / (2.0 * h) - j.dxx).abs(),
                ((tp.value - tm.value) / (2.0 * h) - j.dt).abs(),
            ]
        };
        let (e1, e2) = (err(0.02), err(0.01));
        for k in 0..3 {
            assert!(order(e1[k], e2[k]) >= 1.9, "edge {i} derivative {k}: {} -> {}", e1[k], e2[k]);
        }
    }
}

#[test]
fn zero_ansatz_reproduces_initial_curvature() {
    let p = problem(["x^2-x"; 3], ["0"; 3], ["0"; 3], ["0"; 3]);
    let c = coll(&p, 1, 3);
    let z = c.zeros();
    let ev = FieldEvaluator::new(&c, &z, &z).unwrap();
    for &(x, t) in &[(0.2, 0.3), (0.7, 0.9)] {
        assert!((ev.rho(1, x, t).unwrap().dxx - 2.0).abs() < 1e-13);
    }
}

#[test]
fn zero_problem_has_zero_residual_and_solution() {
    let c = coll(&zero_problem(), 2, 3);
    let z = c.zeros();
    assert_eq!(state_residual(&c, &z, &z).unwrap().max_abs(), 0.0);
    assert_eq!(forward_solve(&c, &z).unwrap().max_abs(), 0.0);
}

#[test]
fn residual_perturbation_is_causal_in_time() {
    let p = builtin_example(2).unwrap();
    let c = coll(&p, 2, 3);
    let mut rng = rng();
    let a = random(&c, &mut rng, 1.0);
    let u = random(&c, &mut rng, 0.01);
    let base = state_residual(&c, &a, &u).unwrap();
    let spec = c.grids.bt.spec();
    for q in [0, spec.index(1, 0), spec.index(1, 2)] {
        let mut ap = a.clone();
        ap.set(1, 2, q, a.get(1, 2, q) + 1.0);
        let r = state_residual(&c, &ap, &u).unwrap();
        let (start, _) = spec.cell_span(spec.cell_degree(q).0);
        for (kt, tp) in c.grids.ts.iter().enumerate() {
            let changed = (0..3).any(|i| (0..c.k1()).any(|kx| r.get(i, kx, kt) != base.get(i, kx, kt)));
            if tp.t < start {
                assert!(!changed, "column {q} changed residual at t={}", tp.t);
            }
        }
    }
}

#[test]
fn example_one_is_reproduced_exactly() {
    let p = builtin_example(1).unwrap();
    let c = coll(&p, 2, 4);
    let u = c.zeros();
    let a = forward_solve(&c, &u).unwrap();
    assert!(state_residual(&c, &a, &u).unwrap().max_abs() <= 1e-10);
    let ev = FieldEvaluator::new(&c, &a, &u).unwrap();
    let exact = p.exact.as_ref().unwrap();
    for i in 0..3 {
        let rt = exact.rho[i].differentiate(fpstar::Var::T);
        for xp in &c.grids.xs {
            for tp in &c.grids.ts {
                let j = ev.rho(i, xp.x, tp.t).unwrap();
                assert!((j.value - exact.rho[i].eval(xp.x, tp.t)).abs() <= 1e-9);
                assert!((j.dt - rt.eval(xp.x, tp.t)).abs() <= 1e-6);
                assert_eq!(reconstruct_rho(&c, &a, &u, xp.x, tp.t, i).unwrap(), j.value);
            }
        }
    }
}

#[test]
fn forward_solve_is_linear_in_initial_data_and_forcing() {
    let p1 = problem(["x*(1-x)", "-x*(1-x)", "x^2*(1-x)"], ["0"; 3], ["0"; 3], ["x*t", "1", "cos(t)"]);
    let p2 = problem(["sin(pi*x)"; 3], ["0"; 3], ["0"; 3], ["exp(-t)", "x^2", "0"]);
    let p12 = problem(
        ["x*(1-x)+sin(pi*x)", "-x*(1-x)+sin(pi*x)", "x^2*(1-x)+sin(pi*x)"],
        ["0"; 3],
        ["0"; 3],
        ["x*t+exp(-t)", "1+x^2", "cos(t)"],
    );
    let (c1, c2, c12) = (coll(&p1, 2, 3), coll(&p2, 2, 3), coll(&p12, 2, 3));
    let mut rng = rng();
    let u = random(&c1, &mut rng, 0.02);
    let a1 = forward_solve(&c1, &u).unwrap();
    let a2 = forward_solve(&c2, &u).unwrap();
    let a12 = forward_solve(&c12, &u).unwrap();
    let defect = a12.axpy(-1.0, &a1).axpy(-1.0, &a2).max_abs() / a12.max_abs();
    assert!(defect <= 1e-9, "superposition defect {defect:e}");
}

#[test]
fn singular_vertex_denominator_is_reported() {
    let p = builtin_example(1).unwrap();
    let c = coll(&p, 1, 2);
    // u_j(0, t) = 1 on every edge makes the denominator sum(u_j - kappa_j) vanish.
    let nodes = {
        let mut n = c.zeros();
        for e in n.edges.iter_mut() {
            e.iter_mut().for_each(|v| *v = 1.0);
        }
        n
    };
    let u = c.interpolate(&nodes).unwrap();
    let err = forward_solve(&c, &u).unwrap_err();
    assert!(matches!(err, fpstar::Error::SingularDenominator { .. }), "{err}");
}
