use fpstar::fd::{self, FdField, FdGrid};
use fpstar::report::fmt_float;
use fpstar::{builtin_example, Basis, BasisSpec, EdgeMatrices, Expr, Var};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("x".to_string()),
        Just("t".to_string()),
        Just("pi".to_string()),
        (0.1f64..5.0).prop_map(|v| format!("{v:.3}")),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})+({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})-({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            inner.clone().prop_map(|a| format!("-({a})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("({a})^2")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn display_then_parse_preserves_values(src in expr(), x in 0.0f64..1.0, t in 0.0f64..1.0) {
        let e = Expr::parse(&src).unwrap();
        let back = Expr::parse(&e.to_string()).unwrap();
        let (a, b) = (e.eval(x, t), back.eval(x, t));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{src}: {a} vs {b}");
    }

    #[test]
    fn symbolic_derivative_matches_differences(src in expr(), x in 0.2f64..0.8, t in 0.2f64..0.8) {
        let e = Expr::parse(&src).unwrap();
        let h = 1e-5;
        for (var, num) in [
            (Var::X, (e.eval(x + h, t) - e.eval(x - h, t)) / (2.0 * h)),
            (Var::T, (e.eval(x, t + h) - e.eval(x, t - h)) / (2.0 * h)),
        ] {
            let d = e.differentiate(var).eval(x, t);
            prop_assert!((d - num).abs() <= 1e-5 * (1.0 + d.abs()), "{src}: {d} vs {num}");
        }
    }

    #[test]
    fn csv_floats_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn left_and_right_integrals_sum_to_the_total(j in 1u32..4, m in 2usize..6, t in 0.0f64..1.0) {
        let b = Basis::new(BasisSpec::new(j, m).unwrap()).unwrap();
        let l = b.left_integral(t).unwrap();
        let r = b.right_integral(t).unwrap();
        let total = b.left_integral(1.0).unwrap();
        for k in 0..b.size() {
            prop_assert!((l.values[k] + r.values[k] - total.values[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn basis_expansion_is_linear(j in 1u32..4, m in 2usize..6, t in 0.0f64..1.0, s in -3.0f64..3.0) {
        let b = Basis::new(BasisSpec::new(j, m).unwrap()).unwrap();
        let v = b.eval(t).unwrap();
        let c1: Vec<f64> = (0..b.size()).map(|k| (k as f64).sin()).collect();
        let c2: Vec<f64> = (0..b.size()).map(|k| (k as f64 * 0.7).cos()).collect();
        let c12: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| a + s * b).collect();
        prop_assert!((v.dot(&c12) - v.dot(&c1) - s * v.dot(&c2)).abs() <= 1e-11);
    }

    #[test]
    fn edge_matrices_flatten_round_trip(n in 1usize..4, k1 in 1usize..6, k2 in 1usize..6, seed in any::<u64>()) {
        let mut m = EdgeMatrices::zeros(n, k1, k2);
        for (i, e) in m.edges.iter_mut().enumerate() {
            for (k, v) in e.iter_mut().enumerate() {
                *v = ((seed % 97) as f64 + (i * 31 + k) as f64).sin();
            }
        }
        let back = EdgeMatrices::from_flat(n, k1, k2, &m.flatten()).unwrap();
        prop_assert_eq!(back, m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fd_forward_scales_with_the_data(scale in -4.0f64..4.0) {
        let p = builtin_example(2).unwrap();
        let mut q = p.clone();
        for d in q.data.iter_mut() {
            d.rho0 = Expr::constant(scale) * d.rho0.clone();
            d.forcing = Expr::constant(scale) * d.forcing.clone();
        }
        let grid = FdGrid::new(20, 20, 0.5).unwrap();
        let u = FdField::sample(&p, &grid, &vec![Expr::parse("0.1*(1-x)").unwrap(); 3]).unwrap();
        let r = fd::fd_forward(&p, &u, &grid).unwrap();
        let rs = fd::fd_forward(&q, &u, &grid).unwrap();
        prop_assert!(rs.axpy(-scale, &r).max_abs() <= 1e-12 * (1.0 + scale.abs()) * r.max_abs());
    }
}
