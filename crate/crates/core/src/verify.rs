//! Property suites behind `fpstar verify`, plus the measurements they use.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{Basis, BasisSpec};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::fd::{self, FdField, FdGrid, OuterCondition};
use crate::kkt::{self, DiscreteSolution, SolverConfig, SolverKind};
use crate::problem::{builtin_example, EdgeData, StarProblem};
use crate::scheme::adjoint::adjoint_solve;
use crate::scheme::state::{forward_solve, tangent_solve, FieldEvaluator};
use crate::scheme::{Collocation, ControlCoefficients, ControlField, EdgeMatrices};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Basis,
    Dsl,
    Scheme,
    Adjoint,
    Kkt,
    Oracle,
    All,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "basis" => Self::Basis,
            "dsl" => Self::Dsl,
            "scheme" => Self::Scheme,
            "adjoint" => Self::Adjoint,
            "kkt" => Self::Kkt,
            "oracle" => Self::Oracle,
            "all" => Self::All,
            other => return Err(Error::InvalidConfig(format!("unknown suite '{other}'"))),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Basis => "basis",
            Self::Dsl => "dsl",
            Self::Scheme => "scheme",
            Self::Adjoint => "adjoint",
            Self::Kkt => "kkt",
            Self::Oracle => "oracle",
            Self::All => "all",
        })
    }
}

/// Direction of a threshold comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub limit: f64,
}

impl Check {
    pub fn new(suite: Suite, name: impl Into<String>, value: f64, bound: Bound, limit: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            value,
            bound,
            limit,
        }
    }

    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost => self.value <= self.limit,
            Bound::AtLeast => self.value >= self.limit,
        }
    }

    fn failed(suite: Suite, name: impl Into<String>, err: &Error) -> Self {
        Self::new(suite, format!("{} ({err})", name.into()), f64::NAN, Bound::AtMost, 0.0)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.bound {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
        };
        write!(
            f,
            "[{}] {:<8} {}: {:.3e} {op} {:.1e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.value,
            self.limit
        )
    }
}

// ---------------------------------------------------------------- basis

fn gauss() -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(12).expect("nonzero"))
}

/// Integrates every basis function times `w(s)` over `[a, b]`, splitting at breakpoints.
fn integrate_basis(basis: &Basis, a: f64, b: f64, w: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let spec = basis.spec();
    let rule = gauss();
    let mut out = vec![0.0; basis.size()];
    for cell in 0..spec.cells() {
        let (lo, hi) = spec.cell_span(cell);
        let (lo, hi) = (lo.max(a), hi.min(b));
        if hi <= lo {
            continue;
        }
        for k in 0..basis.size() {
            let mut err = None;
            out[k] += rule.integrate(lo, hi, |s| match basis.eval(s) {
                Ok(v) => v[k] * w(s),
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
    }
    Ok(out)
}

/// `max |<phi_i, phi_j> - delta_ij|` by Gauss quadrature.
pub fn orthonormality_error(spec: BasisSpec) -> Result<f64> {
    let basis = Basis::new(spec)?;
    let rule = gauss();
    let n = basis.size();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for cell in 0..spec.cells() {
                let (lo, hi) = spec.cell_span(cell);
                s += rule.integrate(lo, hi, |t| {
                    let v = basis.eval(t).expect("interior node");
                    v[i] * v[j]
                });
            }
            worst = worst.max((s - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    Ok(worst)
}

/// Worst deviation of the three integral operators from quadrature.
pub fn integral_identity_error(spec: BasisSpec) -> Result<f64> {
    let basis = Basis::new(spec)?;
    let mut worst = 0.0f64;
    for k in 0..=20 {
        let t = k as f64 / 20.0;
        let p1 = basis.left_integral(t)?;
        let r = basis.right_integral(t)?;
        let p2 = basis.left_double_integral(t)?;
        let q1 = integrate_basis(&basis, 0.0, t, |_| 1.0)?;
        let qr = integrate_basis(&basis, t, 1.0, |_| 1.0)?;
        let q2 = integrate_basis(&basis, 0.0, t, |s| t - s)?;
        for i in 0..basis.size() {
            worst = worst.max((p1[i] - q1[i]).abs()).max((r[i] - qr[i]).abs()).max((p2[i] - q2[i]).abs());
        }
    }
    Ok(worst)
}

/// Relative error of projecting and re-evaluating `sum_k c_k t^k` of degree `< M`.
pub fn polynomial_reproduction_error(spec: BasisSpec) -> Result<f64> {
    let basis = Basis::new(spec)?;
    let coeffs: Vec<f64> = (0..spec.polys()).map(|k| 1.0 / (k as f64 + 1.0) * if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let p = |t: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c);
    let proj = integrate_basis(&basis, 0.0, 1.0, p)?;
    let mut worst = 0.0f64;
    for k in 0..=50 {
        let t = (k as f64 + 0.37) / 51.0;
        if spec.is_breakpoint(t) {
            continue;
        }
        let v = basis.eval(t)?;
        let approx = v.dot(&proj);
        worst = worst.max((approx - p(t)).abs() / p(t).abs().max(1e-300));
    }
    Ok(worst)
}

// ------------------------------------------------------------------ dsl

/// Symbolic versus central-difference derivatives on a fixed expression set.
pub fn dsl_derivative_error() -> Result<f64> {
    let samples = [
        "x^2*(1-x)*t",
        "exp(-t)*sin(pi*x)^2",
        "sqrt(1+x^2)*cos(3*t)",
        "exp(x*t)/(2+t^2)",
        "-x^3 + 2*x*t - t^4",
    ];
    let h = 1e-5;
    let mut worst = 0.0f64;
    for src in samples {
        let e = Expr::parse(src)?;
        let dx = e.differentiate(Var::X);
        let dt = e.differentiate(Var::T);
        for &(x, t) in &[(0.3, 0.7), (0.55, 0.1), (0.9, 0.45)] {
            let fx = (e.eval(x + h, t) - e.eval(x - h, t)) / (2.0 * h);
            let ft = (e.eval(x, t + h) - e.eval(x, t - h)) / (2.0 * h);
            worst = worst
                .max((dx.eval(x, t) - fx).abs() / (1.0 + fx.abs()))
                .max((dt.eval(x, t) - ft).abs() / (1.0 + ft.abs()));
        }
    }
    Ok(worst)
}

/// `max |e(x,t) - parse(display(e))(x,t)|` over the same set.
pub fn dsl_round_trip_error() -> Result<f64> {
    let mut worst = 0.0f64;
    for src in ["x^2*(1-x)*t", "2*exp(-t)*sin(pi*x)^2", "-(x-t)^3/(1+x)", "x*-t"] {
        let e = Expr::parse(src)?;
        let back = Expr::parse(&e.to_string())?;
        for &(x, t) in &[(0.2, 0.4), (0.8, 0.9)] {
            worst = worst.max((e.eval(x, t) - back.eval(x, t)).abs());
        }
    }
    Ok(worst)
}

// --------------------------------------------------------------- scheme

pub fn collocation(problem: &StarProblem, j1: u32, j2: u32, m: usize) -> Result<Collocation> {
    Collocation::new(problem.normalize(), BasisSpec::new(j1, m)?, BasisSpec::new(j2, m)?)
}

/// Control coefficients interpolating physical expressions `u_i(x, t)`.
pub fn control_from_exprs(coll: &Collocation, exprs: &[Expr]) -> Result<ControlCoefficients> {
    let mut nodes = coll.zeros();
    for (i, e) in exprs.iter().enumerate() {
        for (kx, xp) in coll.grids.xs.iter().enumerate() {
            for (kt, tp) in coll.grids.ts.iter().enumerate() {
                let (x, t) = coll.problem.to_physical(i, xp.x, tp.t);
                nodes.set(i, kx, kt, e.try_eval(x, t)?);
            }
        }
    }
    coll.interpolate(&nodes)
}

/// Grid error of the forward solve against the exact state, `u` exact.
pub fn exact_state_error(coll: &Collocation) -> Result<f64> {
    let u = coll.zeros();
    let a = forward_solve(coll, &u)?;
    let ev = FieldEvaluator::new(coll, &a, &u)?;
    let mut worst = 0.0f64;
    for i in 0..coll.num_edges() {
        let exact = coll.problem.exact_rho(i).ok_or_else(|| Error::InvalidConfig("problem has no exact state".into()))?;
        for xp in &coll.grids.xs {
            for tp in &coll.grids.ts {
                worst = worst.max((ev.rho(i, xp.x, tp.t)?.value - exact.try_eval(xp.x, tp.t)?).abs());
            }
        }
    }
    Ok(worst)
}

fn forcing_problem(forcing: &[&str]) -> Result<StarProblem> {
    let mut p = builtin_example(1)?;
    p.exact = None;
    for (d, f) in p.data.iter_mut().zip(forcing) {
        *d = EdgeData {
            rho0: Expr::zero(),
            rho_d: Expr::zero(),
            rho_t: Expr::zero(),
            forcing: Expr::parse(f)?,
        };
    }
    Ok(p)
}

/// Relative superposition defect of the forward solve in the forcing, at a
/// fixed nonzero control.
pub fn superposition_error(j: u32, m: usize) -> Result<f64> {
    let f1 = ["x*(1-x)*t", "sin(pi*x)", "1-t"];
    let f2 = ["exp(-t)*x", "x^2*t^2", "cos(x+t)"];
    let f12: Vec<String> = f1.iter().zip(&f2).map(|(a, b)| format!("({a})+({b})")).collect();
    let f12: Vec<&str> = f12.iter().map(String::as_str).collect();
    let ctrl = vec![Expr::parse("0.3*x*(1-x)*cos(t)+0.1")?; 3];
    let solve = |f: &[&str]| -> Result<EdgeMatrices> {
        let coll = collocation(&forcing_problem(f)?, j, j, m)?;
        let u = control_from_exprs(&coll, &ctrl)?;
        forward_solve(&coll, &u)
    };
    let (a1, a2, a12) = (solve(&f1)?, solve(&f2)?, solve(&f12)?);
    Ok(a12.axpy(-1.0, &a1).axpy(-1.0, &a2).max_abs() / a12.max_abs())
}

// -------------------------------------------------------------- adjoint

/// Adjoint coefficients at the exact optimum of a built-in example (should vanish).
pub fn adjoint_at_optimum(coll: &Collocation) -> Result<f64> {
    let u = coll.zeros();
    let a = forward_solve(coll, &u)?;
    Ok(adjoint_solve(coll, &a, &u)?.max_abs())
}

// ------------------------------------------------------------------ kkt

/// Observed orders and best relative agreement of a gradient or Taylor test.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCheck {
    /// One entry per direction: slope of the error between the two largest steps.
    pub orders: Vec<f64>,
    /// One entry per direction: smallest relative error over the steps.
    pub best_relative: Vec<f64>,
}

impl ConvergenceCheck {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn worst_best_relative(&self) -> f64 {
        self.best_relative.iter().copied().fold(0.0, f64::max)
    }
}

pub const GRADIENT_STEPS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];
pub const TAYLOR_STEPS: [f64; 3] = [1e-1, 1e-2, 1e-3];

fn summarize(errors: &[f64], steps: &[f64], scale: f64) -> (f64, f64) {
    let order = (errors[0] / errors[1]).log10() / (steps[0] / steps[1]).log10();
    let best = errors.iter().fold(f64::INFINITY, |a, &e| a.min(e)) / scale.abs().max(1e-300);
    (order, best)
}

/// Base control used by the gradient and Taylor checks: nonstationary and
/// with a vertex value far from the closure singularity.
pub fn probe_control() -> Expr {
    Expr::parse("0.2*x*(1-x)*cos(t)+0.1").expect("valid expression")
}

/// Central differences of the wavelet reduced cost against the discrete
/// adjoint derivative along random node directions.
pub fn wavelet_gradient_check(coll: &Collocation, directions: usize, seed: u64) -> Result<ConvergenceCheck> {
    let u = control_from_exprs(coll, &vec![probe_control(); coll.num_edges()])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ConvergenceCheck { orders: Vec::new(), best_relative: Vec::new() };
    for _ in 0..directions {
        let (_, v) = kkt::random_direction(coll, &mut rng)?;
        let d = kkt::discrete_directional_derivative(coll, &u, &v)?;
        let mut errs = Vec::new();
        for &eps in &GRADIENT_STEPS {
            let jp = kkt::reduced_cost(coll, &u.axpy(eps, &v))?;
            let jm = kkt::reduced_cost(coll, &u.axpy(-eps, &v))?;
            errs.push(((jp - jm) / (2.0 * eps) - d).abs());
        }
        let (o, b) = summarize(&errs, &GRADIENT_STEPS, d);
        out.orders.push(o);
        out.best_relative.push(b);
    }
    Ok(out)
}

/// Taylor remainder `|A(u + eps v) - A(u) - eps dA|` of the wavelet state map.
pub fn wavelet_taylor_check(coll: &Collocation, directions: usize, seed: u64) -> Result<ConvergenceCheck> {
    let u = control_from_exprs(coll, &vec![probe_control(); coll.num_edges()])?;
    let a = forward_solve(coll, &u)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ConvergenceCheck { orders: Vec::new(), best_relative: Vec::new() };
    for _ in 0..directions {
        let (_, v) = kkt::random_direction(coll, &mut rng)?;
        let z = tangent_solve(coll, &u, &v)?;
        let mut errs = Vec::new();
        for &eps in &TAYLOR_STEPS {
            let ap = forward_solve(coll, &u.axpy(eps, &v))?;
            errs.push(ap.axpy(-1.0, &a).axpy(-eps, &z).max_abs());
        }
        let (o, b) = summarize(&errs, &TAYLOR_STEPS, z.max_abs());
        out.orders.push(o);
        out.best_relative.push(b);
    }
    Ok(out)
}

/// Worst violation `max(0, -(alpha u - rho q_x)(v - u))` over nodes and both bounds.
pub fn vi_violation(coll: &Collocation, sol: &DiscreteSolution) -> Result<f64> {
    let g = kkt::reduced_gradient(coll, &sol.a, &sol.b, &sol.u)?;
    let nodes = ControlField::new(coll, &sol.u)?.nodes;
    let mut worst = 0.0f64;
    for (i, c) in coll.problem.coeffs.iter().enumerate() {
        for (gv, uv) in g.edges[i].iter().zip(&nodes.edges[i]) {
            for v in [c.spec.u_min, c.spec.u_max] {
                worst = worst.max(-(gv * (v - uv)));
            }
        }
    }
    Ok(worst)
}

/// Fraction of control nodes sitting on a bound (within `1e-12`).
pub fn clamped_fraction(coll: &Collocation, sol: &DiscreteSolution) -> Result<f64> {
    let nodes = ControlField::new(coll, &sol.u)?.nodes;
    let mut hit = 0usize;
    let mut total = 0usize;
    for (i, c) in coll.problem.coeffs.iter().enumerate() {
        for &u in &nodes.edges[i] {
            total += 1;
            if (u - c.spec.u_min).abs() <= 1e-12 || (u - c.spec.u_max).abs() <= 1e-12 {
                hit += 1;
            }
        }
    }
    Ok(hit as f64 / total as f64)
}

/// Example 2 with bounds `[-bound, bound]` on every edge.
pub fn bound_active_problem(bound: f64) -> Result<StarProblem> {
    let mut p = builtin_example(2)?;
    for e in p.edges.iter_mut() {
        e.u_min = -bound;
        e.u_max = bound;
    }
    Ok(p)
}

/// `max` field difference between Newton and sweep solutions.
pub fn solver_agreement(coll: &Collocation, config: &SolverConfig) -> Result<f64> {
    let (n, _) = kkt::solve(coll, SolverKind::Newton, config)?;
    let (s, _) = kkt::solve(coll, SolverKind::Sweep, config)?;
    Ok(n.a.max_abs_diff(&s.a).max(n.b.max_abs_diff(&s.b)).max(n.u.max_abs_diff(&s.u)))
}

// --------------------------------------------------------------- oracle

/// Central differences of the FD reduced cost against its discrete adjoint.
pub fn fd_gradient_check(problem: &StarProblem, grid: &FdGrid, directions: usize, seed: u64) -> Result<ConvergenceCheck> {
    let u = FdField::sample(problem, grid, &vec![probe_control(); problem.num_edges()])?;
    let rho = fd::fd_forward(problem, &u, grid)?;
    let adj = fd::fd_adjoint(problem, &u, &rho, grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ConvergenceCheck { orders: Vec::new(), best_relative: Vec::new() };
    for _ in 0..directions {
        let v = random_fd_field(problem, grid, &mut rng);
        let d = fd::fd_directional_derivative(&adj, &v);
        let mut errs = Vec::new();
        for &eps in &GRADIENT_STEPS {
            let jp = fd::fd_reduced_cost(problem, &u.axpy(eps, &v), grid)?;
            let jm = fd::fd_reduced_cost(problem, &u.axpy(-eps, &v), grid)?;
            errs.push(((jp - jm) / (2.0 * eps) - d).abs());
        }
        let (o, b) = summarize(&errs, &GRADIENT_STEPS, d);
        out.orders.push(o);
        out.best_relative.push(b);
    }
    Ok(out)
}

/// Taylor remainder of the FD state map along random smooth directions.
pub fn fd_taylor_check(problem: &StarProblem, grid: &FdGrid, directions: usize, seed: u64) -> Result<ConvergenceCheck> {
    let u = FdField::sample(problem, grid, &vec![probe_control(); problem.num_edges()])?;
    let rho = fd::fd_forward(problem, &u, grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ConvergenceCheck { orders: Vec::new(), best_relative: Vec::new() };
    for _ in 0..directions {
        let v = random_fd_field(problem, grid, &mut rng);
        let z = fd::fd_tangent(problem, &u, &v, &rho, grid)?;
        let mut errs = Vec::new();
        for &eps in &TAYLOR_STEPS {
            let rp = fd::fd_forward(problem, &u.axpy(eps, &v), grid)?;
            errs.push(rp.axpy(-1.0, &rho).axpy(-eps, &z).max_abs());
        }
        let (o, b) = summarize(&errs, &TAYLOR_STEPS, z.max_abs());
        out.orders.push(o);
        out.best_relative.push(b);
    }
    Ok(out)
}

/// Random nodal field in `[-1, 1]`.
pub fn random_fd_field(problem: &StarProblem, grid: &FdGrid, rng: &mut impl Rng) -> FdField {
    let mut f = FdField::zeros(problem.num_edges(), grid.nx, grid.nt);
    for e in f.edges.iter_mut() {
        for v in e.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    f
}

/// Problem with a Gaussian bump on every edge and no forcing.
pub fn bump_problem() -> Result<StarProblem> {
    let mut p = builtin_example(1)?;
    p.exact = None;
    for d in p.data.iter_mut() {
        d.rho0 = Expr::parse("exp(-200*(x-0.5)^2)")?;
        d.forcing = Expr::zero();
    }
    Ok(p)
}

/// Max FD error on Example 1 with `u = 0` against the exact state.
pub fn fd_exact_error(nx: usize, nt: usize) -> Result<f64> {
    let p = builtin_example(1)?;
    let grid = FdGrid::new(nx, nt, 0.5)?;
    let rho = fd::fd_forward(&p, &FdField::zeros(3, nx, nt), &grid)?;
    let exact = p.exact.as_ref().expect("built-in examples carry exact fields");
    let reference = FdField::sample(&p, &grid, &exact.rho)?;
    Ok(rho.max_abs_diff(&reference))
}

/// Observed spatial orders of successive FD differences on Example 2, `u = 0`.
pub fn fd_self_convergence(levels: &[usize], nt: usize) -> Result<Vec<f64>> {
    let p = builtin_example(2)?;
    let mut diffs = Vec::new();
    let mut prev: Option<FdField> = None;
    for &nx in levels {
        let grid = FdGrid::new(nx, nt, 0.5)?;
        let rho = fd::fd_forward(&p, &FdField::zeros(3, nx, nt), &grid)?;
        if let Some(pr) = &prev {
            let ratio = nx / pr.nx;
            let mut d = 0.0f64;
            for i in 0..3 {
                for j in 0..=pr.nx {
                    for n in 0..=nt {
                        d = d.max((pr.get(i, j, n) - rho.get(i, ratio * j, n)).abs());
                    }
                }
            }
            diffs.push(d);
        }
        prev = Some(rho);
    }
    Ok(diffs
        .windows(2)
        .zip(levels.windows(2).skip(1))
        .map(|(d, l)| (d[0] / d[1]).log2() / ((l[1] / l[0]) as f64).log2())
        .collect())
}

/// Wavelet forward solve versus FD on Example 1 with `u = 0`, on every
/// tenth FD node and time level.
pub fn wavelet_fd_agreement(j: u32, m: usize, nx: usize, nt: usize) -> Result<f64> {
    let p = builtin_example(1)?;
    let coll = collocation(&p, j, j, m)?;
    let u = coll.zeros();
    let a = forward_solve(&coll, &u)?;
    let ev = FieldEvaluator::new(&coll, &a, &u)?;
    let grid = FdGrid::new(nx, nt, 0.5)?;
    let rho = fd::fd_forward(&p, &FdField::zeros(3, nx, nt), &grid)?;
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in (0..=nx).step_by((nx / 10).max(1)) {
            for n in (0..=nt).step_by((nt / 10).max(1)) {
                let (x, t) = (j as f64 / nx as f64, n as f64 / nt as f64);
                worst = worst.max((ev.rho(i, x, t)?.value - rho.get(i, j, n)).abs());
            }
        }
    }
    Ok(worst)
}

// --------------------------------------------------------------- suites

fn push(out: &mut Vec<Check>, suite: Suite, name: &str, bound: Bound, limit: f64, value: Result<f64>) {
    out.push(match value {
        Ok(v) => Check::new(suite, name, v, bound, limit),
        Err(e) => Check::failed(suite, name, &e),
    });
}

fn basis_suite(out: &mut Vec<Check>) {
    let s = Suite::Basis;
    for (j, m) in [(1, 4), (3, 4), (2, 6)] {
        let spec = match BasisSpec::new(j, m) {
            Ok(s) => s,
            Err(e) => {
                out.push(Check::failed(s, "basis spec", &e));
                continue;
            }
        };
        push(out, s, &format!("orthonormality J={j} M={m}"), Bound::AtMost, 1e-12, orthonormality_error(spec));
        push(out, s, &format!("integral operators J={j} M={m}"), Bound::AtMost, 1e-12, integral_identity_error(spec));
        push(out, s, &format!("polynomial reproduction J={j} M={m}"), Bound::AtMost, 1e-13, polynomial_reproduction_error(spec));
    }
}

fn dsl_suite(out: &mut Vec<Check>) {
    push(out, Suite::Dsl, "symbolic vs central-difference derivatives", Bound::AtMost, 1e-7, dsl_derivative_error());
    push(out, Suite::Dsl, "display/parse round trip", Bound::AtMost, 0.0, dsl_round_trip_error());
}

fn scheme_suite(out: &mut Vec<Check>) {
    let s = Suite::Scheme;
    push(
        out,
        s,
        "Example 1 state representability J=2",
        Bound::AtMost,
        1e-10,
        builtin_example(1).and_then(|p| collocation(&p, 2, 2, 4)).and_then(|c| exact_state_error(&c)),
    );
    push(out, s, "forward superposition in the forcing", Bound::AtMost, 1e-9, superposition_error(2, 4));
    let taylor = builtin_example(1)
        .and_then(|p| collocation(&p, 2, 2, 4))
        .and_then(|c| wavelet_taylor_check(&c, 3, 7));
    push(out, s, "tangent Taylor order", Bound::AtLeast, 1.8, taylor.map(|t| t.min_order()));
}

fn adjoint_suite(out: &mut Vec<Check>) {
    let v = builtin_example(1)
        .and_then(|p| collocation(&p, 2, 2, 4))
        .and_then(|c| adjoint_at_optimum(&c));
    push(out, Suite::Adjoint, "adjoint vanishes at the Example 1 optimum", Bound::AtMost, 1e-10, v);
    let b = builtin_example(2).and_then(|p| {
        let coll = collocation(&p, 2, 2, 4)?;
        let (sol, _) = kkt::solve(&coll, SolverKind::Sweep, &SolverConfig::default())?;
        let r = crate::scheme::adjoint::adjoint_residual(&coll, &sol.b, &sol.a, &sol.u)?;
        Ok(r.max_abs())
    });
    push(out, Suite::Adjoint, "adjoint residual at the Example 2 solution", Bound::AtMost, 1e-10, b);
}

fn kkt_suite(out: &mut Vec<Check>) {
    let s = Suite::Kkt;
    let config = SolverConfig::default();
    match builtin_example(1).and_then(|p| collocation(&p, 2, 2, 4)).and_then(|c| wavelet_gradient_check(&c, 5, 11)) {
        Ok(g) => {
            out.push(Check::new(s, "gradient order (wavelet)", g.min_order(), Bound::AtLeast, 1.8));
            out.push(Check::new(s, "gradient best relative error (wavelet)", g.worst_best_relative(), Bound::AtMost, 1e-4));
        }
        Err(e) => out.push(Check::failed(s, "gradient (wavelet)", &e)),
    }
    for id in [1u32, 2] {
        let r = builtin_example(id).and_then(|p| {
            let coll = collocation(&p, 2, 2, 4)?;
            let (sol, _) = kkt::solve(&coll, SolverKind::Sweep, &config)?;
            vi_violation(&coll, &sol)
        });
        push(out, s, &format!("VI sign condition Example {id}"), Bound::AtMost, 1e-10, r);
    }
    match bound_active_problem(1e-3).and_then(|p| {
        let coll = collocation(&p, 2, 2, 4)?;
        let (sol, _) = kkt::solve(&coll, SolverKind::Sweep, &config)?;
        Ok((vi_violation(&coll, &sol)?, clamped_fraction(&coll, &sol)?))
    }) {
        Ok((v, f)) => {
            out.push(Check::new(s, "VI sign condition, bounds +-1e-3", v, Bound::AtMost, 1e-10));
            out.push(Check::new(s, "clamped node fraction, bounds +-1e-3", f, Bound::AtLeast, 0.1));
        }
        Err(e) => out.push(Check::failed(s, "bound-active problem", &e)),
    }
    for id in [1u32, 2] {
        let r = builtin_example(id).and_then(|p| collocation(&p, 2, 2, 4)).and_then(|c| solver_agreement(&c, &config));
        push(out, s, &format!("Newton vs sweep Example {id}"), Bound::AtMost, 1e-6, r);
    }
}

fn oracle_suite(out: &mut Vec<Check>) {
    let s = Suite::Oracle;
    let coarse = FdGrid::new(20, 20, 0.5);
    let g = builtin_example(1).and_then(|p| fd_gradient_check(&p, &coarse?, 5, 13));
    match g {
        Ok(g) => {
            out.push(Check::new(s, "gradient order (FD)", g.min_order(), Bound::AtLeast, 1.8));
            out.push(Check::new(s, "gradient best relative error (FD)", g.worst_best_relative(), Bound::AtMost, 1e-4));
        }
        Err(e) => out.push(Check::failed(s, "gradient (FD)", &e)),
    }
    let t = builtin_example(1).and_then(|p| fd_taylor_check(&p, &FdGrid::new(20, 20, 0.5)?, 3, 17));
    push(out, s, "tangent Taylor order (FD)", Bound::AtLeast, 1.8, t.map(|t| t.min_order()));
    push(out, s, "Example 1 FD error nx=200 nt=400", Bound::AtMost, 5e-5, fd_exact_error(200, 400));
    let orders = fd_self_convergence(&[25, 50, 100, 200], 100);
    push(out, s, "FD spatial self-convergence order", Bound::AtLeast, 1.9, orders.map(|o| o.into_iter().fold(f64::INFINITY, f64::min)));
    push(out, s, "wavelet vs FD, Example 1, u=0", Bound::AtMost, 1e-4, wavelet_fd_agreement(2, 4, 200, 100));
    let mass = bump_problem().and_then(|p| {
        let grid = FdGrid::new(100, 200, 0.5)?;
        let u = FdField::sample(&p, &grid, &vec![probe_control(); 3])?;
        let r = fd::mass_balance(&p, &u, &grid.with_outer(OuterCondition::Reflecting))?;
        let d = fd::mass_balance(&p, &u, &grid)?;
        Ok((r.drift / (1.0 + r.mass[0].abs()), d.identity_error))
    });
    match mass {
        Ok((r, d)) => {
            out.push(Check::new(s, "reflecting mass drift", r, Bound::AtMost, 1e-8));
            out.push(Check::new(s, "Dirichlet mass-flux identity", d, Bound::AtMost, 1e-6));
        }
        Err(e) => out.push(Check::failed(s, "mass balance", &e)),
    }
    let pos = bump_problem().and_then(|p| {
        let grid = FdGrid::new(100, 200, 1.0)?;
        Ok(fd::positivity_check(&p, &FdField::sample(&p, &grid, &vec![probe_control(); 3])?, &grid)?.min)
    });
    push(out, s, "implicit Euler positivity (min value)", Bound::AtLeast, -1e-10, pos);
}

/// Runs one suite (or all of them) and returns every check.
pub fn run_suite(suite: Suite) -> Vec<Check> {
    let mut out = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Basis {
        basis_suite(&mut out);
    }
    if all || suite == Suite::Dsl {
        dsl_suite(&mut out);
    }
    if all || suite == Suite::Scheme {
        scheme_suite(&mut out);
    }
    if all || suite == Suite::Adjoint {
        adjoint_suite(&mut out);
    }
    if all || suite == Suite::Kkt {
        kkt_suite(&mut out);
    }
    if all || suite == Suite::Oracle {
        oracle_suite(&mut out);
    }
    out
}
