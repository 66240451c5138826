//! Coupled optimality system: residuals, Newton and sweep solvers, cost,
//! reduced gradients and the discrete-adjoint directional derivative.

use std::str::FromStr;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dense::DenseLu;
use crate::error::{Error, Result};
use crate::scheme::adjoint::{adjoint_operator, AdjointField, TerminalData};
use crate::scheme::state::{
    forward_solve, rho_sensitivity_entries, state_operator, state_residual_control_derivative,
    residual_from_fields, FieldEvaluator, StateField,
};
use crate::scheme::adjoint::{adjoint_residual_from_fields, adjoint_solve};
use crate::scheme::{
    AdjointCoefficients, Collocation, ControlCoefficients, ControlField, EdgeMatrices, Layout, NodeValues,
    StateCoefficients, DEFAULT_EPS_DEN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMode {
    FiniteDifference,
    /// State and adjoint operator blocks assembled analytically.
    AnalyticBlocks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimalityMode {
    /// `u - clamp(rho q_x / alpha)`.
    Projected,
    /// `alpha u - rho q_x`.
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Newton,
    Sweep,
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "newton" => Ok(Self::Newton),
            "sweep" => Ok(Self::Sweep),
            other => Err(Error::InvalidConfig(format!("unknown solver '{other}'"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Newton => "newton",
            Self::Sweep => "sweep",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Absolute tolerance on the infinity norm.
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub min_step: f64,
    pub jacobian: JacobianMode,
    pub optimality: OptimalityMode,
    /// Sweep relaxation in `(0, 1]`.
    pub omega: f64,
    pub max_sweeps: usize,
    /// Anderson mixing depth of the sweep solver.
    pub anderson: usize,
    pub eps_den: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
            armijo: 1e-4,
            min_step: 2f64.powi(-20),
            jacobian: JacobianMode::FiniteDifference,
            optimality: OptimalityMode::Projected,
            omega: 0.7,
            max_sweeps: 500,
            anderson: 20,
            eps_den: DEFAULT_EPS_DEN,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.tol > 0.0) {
            bad.push("tol must be positive");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            bad.push("armijo must lie in (0, 1)");
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            bad.push("min_step must lie in (0, 1]");
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            bad.push("omega must lie in (0, 1]");
        }
        if !(self.eps_den > 0.0) {
            bad.push("eps_den must be positive");
        }
        if self.max_iter == 0 || self.max_sweeps == 0 {
            bad.push("iteration caps must be positive");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad.join("; ")))
        }
    }
}

/// Coefficients of state, adjoint and control with convergence metadata.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub a: StateCoefficients,
    pub b: AdjointCoefficients,
    pub u: ControlCoefficients,
    pub converged: bool,
    /// Infinity norm of the full optimality-system residual.
    pub residual: f64,
}

impl DiscreteSolution {
    pub fn evaluator<'a>(&'a self, coll: &'a Collocation) -> Result<FieldEvaluator<'a>> {
        FieldEvaluator::new(coll, &self.a, &self.u)?.with_adjoint(&self.b)
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub method: SolverKind,
    /// Newton steps, or forward/adjoint sweeps performed.
    pub iterations: usize,
    /// Newton: accepted residual norms. Sweep: control changes.
    pub history: Vec<f64>,
    pub converged: bool,
    pub final_residual: f64,
    pub message: Option<String>,
}

/// All node-level quantities needed by the optimality residual.
struct Fields {
    ctrl: ControlField,
    state: StateField,
    adjoint: AdjointField,
}

fn fields(coll: &Collocation, a: &StateCoefficients, b: &AdjointCoefficients, u: &ControlCoefficients) -> Result<Fields> {
    let ctrl = ControlField::new(coll, u)?;
    let state = StateField::new(coll, a, &ctrl)?;
    let td = TerminalData::new(coll, a, &ctrl)?;
    let adjoint = AdjointField::new(coll, b, &td)?;
    Ok(Fields { ctrl, state, adjoint })
}

/// `rho q_x / alpha` in physical units at every node.
fn control_target(coll: &Collocation, f: &Fields) -> NodeValues {
    let (k1, k2) = (coll.k1(), coll.k2());
    let mut out = coll.zeros();
    for (i, c) in coll.problem.coeffs.iter().enumerate() {
        for kx in 0..k1 {
            for kt in 0..k2 {
                let rho = f.state.jet(i, kx, kt).value;
                let qx = f.adjoint.jet(i, kx, kt).dx / c.spec.l;
                out.set(i, kx, kt, rho * qx / c.spec.alpha);
            }
        }
    }
    out
}

fn optimality_from_fields(coll: &Collocation, f: &Fields, mode: OptimalityMode) -> NodeValues {
    let target = control_target(coll, f);
    let mut out = coll.zeros();
    for (i, c) in coll.problem.coeffs.iter().enumerate() {
        for (k, (&u, &t)) in f.ctrl.nodes.edges[i].iter().zip(&target.edges[i]).enumerate() {
            out.edges[i][k] = match mode {
                OptimalityMode::Projected => u - c.spec.clamp(t),
                OptimalityMode::Interior => c.spec.alpha * (u - t),
            };
        }
    }
    out
}

/// Pointwise optimality residual at each node.
pub fn optimality_residual(
    coll: &Collocation,
    a: &StateCoefficients,
    b: &AdjointCoefficients,
    u: &ControlCoefficients,
    mode: OptimalityMode,
) -> Result<NodeValues> {
    Ok(optimality_from_fields(coll, &fields(coll, a, b, u)?, mode))
}

/// `[state | adjoint | optimality]`, each edge-major then node row-major.
pub fn assemble_full_residual(
    coll: &Collocation,
    a: &StateCoefficients,
    b: &AdjointCoefficients,
    u: &ControlCoefficients,
    mode: OptimalityMode,
) -> Result<Vec<f64>> {
    let f = fields(coll, a, b, u)?;
    let rs = residual_from_fields(coll, &f.state, &f.ctrl);
    let ra = adjoint_residual_from_fields(coll, &f.adjoint, &f.state, &f.ctrl);
    let ro = optimality_from_fields(coll, &f, mode);
    Ok(flatten(&rs, &ra, &ro))
}

pub fn flatten(a: &EdgeMatrices, b: &EdgeMatrices, u: &EdgeMatrices) -> Vec<f64> {
    let mut out = a.flatten();
    out.extend(b.flatten());
    out.extend(u.flatten());
    out
}

pub fn unflatten(coll: &Collocation, z: &[f64]) -> Result<(EdgeMatrices, EdgeMatrices, EdgeMatrices)> {
    let f = coll.field_size();
    if z.len() != 3 * f {
        return Err(Error::DimensionMismatch(format!(
            "flat system vector has {} entries, expected {}",
            z.len(),
            3 * f
        )));
    }
    let (n, k1, k2) = (coll.num_edges(), coll.k1(), coll.k2());
    Ok((
        EdgeMatrices::from_flat(n, k1, k2, &z[..f])?,
        EdgeMatrices::from_flat(n, k1, k2, &z[f..2 * f])?,
        EdgeMatrices::from_flat(n, k1, k2, &z[2 * f..])?,
    ))
}

fn residual_flat(coll: &Collocation, z: &[f64], mode: OptimalityMode) -> Result<Vec<f64>> {
    let (a, b, u) = unflatten(coll, z)?;
    assemble_full_residual(coll, &a, &b, &u, mode)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.abs() > m || x.is_nan() { x.abs() } else { m })
}

fn jacobian(coll: &Collocation, z: &[f64], f0: &[f64], config: &SolverConfig) -> Result<Mat<f64>> {
    let n = z.len();
    let mut jac = Mat::<f64>::zeros(n, n);
    let batch = 256;
    for start in (0..n).step_by(batch) {
        let cols: Vec<Vec<f64>> = (start..(start + batch).min(n))
            .into_par_iter()
            .map(|k| {
                let h = f64::EPSILON.sqrt() * (1.0 + z[k].abs());
                let mut zp = z.to_vec();
                zp[k] += h;
                let h = zp[k] - z[k];
                let fp = residual_flat(coll, &zp, config.optimality)?;
                Ok(fp.iter().zip(f0).map(|(a, b)| (a - b) / h).collect())
            })
            .collect::<Result<_>>()?;
        for (off, col) in cols.into_iter().enumerate() {
            for (r, v) in col.into_iter().enumerate() {
                jac[(r, start + off)] = v;
            }
        }
    }
    if config.jacobian == JacobianMode::AnalyticBlocks {
        let (_, _, u) = unflatten(coll, z)?;
        let fs = coll.field_size();
        let ls = state_operator(coll, &u)?;
        let la = adjoint_operator(coll, &u)?;
        for r in 0..fs {
            for c in 0..fs {
                jac[(r, c)] = ls[(r, c)];
                jac[(fs + r, fs + c)] = la[(r, c)];
            }
        }
    }
    Ok(jac)
}

fn solution_from(coll: &Collocation, z: &[f64], residual: f64, converged: bool) -> Result<DiscreteSolution> {
    let (a, b, u) = unflatten(coll, z)?;
    Ok(DiscreteSolution { a, b, u, converged, residual })
}

/// Damped Newton on the full optimality system with a backtracking line
/// search. Stagnation returns the best iterate flagged non-converged.
pub fn newton_solve(
    coll: &Collocation,
    config: &SolverConfig,
    initial: Option<&DiscreteSolution>,
) -> Result<(DiscreteSolution, SolveReport)> {
    config.validate()?;
    let mut z = match initial {
        Some(s) => flatten(&s.a, &s.b, &s.u),
        None => {
            let u = coll.zeros();
            let a = forward_solve(coll, &u)?;
            let b = adjoint_solve(coll, &a, &u)?;
            flatten(&a, &b, &u)
        }
    };
    let mut f = residual_flat(coll, &z, config.optimality)?;
    let mut norm = inf_norm(&f);
    let mut history = vec![norm];
    let mut message = None;
    let mut iterations = 0;
    while norm > config.tol && iterations < config.max_iter {
        let jac = jacobian(coll, &z, &f, config)?;
        let lu = DenseLu::from_mat(jac, &format!("Newton Jacobian at iteration {iterations}"))?;
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let dz = lu.solve(&rhs);
        let mut step = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, d)| a + step * d).collect();
            if let Ok(ft) = residual_flat(coll, &trial, config.optimality) {
                let nt = inf_norm(&ft);
                if nt <= (1.0 - config.armijo * step) * norm {
                    break Some((trial, ft, nt));
                }
            }
            step *= 0.5;
            if step < config.min_step {
                break None;
            }
        };
        iterations += 1;
        match accepted {
            Some((zt, ft, nt)) => {
                z = zt;
                f = ft;
                norm = nt;
                history.push(norm);
            }
            None => {
                message = Some(format!(
                    "line search stagnated at iteration {iterations} with residual {norm:e}"
                ));
                break;
            }
        }
    }
    let converged = norm <= config.tol;
    if !converged && message.is_none() {
        message = Some(format!("iteration cap {} reached with residual {norm:e}", config.max_iter));
    }
    let sol = solution_from(coll, &z, norm, converged)?;
    Ok((
        sol,
        SolveReport {
            method: SolverKind::Newton,
            iterations,
            history,
            converged,
            final_residual: norm,
            message,
        },
    ))
}

/// Sweep update `G(u) = (1 - omega) u + omega clamp(rho q_x / alpha)` on the
/// nodes, returning the new node values and the solved state and adjoint.
fn sweep_map(
    coll: &Collocation,
    config: &SolverConfig,
    u_nodes: &NodeValues,
) -> Result<(NodeValues, ControlCoefficients, StateCoefficients, AdjointCoefficients)> {
    let u = coll.interpolate(u_nodes)?;
    let a = forward_solve(coll, &u)?;
    let b = adjoint_solve(coll, &a, &u)?;
    let f = fields(coll, &a, &b, &u)?;
    let target = control_target(coll, &f);
    let mut next = coll.zeros();
    for (i, c) in coll.problem.coeffs.iter().enumerate() {
        for (k, (&cur, &t)) in u_nodes.edges[i].iter().zip(&target.edges[i]).enumerate() {
            next.edges[i][k] = (1.0 - config.omega) * cur + config.omega * c.spec.clamp(t);
        }
    }
    Ok((next, u, a, b))
}

/// Anderson mixing coefficients from the stored residual differences.
fn anderson_coefficients(df: &[Vec<f64>], f: &[f64]) -> Option<Vec<f64>> {
    let m = df.len();
    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for r in 0..m {
        for c in 0..m {
            gram[r * m + c] = df[r].iter().zip(&df[c]).map(|(a, b)| a * b).sum();
        }
        rhs[r] = df[r].iter().zip(f).map(|(a, b)| a * b).sum();
    }
    let scale = (0..m).map(|k| gram[k * m + k]).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let lu = DenseLu::factor(m, |r, c| gram[r * m + c] + if r == c { 1e-12 * scale } else { 0.0 }, "Anderson mixing").ok()?;
    Some(lu.solve(&rhs))
}

/// Forward-backward sweeps with a relaxed projected control update,
/// accelerated by Anderson mixing over the last `config.anderson` iterates
/// (`0` gives the plain relaxed sweep).
pub fn sweep_solve(
    coll: &Collocation,
    config: &SolverConfig,
    initial: Option<&ControlCoefficients>,
) -> Result<(DiscreteSolution, SolveReport)> {
    config.validate()?;
    let mut x = match initial {
        Some(u) => ControlField::new(coll, u)?.nodes,
        None => coll.zeros(),
    };
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut dx: Vec<Vec<f64>> = Vec::new();
    let mut df: Vec<Vec<f64>> = Vec::new();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let (mut u, mut a, mut b);
    loop {
        let (gx, uc, ac, bc) = sweep_map(coll, config, &x)?;
        iterations += 1;
        u = uc;
        a = ac;
        b = bc;
        let xf = x.flatten();
        let f: Vec<f64> = gx.flatten().iter().zip(&xf).map(|(g, v)| g - v).collect();
        let change = inf_norm(&f);
        history.push(change);
        if change <= config.tol * config.omega
            && inf_norm(&assemble_full_residual(coll, &a, &b, &u, config.optimality)?) <= config.tol
        {
            converged = true;
            break;
        }
        if !change.is_finite() || iterations == config.max_sweeps {
            break;
        }
        if let Some((px, pf)) = prev.take() {
            dx.push(xf.iter().zip(&px).map(|(a, b)| a - b).collect());
            df.push(f.iter().zip(&pf).map(|(a, b)| a - b).collect());
            if dx.len() > config.anderson {
                dx.remove(0);
                df.remove(0);
            }
        }
        let mut next: Vec<f64> = xf.iter().zip(&f).map(|(v, r)| v + r).collect();
        if config.anderson > 0 && !df.is_empty() {
            if let Some(gamma) = anderson_coefficients(&df, &f) {
                for (k, g) in gamma.iter().enumerate() {
                    for (n, (ddx, ddf)) in next.iter_mut().zip(dx[k].iter().zip(&df[k])) {
                        *n -= g * (ddx + ddf);
                    }
                }
            }
        }
        // Keep the iterate admissible.
        let mut nodes = EdgeMatrices::from_flat(coll.num_edges(), coll.k1(), coll.k2(), &next)?;
        for (i, c) in coll.problem.coeffs.iter().enumerate() {
            for v in nodes.edges[i].iter_mut() {
                *v = c.spec.clamp(*v);
            }
        }
        prev = Some((xf, f));
        x = nodes;
    }
    let residual = inf_norm(&assemble_full_residual(coll, &a, &b, &u, config.optimality)?);
    let message = (!converged).then(|| format!("sweep stopped after {iterations} iterations with change {:e}", history.last().copied().unwrap_or(f64::NAN)));
    Ok((
        DiscreteSolution { a, b, u, converged, residual },
        SolveReport {
            method: SolverKind::Sweep,
            iterations,
            history,
            converged,
            final_residual: residual,
            message,
        },
    ))
}

pub fn solve(coll: &Collocation, kind: SolverKind, config: &SolverConfig) -> Result<(DiscreteSolution, SolveReport)> {
    match kind {
        SolverKind::Newton => newton_solve(coll, config, None),
        SolverKind::Sweep => sweep_solve(coll, config, None),
    }
}

/// `alpha u - rho q_x` at each node (physical units).
pub fn reduced_gradient(
    coll: &Collocation,
    a: &StateCoefficients,
    b: &AdjointCoefficients,
    u: &ControlCoefficients,
) -> Result<NodeValues> {
    let f = fields(coll, a, b, u)?;
    let target = control_target(coll, &f);
    let mut out = coll.zeros();
    for (i, c) in coll.problem.coeffs.iter().enumerate() {
        for (k, (&uu, &t)) in f.ctrl.nodes.edges[i].iter().zip(&target.edges[i]).enumerate() {
            out.edges[i][k] = c.spec.alpha * (uu - t);
        }
    }
    Ok(out)
}

/// Midpoint-rule cost with cell measures.
pub fn cost_sigma(coll: &Collocation, a: &StateCoefficients, u: &ControlCoefficients) -> Result<f64> {
    let ctrl = ControlField::new(coll, u)?;
    let sf = StateField::new(coll, a, &ctrl)?;
    let td = TerminalData::new(coll, a, &ctrl)?;
    let (k1, k2) = (coll.k1(), coll.k2());
    let horizon = coll.problem.horizon();
    let mut total = 0.0;
    for (i, c) in coll.problem.coeffs.iter().enumerate() {
        let mut interior = 0.0;
        for kx in 0..k1 {
            for kt in 0..k2 {
                let gap = sf.jet(i, kx, kt).value - coll.data.rho_d.get(i, kx, kt);
                let uu = ctrl.nodes.get(i, kx, kt);
                interior += gap * gap + c.spec.alpha * uu * uu;
            }
        }
        let mut terminal = 0.0;
        for kx in 0..k1 {
            let h = td.jets[i][kx].value;
            terminal += h * h;
        }
        total += interior * c.spec.l * horizon / (k1 * k2) as f64 + terminal * c.spec.l / k1 as f64;
    }
    Ok(0.5 * total)
}

/// Reduced cost `J(U) = sigma(A(U), U)` with `A(U)` from the forward solve.
pub fn reduced_cost(coll: &Collocation, u: &ControlCoefficients) -> Result<f64> {
    let a = forward_solve(coll, u)?;
    cost_sigma(coll, &a, u)
}

/// Exact directional derivative of [`reduced_cost`] along `v`, computed
/// with the transposed collocation operator.
pub fn discrete_directional_derivative(
    coll: &Collocation,
    u: &ControlCoefficients,
    v: &ControlCoefficients,
) -> Result<f64> {
    let a = forward_solve(coll, u)?;
    let ctrl = ControlField::new(coll, u)?;
    let dctrl = ControlField::new(coll, v)?;
    let sf = StateField::new(coll, &a, &ctrl)?;
    let td = TerminalData::new(coll, &a, &ctrl)?;
    let layout = Layout::of(coll);
    let (k1, k2) = (coll.k1(), coll.k2());
    let fs = layout.size();
    let horizon = coll.problem.horizon();

    // Node weights of the cost and residuals of the tracking terms.
    let wi: Vec<f64> = coll.problem.coeffs.iter().map(|c| c.spec.l * horizon / (k1 * k2) as f64).collect();
    let wt: Vec<f64> = coll.problem.coeffs.iter().map(|c| c.spec.l / k1 as f64).collect();
    let interior_entry = rho_sensitivity_entries(coll, &ctrl, false)?;
    let terminal_entry = rho_sensitivity_entries(coll, &ctrl, true)?;
    let sigma_a: Vec<f64> = (0..fs)
        .into_par_iter()
        .map(|col| {
            let c = layout.decode(col);
            let mut s = 0.0;
            for row in 0..fs {
                let (i, kx, kt) = layout.decode(row);
                let gap = sf.jet(i, kx, kt).value - coll.data.rho_d.get(i, kx, kt);
                s += wi[i] * gap * interior_entry((i, kx, kt), c);
            }
            for i in 0..coll.num_edges() {
                for kx in 0..k1 {
                    s += wt[i] * td.jets[i][kx].value * terminal_entry((i, kx, 0), c);
                }
            }
            s
        })
        .collect();
    let lu = DenseLu::from_mat(state_operator(coll, u)?, "transposed state operator")?;
    let lambda = lu.solve_transpose(&sigma_a);

    // Explicit control dependence through u and the vertex denominator.
    let mut sigma_u = 0.0;
    let mut d_den_final = 0.0;
    for j in 0..coll.num_edges() {
        d_den_final += dctrl.vertex_final[j];
    }
    let dw_final = -td_w(&sf) * d_den_final / sf.terminal_vertex.den;
    for (i, c) in coll.problem.coeffs.iter().enumerate() {
        for kt in 0..k2 {
            let vx = &sf.vertex[kt];
            let mut d_den = 0.0;
            for j in 0..coll.num_edges() {
                d_den += dctrl.vertex[j][kt];
            }
            let dw = -vx.w * d_den / vx.den;
            for kx in 0..k1 {
                let x = coll.grids.xs[kx].x;
                let gap = sf.jet(i, kx, kt).value - coll.data.rho_d.get(i, kx, kt);
                let uu = ctrl.nodes.get(i, kx, kt);
                let du = dctrl.nodes.get(i, kx, kt);
                sigma_u += wi[i] * (gap * (1.0 - x) * dw + c.spec.alpha * uu * du);
            }
        }
        for kx in 0..k1 {
            let x = coll.grids.xs[kx].x;
            sigma_u += wt[i] * td.jets[i][kx].value * (1.0 - x) * dw_final;
        }
    }
    let ru = state_residual_control_derivative(coll, &a, u, v)?.flatten();
    let coupling: f64 = lambda.iter().zip(&ru).map(|(l, r)| l * r).sum();
    Ok(sigma_u - coupling)
}

fn td_w(sf: &StateField) -> f64 {
    sf.terminal_vertex.w
}

/// Adjoint-gradient directional derivative `sum g v` with the midpoint
/// measure, for node-value directions.
pub fn adjoint_directional_derivative(
    coll: &Collocation,
    u: &ControlCoefficients,
    v_nodes: &NodeValues,
) -> Result<f64> {
    let a = forward_solve(coll, u)?;
    let b = adjoint_solve(coll, &a, u)?;
    let g = reduced_gradient(coll, &a, &b, u)?;
    let (k1, k2) = (coll.k1(), coll.k2());
    let horizon = coll.problem.horizon();
    let mut s = 0.0;
    for (i, c) in coll.problem.coeffs.iter().enumerate() {
        let w = c.spec.l * horizon / (k1 * k2) as f64;
        for (gv, vv) in g.edges[i].iter().zip(&v_nodes.edges[i]) {
            s += w * gv * vv;
        }
    }
    Ok(s)
}

/// One converged start of [`multistart`].
#[derive(Debug, Clone)]
pub struct StartResult {
    pub start: usize,
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Repeats the solve from perturbed initial controls. Returns every start
/// and the distinct converged costs (relative separation above `1e-8`).
pub fn multistart(
    coll: &Collocation,
    kind: SolverKind,
    config: &SolverConfig,
    starts: usize,
    seed: u64,
) -> Result<(Vec<StartResult>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(starts);
    for s in 0..starts {
        let mut nodes = coll.zeros();
        if s > 0 {
            // Stay well inside the margin of the vertex denominator `sum(u_j - kappa_j)`.
            let margin = 0.5 * coll.kappa().iter().sum::<f64>() / coll.num_edges() as f64;
            for (i, c) in coll.problem.coeffs.iter().enumerate() {
                let amp = (0.1 * (c.spec.u_max - c.spec.u_min)).min(margin);
                // Smooth perturbation bounded by `amp`, with vertex value `amp r0`.
                let (r0, r1): (f64, f64) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
                for (kx, xp) in coll.grids.xs.iter().enumerate() {
                    for (kt, tp) in coll.grids.ts.iter().enumerate() {
                        let x = xp.x;
                        let p = r0 * (1.0 - x) + r1 * (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * tp.t).cos();
                        nodes.set(i, kx, kt, c.spec.clamp(amp * p));
                    }
                }
            }
        }
        let u0 = coll.interpolate(&nodes)?;
        let (sol, rep) = match kind {
            SolverKind::Sweep => sweep_solve(coll, config, Some(&u0))?,
            SolverKind::Newton => {
                let a = forward_solve(coll, &u0)?;
                let b = adjoint_solve(coll, &a, &u0)?;
                let init = DiscreteSolution { a, b, u: u0, converged: false, residual: f64::NAN };
                newton_solve(coll, config, Some(&init))?
            }
        };
        results.push(StartResult {
            start: s,
            cost: cost_sigma(coll, &sol.a, &sol.u)?,
            converged: rep.converged,
            iterations: rep.iterations,
        });
    }
    let mut distinct: Vec<f64> = Vec::new();
    for r in results.iter().filter(|r| r.converged) {
        if !distinct.iter().any(|d| (d - r.cost).abs() <= 1e-8 * d.abs().max(r.cost.abs()).max(1e-300)) {
            distinct.push(r.cost);
        }
    }
    distinct.sort_by(f64::total_cmp);
    Ok((results, distinct))
}

/// Random node-value direction mapped to control coefficients.
pub fn random_direction(coll: &Collocation, rng: &mut impl Rng) -> Result<(NodeValues, ControlCoefficients)> {
    let mut nodes = coll.zeros();
    for e in nodes.edges.iter_mut() {
        for v in e.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let coeffs = coll.interpolate(&nodes)?;
    Ok((nodes, coeffs))
}
