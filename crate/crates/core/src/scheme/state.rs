//! State discretization: vertex closures, reconstructions, residual and the
//! linear forward solve for a fixed control.

use super::{
    combine, control_point, control_vertex, dense_operator, mat_vec, solve_time_blocked, vertex_closure,
    Anchor, Collocation, ControlCoefficients, ControlField, EdgeMatrices, Jet, Layout, NodeValues,
    StateCoefficients, TPoint, Vertex, XPoint,
};
use crate::error::{Error, Result};

fn guard(coll: &Collocation, den: f64, t: f64) -> Result<()> {
    if !(den.abs() >= coll.eps_den) {
        return Err(Error::SingularDenominator { t, value: den });
    }
    Ok(())
}

/// Vertex closure of the state at one time, with the per-edge projections
/// `C_j Y(t)` and `C_j Y'(t)`.
pub(crate) fn state_vertex_at(
    coll: &Collocation,
    a: &StateCoefficients,
    u0: &[f64],
    u0t: &[f64],
    tp: &TPoint,
) -> Result<(Vertex, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let (k1, k2) = (coll.k1(), coll.k2());
    let kappa = coll.kappa();
    let mut den = 0.0;
    let mut dden = 0.0;
    for j in 0..kappa.len() {
        den += u0[j] - kappa[j];
        dden += u0t[j];
    }
    guard(coll, den, tp.t)?;
    let cy: Vec<Vec<f64>> = a.edges.iter().map(|c| mat_vec(c, k1, k2, &tp.forward)).collect();
    let cyp: Vec<Vec<f64>> = a.edges.iter().map(|c| mat_vec(c, k1, k2, &tp.phi)).collect();
    let v = vertex_closure(kappa, &coll.grids.p2_one, &cy, &cyp, &coll.data.rho0_anchor, den, dden);
    Ok((v, cy, cyp))
}

/// State jets on the collocation grid and at the final time.
#[derive(Debug, Clone)]
pub struct StateField {
    /// Per edge, `kx * K2 + kt`.
    pub jets: Vec<Vec<Jet>>,
    /// Vertex closure per time node.
    pub vertex: Vec<Vertex>,
    /// Per edge, jets at `(x_kx, 1-)`.
    pub terminal: Vec<Vec<Jet>>,
    pub terminal_vertex: Vertex,
}

impl StateField {
    pub fn new(coll: &Collocation, a: &StateCoefficients, ctrl: &ControlField) -> Result<Self> {
        coll.check_shape(a, "state coefficients")?;
        let n = coll.num_edges();
        let (k1, k2) = (coll.k1(), coll.k2());
        let g = &coll.grids;
        let mut jets = vec![vec![Jet::default(); k1 * k2]; n];
        let mut vertex = Vec::with_capacity(k2);
        for (kt, tp) in g.ts.iter().enumerate() {
            let u0: Vec<f64> = ctrl.vertex.iter().map(|v| v[kt]).collect();
            let u0t: Vec<f64> = ctrl.vertex_t.iter().map(|v| v[kt]).collect();
            let (v, cy, cyp) = state_vertex_at(coll, a, &u0, &u0t, tp)?;
            for i in 0..n {
                for (kx, xp) in g.xs.iter().enumerate() {
                    jets[i][kx * k2 + kt] =
                        combine(xp, &cy[i], &cyp[i], coll.data.rho0[i][kx], coll.data.rho0_anchor[i], &v);
                }
            }
            vertex.push(v);
        }
        let tp = &g.final_time;
        let (tv, cy, cyp) = state_vertex_at(coll, a, &ctrl.vertex_final, &ctrl.vertex_final_t, tp)?;
        let terminal = (0..n)
            .map(|i| {
                g.xs.iter()
                    .enumerate()
                    .map(|(kx, xp)| combine(xp, &cy[i], &cyp[i], coll.data.rho0[i][kx], coll.data.rho0_anchor[i], &tv))
                    .collect()
            })
            .collect();
        Ok(Self {
            jets,
            vertex,
            terminal,
            terminal_vertex: tv,
        })
    }

    pub fn jet(&self, edge: usize, kx: usize, kt: usize) -> Jet {
        let k2 = self.vertex.len();
        self.jets[edge][kx * k2 + kt]
    }

    /// State values on the grid.
    pub fn values(&self, k1: usize) -> NodeValues {
        let k2 = self.vertex.len();
        NodeValues {
            k1,
            k2,
            edges: self.jets.iter().map(|e| e.iter().map(|j| j.value).collect()).collect(),
        }
    }
}

/// Residual of the normalized state equation at every collocation node.
pub(crate) fn residual_from_fields(coll: &Collocation, sf: &StateField, ctrl: &ControlField) -> NodeValues {
    let (k1, k2) = (coll.k1(), coll.k2());
    let mut out = coll.zeros();
    for (i, c) in coll.problem.coeffs.iter().enumerate() {
        for kx in 0..k1 {
            for kt in 0..k2 {
                let r = sf.jet(i, kx, kt);
                let u = ctrl.nodes.get(i, kx, kt);
                let ux = ctrl.nodes_x.get(i, kx, kt);
                let f = coll.data.forcing.get(i, kx, kt);
                out.set(i, kx, kt, r.dt - c.a * r.dxx - c.b * (u * r.dx + ux * r.value) - f);
            }
        }
    }
    out
}

/// `d_t rho - a rho_xx - b (u rho_x + u_x rho) - T f` at each node.
pub fn state_residual(coll: &Collocation, a: &StateCoefficients, u: &ControlCoefficients) -> Result<NodeValues> {
    let ctrl = ControlField::new(coll, u)?;
    let sf = StateField::new(coll, a, &ctrl)?;
    Ok(residual_from_fields(coll, &sf, &ctrl))
}

/// Common vertex value `rho_i(0, t)`.
pub fn vertex_value(coll: &Collocation, a: &StateCoefficients, u: &ControlCoefficients, t: f64) -> Result<f64> {
    FieldEvaluator::new(coll, a, u)?.vertex(t).map(|v| v.w)
}

/// `d_x rho_i(0, t)` from the closed form.
pub fn vertex_x_derivative(
    coll: &Collocation,
    a: &StateCoefficients,
    u: &ControlCoefficients,
    t: f64,
    edge: usize,
) -> Result<f64> {
    FieldEvaluator::new(coll, a, u)?.rho(edge, 0.0, t).map(|j| j.dx)
}

pub fn reconstruct_rho(coll: &Collocation, a: &StateCoefficients, u: &ControlCoefficients, x: f64, t: f64, edge: usize) -> Result<f64> {
    FieldEvaluator::new(coll, a, u)?.rho(edge, x, t).map(|j| j.value)
}

pub fn reconstruct_rho_x(coll: &Collocation, a: &StateCoefficients, u: &ControlCoefficients, x: f64, t: f64, edge: usize) -> Result<f64> {
    FieldEvaluator::new(coll, a, u)?.rho(edge, x, t).map(|j| j.dx)
}

pub fn reconstruct_rho_xx(coll: &Collocation, a: &StateCoefficients, u: &ControlCoefficients, x: f64, t: f64, edge: usize) -> Result<f64> {
    FieldEvaluator::new(coll, a, u)?.rho(edge, x, t).map(|j| j.dxx)
}

pub fn reconstruct_rho_t(coll: &Collocation, a: &StateCoefficients, u: &ControlCoefficients, x: f64, t: f64, edge: usize) -> Result<f64> {
    FieldEvaluator::new(coll, a, u)?.rho(edge, x, t).map(|j| j.dt)
}

/// Point evaluation of state, control and (optionally) adjoint fields.
///
/// Breakpoints are evaluated with right limits, and `1` with left limits.
pub struct FieldEvaluator<'a> {
    pub(crate) coll: &'a Collocation,
    pub(crate) a: &'a StateCoefficients,
    pub(crate) u: &'a ControlCoefficients,
    pub(crate) b: Option<&'a EdgeMatrices>,
}

impl<'a> FieldEvaluator<'a> {
    pub fn new(coll: &'a Collocation, a: &'a StateCoefficients, u: &'a ControlCoefficients) -> Result<Self> {
        coll.check_shape(a, "state coefficients")?;
        coll.check_shape(u, "control coefficients")?;
        Ok(Self { coll, a, u, b: None })
    }

    pub fn with_adjoint(mut self, b: &'a EdgeMatrices) -> Result<Self> {
        self.coll.check_shape(b, "adjoint coefficients")?;
        self.b = Some(b);
        Ok(self)
    }

    pub fn collocation(&self) -> &Collocation {
        self.coll
    }

    fn check_edge(&self, edge: usize) -> Result<()> {
        if edge >= self.coll.num_edges() {
            return Err(Error::DimensionMismatch(format!(
                "edge {edge} out of range for {} edges",
                self.coll.num_edges()
            )));
        }
        Ok(())
    }

    pub(crate) fn vertex_controls(&self, tp: &TPoint) -> (Vec<f64>, Vec<f64>) {
        let (k1, k2) = (self.coll.k1(), self.coll.k2());
        self.u
            .edges
            .iter()
            .map(|u| control_vertex(u, k1, k2, &self.coll.grids.vertex_phi, tp))
            .unzip()
    }

    pub(crate) fn vertex_at(&self, tp: &TPoint) -> Result<(Vertex, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let (u0, u0t) = self.vertex_controls(tp);
        state_vertex_at(self.coll, self.a, &u0, &u0t, tp)
    }

    /// State vertex closure at time `t`.
    pub fn vertex(&self, t: f64) -> Result<Vertex> {
        let tp = self.coll.grids.t_point_auto(t)?;
        Ok(self.vertex_at(&tp)?.0)
    }

    pub(crate) fn rho0_jet(&self, edge: usize, x: f64) -> Result<Jet> {
        let d = &self.coll.problem.data[edge];
        Ok(Jet {
            value: d.rho0.try_eval(x, 0.0)?,
            dx: d.rho0_x.try_eval(x, 0.0)?,
            dxx: d.rho0_xx.try_eval(x, 0.0)?,
            dt: 0.0,
        })
    }

    pub(crate) fn rho_at(&self, edge: usize, xp: &XPoint, tp: &TPoint) -> Result<Jet> {
        let (v, cy, cyp) = self.vertex_at(tp)?;
        let g = self.rho0_jet(edge, xp.x)?;
        let anchor: Anchor = self.coll.data.rho0_anchor[edge];
        Ok(combine(xp, &cy[edge], &cyp[edge], g, anchor, &v))
    }

    /// `rho_i` and its derivatives at `(x, t)` in normalized coordinates.
    pub fn rho(&self, edge: usize, x: f64, t: f64) -> Result<Jet> {
        self.check_edge(edge)?;
        let xp = self.coll.grids.x_point_auto(x)?;
        let tp = self.coll.grids.t_point_auto(t)?;
        self.rho_at(edge, &xp, &tp)
    }

    /// `(u_i, d_x u_i)` at `(x, t)`.
    pub fn control(&self, edge: usize, x: f64, t: f64) -> Result<(f64, f64)> {
        self.check_edge(edge)?;
        let xp = self.coll.grids.x_point_auto(x)?;
        let tp = self.coll.grids.t_point_auto(t)?;
        Ok(control_point(&self.u.edges[edge], self.coll.k1(), self.coll.k2(), &xp, &tp))
    }
}

/// Row-independent data of the state operator at one time node.
struct TimeRow {
    den: f64,
    dden: f64,
}

fn time_rows(coll: &Collocation, ctrl: &ControlField) -> Result<Vec<TimeRow>> {
    let kappa = coll.kappa();
    coll.grids
        .ts
        .iter()
        .enumerate()
        .map(|(kt, tp)| {
            let mut den = 0.0;
            let mut dden = 0.0;
            for j in 0..kappa.len() {
                den += ctrl.vertex[j][kt] - kappa[j];
                dden += ctrl.vertex_t[j][kt];
            }
            guard(coll, den, tp.t)?;
            Ok(TimeRow { den, dden })
        })
        .collect()
}

/// Linear state operator for a fixed control: `d R_s / d A`.
pub(crate) fn state_operator_entries<'a>(
    coll: &'a Collocation,
    ctrl: &'a ControlField,
) -> Result<impl Fn((usize, usize, usize), (usize, usize, usize)) -> f64 + Sync + 'a> {
    let rows = time_rows(coll, ctrl)?;
    let kappa = coll.kappa().to_vec();
    Ok(move |(i, kx, kt): (usize, usize, usize), (j, p, q): (usize, usize, usize)| {
        let g = &coll.grids;
        let xp = &g.xs[kx];
        let tp = &g.ts[kt];
        let y = tp.forward[q];
        let yp = tp.phi[q];
        if y == 0.0 && yp == 0.0 {
            return 0.0;
        }
        let c = &coll.problem.coeffs[i];
        let u = ctrl.nodes.get(i, kx, kt);
        let ux = ctrl.nodes_x.get(i, kx, kt);
        let tr = &rows[kt];
        let mut e = 0.0;
        if i == j {
            e += xp.xa[p] * yp + (-c.a * xp.phi[p] - c.b * u * xp.xb[p] - c.b * ux * xp.xa[p]) * y;
        }
        let coef_w = c.b * (u - (1.0 - xp.x) * ux);
        let coef_wt = 1.0 - xp.x;
        let s = kappa[j] * g.p2_one[p];
        let dw = s * y / tr.den;
        let dwt = s * (yp / tr.den - y * tr.dden / (tr.den * tr.den));
        e + coef_w * dw + coef_wt * dwt
    })
}

/// Dense matrix of `d R_s / d A` (rows and columns edge-major, row-major).
pub fn state_operator(coll: &Collocation, u: &ControlCoefficients) -> Result<faer::Mat<f64>> {
    let ctrl = ControlField::new(coll, u)?;
    let entry = state_operator_entries(coll, &ctrl)?;
    Ok(dense_operator(Layout::of(coll), &entry))
}

/// Solves the state collocation system for a fixed control.
pub fn forward_solve(coll: &Collocation, u: &ControlCoefficients) -> Result<StateCoefficients> {
    let ctrl = ControlField::new(coll, u)?;
    let entry = state_operator_entries(coll, &ctrl)?;
    let residual = |a: &EdgeMatrices| -> Result<EdgeMatrices> {
        let sf = StateField::new(coll, a, &ctrl)?;
        Ok(residual_from_fields(coll, &sf, &ctrl))
    };
    solve_time_blocked(Layout::of(coll), false, &residual, &entry, "state collocation system")
}

/// Directional derivative `(d R_s / d U) V` of the state residual at fixed `A`.
pub fn state_residual_control_derivative(
    coll: &Collocation,
    a: &StateCoefficients,
    u: &ControlCoefficients,
    v: &ControlCoefficients,
) -> Result<NodeValues> {
    let ctrl = ControlField::new(coll, u)?;
    let dctrl = ControlField::new(coll, v)?;
    let sf = StateField::new(coll, a, &ctrl)?;
    let (k1, k2) = (coll.k1(), coll.k2());
    let n = coll.num_edges();
    let mut out = coll.zeros();
    for kt in 0..k2 {
        let vx = &sf.vertex[kt];
        let mut d_den = 0.0;
        let mut d_dden = 0.0;
        for j in 0..n {
            d_den += dctrl.vertex[j][kt];
            d_dden += dctrl.vertex_t[j][kt];
        }
        let den2 = vx.den * vx.den;
        let dw = -vx.w * d_den / vx.den;
        let dwt = -vx.dnum * d_den / den2 - vx.num * d_dden / den2 + 2.0 * vx.num * vx.dden * d_den / (den2 * vx.den);
        for (i, c) in coll.problem.coeffs.iter().enumerate() {
            for kx in 0..k1 {
                let x = coll.grids.xs[kx].x;
                let r = sf.jet(i, kx, kt);
                let u0 = ctrl.nodes.get(i, kx, kt);
                let ux = ctrl.nodes_x.get(i, kx, kt);
                let du = dctrl.nodes.get(i, kx, kt);
                let dux = dctrl.nodes_x.get(i, kx, kt);
                let d_rho = (1.0 - x) * dw;
                let d_rho_x = -dw;
                let d_rho_t = (1.0 - x) * dwt;
                let val = d_rho_t - c.b * (du * r.dx + u0 * d_rho_x + dux * r.value + ux * d_rho);
                out.set(i, kx, kt, val);
            }
        }
    }
    Ok(out)
}

/// Tangent coefficients `dA = -L^{-1} (dR/dU) V` of the control-to-state map.
pub fn tangent_solve(coll: &Collocation, u: &ControlCoefficients, v: &ControlCoefficients) -> Result<StateCoefficients> {
    let a = forward_solve(coll, u)?;
    let rhs: Vec<f64> = state_residual_control_derivative(coll, &a, u, v)?.flatten().iter().map(|r| -r).collect();
    let lu = crate::dense::DenseLu::from_mat(state_operator(coll, u)?, "tangent state system")?;
    EdgeMatrices::from_flat(coll.num_edges(), coll.k1(), coll.k2(), &lu.solve(&rhs))
}

/// `d rho(node) / d A` entries, on the grid (`terminal = false`) or at
/// `(x_kx, 1-)` (`terminal = true`, `kt` ignored).
pub(crate) fn rho_sensitivity_entries<'a>(
    coll: &'a Collocation,
    ctrl: &'a ControlField,
    terminal: bool,
) -> Result<impl Fn((usize, usize, usize), (usize, usize, usize)) -> f64 + 'a> {
    let kappa = coll.kappa().to_vec();
    let dens: Vec<f64> = if terminal {
        let mut d = 0.0;
        for j in 0..kappa.len() {
            d += ctrl.vertex_final[j] - kappa[j];
        }
        guard(coll, d, 1.0)?;
        vec![d]
    } else {
        time_rows(coll, ctrl)?.into_iter().map(|r| r.den).collect()
    };
    Ok(move |(i, kx, kt): (usize, usize, usize), (j, p, q): (usize, usize, usize)| {
        let g = &coll.grids;
        let xp = &g.xs[kx];
        let (tp, den) = if terminal { (&g.final_time, dens[0]) } else { (&g.ts[kt], dens[kt]) };
        let y = tp.forward[q];
        let mut e = (1.0 - xp.x) * kappa[j] * g.p2_one[p] * y / den;
        if i == j {
            e += xp.xa[p] * y;
        }
        e
    })
}
