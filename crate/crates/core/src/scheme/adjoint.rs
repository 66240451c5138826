//! Adjoint discretization, integrated backward from the terminal coupling
//! `q(., 1) = rho(., 1) - rho_T`.

use super::state::{state_vertex_at, FieldEvaluator, StateField};
use super::{
    combine, dense_operator, mat_vec, solve_time_blocked, vertex_closure, AdjointCoefficients, Anchor,
    Collocation, ControlCoefficients, ControlField, EdgeMatrices, Jet, Layout, NodeValues, StateCoefficients,
    TPoint, Vertex, XPoint,
};
use crate::basis::Side;
use crate::error::Result;

/// Terminal data `h = rho(., 1) - rho_T` at the spatial nodes.
#[derive(Debug, Clone)]
pub struct TerminalData {
    pub jets: Vec<Vec<Jet>>,
    pub anchors: Vec<Anchor>,
}

fn minus(a: Jet, b: Jet) -> Jet {
    Jet {
        value: a.value - b.value,
        dx: a.dx - b.dx,
        dxx: a.dxx - b.dxx,
        dt: 0.0,
    }
}

fn terminal_anchor(coll: &Collocation, edge: usize, w1: f64, rho_x0: f64) -> Anchor {
    let rt = coll.data.rho_t_anchor[edge];
    Anchor {
        g0: w1 - rt.g0,
        g1: -rt.g1,
        gx0: rho_x0 - rt.gx0,
    }
}

impl TerminalData {
    pub fn new(coll: &Collocation, a: &StateCoefficients, ctrl: &ControlField) -> Result<Self> {
        let g = &coll.grids;
        let (v, cy, cyp) = state_vertex_at(coll, a, &ctrl.vertex_final, &ctrl.vertex_final_t, &g.final_time)?;
        let x0 = g.x_point(0.0, Side::Right)?;
        let n = coll.num_edges();
        let mut jets = Vec::with_capacity(n);
        let mut anchors = Vec::with_capacity(n);
        for i in 0..n {
            let r0 = coll.data.rho0_anchor[i];
            jets.push(
                g.xs.iter()
                    .enumerate()
                    .map(|(kx, xp)| {
                        let rho = combine(xp, &cy[i], &cyp[i], coll.data.rho0[i][kx], r0, &v);
                        minus(rho, coll.data.rho_t[i][kx])
                    })
                    .collect(),
            );
            let at0 = combine(&x0, &cy[i], &cyp[i], jet_of(coll, i, 0.0)?, r0, &v);
            anchors.push(terminal_anchor(coll, i, v.w, at0.dx));
        }
        Ok(Self { jets, anchors })
    }
}

fn jet_of(coll: &Collocation, edge: usize, x: f64) -> Result<Jet> {
    let d = &coll.problem.data[edge];
    Ok(Jet {
        value: d.rho0.try_eval(x, 0.0)?,
        dx: d.rho0_x.try_eval(x, 0.0)?,
        dxx: d.rho0_xx.try_eval(x, 0.0)?,
        dt: 0.0,
    })
}

fn adjoint_den(coll: &Collocation) -> f64 {
    -coll.kappa().iter().sum::<f64>()
}

fn adjoint_vertex_at(coll: &Collocation, b: &AdjointCoefficients, td: &TerminalData, tp: &TPoint) -> (Vertex, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (k1, k2) = (coll.k1(), coll.k2());
    let cy: Vec<Vec<f64>> = b.edges.iter().map(|c| mat_vec(c, k1, k2, &tp.backward)).collect();
    let cyp: Vec<Vec<f64>> = b.edges.iter().map(|c| mat_vec(c, k1, k2, &tp.phi)).collect();
    let v = vertex_closure(coll.kappa(), &coll.grids.p2_one, &cy, &cyp, &td.anchors, adjoint_den(coll), 0.0);
    (v, cy, cyp)
}

/// Adjoint jets on the collocation grid.
#[derive(Debug, Clone)]
pub struct AdjointField {
    pub jets: Vec<Vec<Jet>>,
    pub vertex: Vec<Vertex>,
}

impl AdjointField {
    pub fn new(coll: &Collocation, b: &AdjointCoefficients, td: &TerminalData) -> Result<Self> {
        coll.check_shape(b, "adjoint coefficients")?;
        let n = coll.num_edges();
        let (k1, k2) = (coll.k1(), coll.k2());
        let g = &coll.grids;
        let mut jets = vec![vec![Jet::default(); k1 * k2]; n];
        let mut vertex = Vec::with_capacity(k2);
        for (kt, tp) in g.ts.iter().enumerate() {
            let (v, cy, cyp) = adjoint_vertex_at(coll, b, td, tp);
            for i in 0..n {
                for (kx, xp) in g.xs.iter().enumerate() {
                    jets[i][kx * k2 + kt] = combine(xp, &cy[i], &cyp[i], td.jets[i][kx], td.anchors[i], &v);
                }
            }
            vertex.push(v);
        }
        Ok(Self { jets, vertex })
    }

    pub fn jet(&self, edge: usize, kx: usize, kt: usize) -> Jet {
        self.jets[edge][kx * self.vertex.len() + kt]
    }
}

pub(crate) fn adjoint_residual_from_fields(
    coll: &Collocation,
    af: &AdjointField,
    sf: &StateField,
    ctrl: &ControlField,
) -> NodeValues {
    let (k1, k2) = (coll.k1(), coll.k2());
    let horizon = coll.problem.horizon();
    let mut out = coll.zeros();
    for (i, c) in coll.problem.coeffs.iter().enumerate() {
        for kx in 0..k1 {
            for kt in 0..k2 {
                let q = af.jet(i, kx, kt);
                let u = ctrl.nodes.get(i, kx, kt);
                let gap = sf.jet(i, kx, kt).value - coll.data.rho_d.get(i, kx, kt);
                out.set(i, kx, kt, -q.dt - c.a * q.dxx + c.b * u * q.dx - horizon * gap);
            }
        }
    }
    out
}

/// `-q_t - a q_xx + b u q_x - T (rho - rho_d)` at each node.
pub fn adjoint_residual(
    coll: &Collocation,
    b: &AdjointCoefficients,
    a: &StateCoefficients,
    u: &ControlCoefficients,
) -> Result<NodeValues> {
    let ctrl = ControlField::new(coll, u)?;
    let sf = StateField::new(coll, a, &ctrl)?;
    let td = TerminalData::new(coll, a, &ctrl)?;
    let af = AdjointField::new(coll, b, &td)?;
    Ok(adjoint_residual_from_fields(coll, &af, &sf, &ctrl))
}

/// Common adjoint vertex value `q(0, t)`.
pub fn adjoint_vertex_value(
    coll: &Collocation,
    b: &AdjointCoefficients,
    a: &StateCoefficients,
    u: &ControlCoefficients,
    t: f64,
) -> Result<f64> {
    let ev = FieldEvaluator::new(coll, a, u)?.with_adjoint(b)?;
    let tp = coll.grids.t_point_auto(t)?;
    Ok(ev.adjoint_vertex_at(&tp)?.0.w)
}

macro_rules! reconstruct_q {
    ($name:ident, $field:ident) => {
        pub fn $name(
            coll: &Collocation,
            b: &AdjointCoefficients,
            a: &StateCoefficients,
            u: &ControlCoefficients,
            x: f64,
            t: f64,
            edge: usize,
        ) -> Result<f64> {
            FieldEvaluator::new(coll, a, u)?.with_adjoint(b)?.adjoint(edge, x, t).map(|j| j.$field)
        }
    };
}

reconstruct_q!(reconstruct_q, value);
reconstruct_q!(reconstruct_q_x, dx);
reconstruct_q!(reconstruct_q_xx, dxx);
reconstruct_q!(reconstruct_q_t, dt);

impl FieldEvaluator<'_> {
    /// Terminal data at the grid nodes, recomputed from the point evaluator.
    fn terminal_data(&self) -> Result<TerminalData> {
        let (u0, u0t) = self.vertex_controls(&self.coll.grids.final_time);
        let ctrl_final = (u0, u0t);
        let g = &self.coll.grids;
        let (v, cy, cyp) = state_vertex_at(self.coll, self.a, &ctrl_final.0, &ctrl_final.1, &g.final_time)?;
        let x0 = g.x_point(0.0, Side::Right)?;
        let n = self.coll.num_edges();
        let mut anchors = Vec::with_capacity(n);
        for i in 0..n {
            let at0 = combine(&x0, &cy[i], &cyp[i], self.rho0_jet(i, 0.0)?, self.coll.data.rho0_anchor[i], &v);
            anchors.push(terminal_anchor(self.coll, i, v.w, at0.dx));
        }
        Ok(TerminalData { jets: Vec::new(), anchors })
    }

    pub(crate) fn adjoint_vertex_at(&self, tp: &TPoint) -> Result<(Vertex, Vec<Vec<f64>>, Vec<Vec<f64>>, TerminalData)> {
        let b = self.b.expect("adjoint coefficients attached");
        let td = self.terminal_data()?;
        let (v, cy, cyp) = adjoint_vertex_at(self.coll, b, &td, tp);
        Ok((v, cy, cyp, td))
    }

    /// `h = rho(x, 1-) - rho_T(x)` with its spatial derivatives.
    pub fn terminal_gap(&self, edge: usize, x: f64) -> Result<Jet> {
        let xp = self.coll.grids.x_point_auto(x)?;
        self.terminal_gap_at(edge, &xp)
    }

    fn terminal_gap_at(&self, edge: usize, xp: &XPoint) -> Result<Jet> {
        let rho = self.rho_at(edge, xp, &self.coll.grids.final_time)?;
        let d = &self.coll.problem.data[edge];
        let rt = Jet {
            value: d.rho_t.try_eval(xp.x, 0.0)?,
            dx: d.rho_t_x.try_eval(xp.x, 0.0)?,
            dxx: d.rho_t_xx.try_eval(xp.x, 0.0)?,
            dt: 0.0,
        };
        Ok(minus(rho, rt))
    }

    /// `q_i` and its derivatives at `(x, t)`. Requires [`FieldEvaluator::with_adjoint`].
    pub fn adjoint(&self, edge: usize, x: f64, t: f64) -> Result<Jet> {
        if self.b.is_none() {
            return Err(crate::error::Error::InvalidConfig("no adjoint coefficients attached".into()));
        }
        let xp = self.coll.grids.x_point_auto(x)?;
        let tp = self.coll.grids.t_point_auto(t)?;
        let (v, cy, cyp, td) = self.adjoint_vertex_at(&tp)?;
        let h = self.terminal_gap_at(edge, &xp)?;
        Ok(combine(&xp, &cy[edge], &cyp[edge], h, td.anchors[edge], &v))
    }
}

pub(crate) fn adjoint_operator_entries<'a>(
    coll: &'a Collocation,
    ctrl: &'a ControlField,
) -> impl Fn((usize, usize, usize), (usize, usize, usize)) -> f64 + Sync + 'a {
    let kappa = coll.kappa().to_vec();
    let den = adjoint_den(coll);
    move |(i, kx, kt): (usize, usize, usize), (j, p, q): (usize, usize, usize)| {
        let g = &coll.grids;
        let xp = &g.xs[kx];
        let tp = &g.ts[kt];
        let y = tp.backward[q];
        let yp = tp.phi[q];
        if y == 0.0 && yp == 0.0 {
            return 0.0;
        }
        let c = &coll.problem.coeffs[i];
        let u = ctrl.nodes.get(i, kx, kt);
        let mut e = 0.0;
        if i == j {
            e += -xp.xa[p] * yp + (-c.a * xp.phi[p] + c.b * u * xp.xb[p]) * y;
        }
        let s = kappa[j] * g.p2_one[p] / den;
        e + (-c.b * u) * s * y - (1.0 - xp.x) * s * yp
    }
}

/// Dense matrix of `d R_a / d B`.
pub fn adjoint_operator(coll: &Collocation, u: &ControlCoefficients) -> Result<faer::Mat<f64>> {
    let ctrl = ControlField::new(coll, u)?;
    let entry = adjoint_operator_entries(coll, &ctrl);
    Ok(dense_operator(Layout::of(coll), &entry))
}

/// Solves the adjoint collocation system for fixed state and control.
pub fn adjoint_solve(coll: &Collocation, a: &StateCoefficients, u: &ControlCoefficients) -> Result<AdjointCoefficients> {
    let ctrl = ControlField::new(coll, u)?;
    let sf = StateField::new(coll, a, &ctrl)?;
    let td = TerminalData::new(coll, a, &ctrl)?;
    let entry = adjoint_operator_entries(coll, &ctrl);
    let residual = |b: &EdgeMatrices| -> Result<EdgeMatrices> {
        let af = AdjointField::new(coll, b, &td)?;
        Ok(adjoint_residual_from_fields(coll, &af, &sf, &ctrl))
    };
    solve_time_blocked(Layout::of(coll), true, &residual, &entry, "adjoint collocation system")
}
