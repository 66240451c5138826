//! Collocation grids, basis caches and the mixed-derivative ansatz shared by
//! the state and adjoint discretizations.
//!
//! Both fields are written on each unit edge as
//!
//! ```text
//! d_xx y(x,t)  = Phi(x)^T C Y(t) + g''(x)
//! y(x,t)       = Xa(x)^T C Y(t) + g(x) - g(0) + x (g(0) - g(1)) + (1 - x) w(t)
//! d_x y(x,t)   = Xb(x)^T C Y(t) + g'(x) + g(0) - g(1) - w(t)
//! d_t y(x,t)   = Xa(x)^T C Y'(t) + (1 - x) w'(t)
//! ```
//!
//! with `Xa = P2(x) - x P2(1)`, `Xb = P1(x) - P2(1)` and `w` the common vertex
//! value. The state takes `Y = P1(t)` and `g = rho0`; the adjoint takes
//! `Y = -R(t)` (right integral) and `g = rho(., 1) - rho_T`.

pub mod adjoint;
pub mod state;

use crate::basis::{Basis, BasisSpec, Side};
use crate::dense::DenseLu;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::problem::NormalizedProblem;

/// Default guard for the state vertex denominator.
pub const DEFAULT_EPS_DEN: f64 = 1e-10;

/// One `K1 x K2` row-major matrix per edge. Used for coefficient sets and for
/// values on the collocation grid (`kx` row, `kt` column).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMatrices {
    pub k1: usize,
    pub k2: usize,
    pub edges: Vec<Vec<f64>>,
}

pub type StateCoefficients = EdgeMatrices;
pub type AdjointCoefficients = EdgeMatrices;
pub type ControlCoefficients = EdgeMatrices;
pub type NodeValues = EdgeMatrices;

impl EdgeMatrices {
    pub fn zeros(n: usize, k1: usize, k2: usize) -> Self {
        Self {
            k1,
            k2,
            edges: vec![vec![0.0; k1 * k2]; n],
        }
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn block(&self) -> usize {
        self.k1 * self.k2
    }

    pub fn get(&self, edge: usize, r: usize, c: usize) -> f64 {
        self.edges[edge][r * self.k2 + c]
    }

    pub fn set(&mut self, edge: usize, r: usize, c: usize, v: f64) {
        let k2 = self.k2;
        self.edges[edge][r * k2 + c] = v;
    }

    /// Edge-major, then row-major.
    pub fn flatten(&self) -> Vec<f64> {
        self.edges.concat()
    }

    pub fn from_flat(n: usize, k1: usize, k2: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != n * k1 * k2 {
            return Err(Error::DimensionMismatch(format!(
                "flat vector has {} entries, expected {n}x{k1}x{k2}",
                flat.len()
            )));
        }
        Ok(Self {
            k1,
            k2,
            edges: flat.chunks(k1 * k2).map(<[f64]>::to_vec).collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.edges
            .iter()
            .flatten()
            .fold(0.0, |m, v| if v.abs() > m || v.is_nan() { v.abs() } else { m })
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &EdgeMatrices) -> EdgeMatrices {
        let mut out = self.clone();
        for (a, b) in out.edges.iter_mut().zip(&other.edges) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &EdgeMatrices) -> f64 {
        self.axpy(-1.0, other).max_abs()
    }
}

/// `temp[p] = sum_q c[p][q] y[q]` in fixed order.
pub(crate) fn mat_vec(c: &[f64], k1: usize, k2: usize, y: &[f64]) -> Vec<f64> {
    (0..k1)
        .map(|p| {
            let row = &c[p * k2..(p + 1) * k2];
            let mut s = 0.0;
            for q in 0..k2 {
                s += row[q] * y[q];
            }
            s
        })
        .collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Spatial basis data at one point.
#[derive(Debug, Clone)]
pub struct XPoint {
    pub x: f64,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub xa: Vec<f64>,
    pub xb: Vec<f64>,
}

impl XPoint {
    fn new(basis: &Basis, p2_one: &[f64], x: f64, side: Side) -> Result<Self> {
        let phi = basis.eval_limit(x, side, false)?.values;
        let dphi = basis.eval_limit(x, side, true)?.values;
        let p1 = basis.left_integral(x)?.values;
        let p2 = basis.left_double_integral(x)?.values;
        let xa = p2.iter().zip(p2_one).map(|(a, b)| a - x * b).collect();
        let xb = p1.iter().zip(p2_one).map(|(a, b)| a - b).collect();
        Ok(Self { x, phi, dphi, xa, xb })
    }
}

/// Temporal basis data at one point.
#[derive(Debug, Clone)]
pub struct TPoint {
    pub t: f64,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    /// `P1(t)`, the forward time factor.
    pub forward: Vec<f64>,
    /// `-R(t)`, the backward time factor.
    pub backward: Vec<f64>,
}

impl TPoint {
    fn new(basis: &Basis, t: f64, side: Side) -> Result<Self> {
        Ok(Self {
            t,
            phi: basis.eval_limit(t, side, false)?.values,
            dphi: basis.eval_limit(t, side, true)?.values,
            forward: basis.left_integral(t)?.values,
            backward: basis.right_integral(t)?.values.iter().map(|v| -v).collect(),
        })
    }
}

fn default_side(s: f64) -> Side {
    if s >= 1.0 {
        Side::Left
    } else {
        Side::Right
    }
}

/// Bases, collocation nodes and every basis vector needed at them.
#[derive(Debug, Clone)]
pub struct Grids {
    pub bx: Basis,
    pub bt: Basis,
    pub xs: Vec<XPoint>,
    pub ts: Vec<TPoint>,
    /// `Phi(0)` in space.
    pub vertex_phi: Vec<f64>,
    pub p2_one: Vec<f64>,
    /// Time data at `t = 1` (left limits).
    pub final_time: TPoint,
}

impl Grids {
    pub fn new(sx: BasisSpec, st: BasisSpec) -> Result<Self> {
        let bx = Basis::new(sx)?;
        let bt = Basis::new(st)?;
        let p2_one = bx.left_double_integral(1.0)?.values;
        let xs = bx
            .collocation_points()
            .points
            .iter()
            .map(|&x| XPoint::new(&bx, &p2_one, x, Side::Right))
            .collect::<Result<_>>()?;
        let ts = bt
            .collocation_points()
            .points
            .iter()
            .map(|&t| TPoint::new(&bt, t, Side::Right))
            .collect::<Result<_>>()?;
        Ok(Self {
            vertex_phi: bx.eval(0.0)?.values,
            final_time: TPoint::new(&bt, 1.0, Side::Left)?,
            bx,
            bt,
            xs,
            ts,
            p2_one,
        })
    }

    pub fn k1(&self) -> usize {
        self.xs.len()
    }

    pub fn k2(&self) -> usize {
        self.ts.len()
    }

    pub fn x_point(&self, x: f64, side: Side) -> Result<XPoint> {
        XPoint::new(&self.bx, &self.p2_one, x, side)
    }

    pub fn t_point(&self, t: f64, side: Side) -> Result<TPoint> {
        TPoint::new(&self.bt, t, side)
    }

    /// Point data with right limits at breakpoints, left limits at 1.
    pub fn x_point_auto(&self, x: f64) -> Result<XPoint> {
        self.x_point(x, default_side(x))
    }

    pub fn t_point_auto(&self, t: f64) -> Result<TPoint> {
        self.t_point(t, default_side(t))
    }
}

/// Values of `y`, `g` and their derivatives at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub dx: f64,
    pub dxx: f64,
    pub dt: f64,
}

/// Data-dependent anchor values `g(0)`, `g(1)`, `g'(0)` of an edge.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Anchor {
    pub g0: f64,
    pub g1: f64,
    pub gx0: f64,
}

/// Vertex value and its time derivative with the pieces of the closure.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Vertex {
    pub w: f64,
    pub wt: f64,
    pub num: f64,
    pub dnum: f64,
    pub den: f64,
    pub dden: f64,
}

/// `w = Num / Den` with `Num = sum_j kappa_j (P2(1)^T C_j Y + g_j(1) - g_j(0) - g_j'(0))`.
pub(crate) fn vertex_closure(
    kappa: &[f64],
    p2_one: &[f64],
    cy: &[Vec<f64>],
    cyp: &[Vec<f64>],
    anchors: &[Anchor],
    den: f64,
    dden: f64,
) -> Vertex {
    let mut num = 0.0;
    let mut dnum = 0.0;
    for j in 0..kappa.len() {
        let a = anchors[j];
        num += kappa[j] * (dot(p2_one, &cy[j]) + a.g1 - a.g0 - a.gx0);
        dnum += kappa[j] * dot(p2_one, &cyp[j]);
    }
    let w = num / den;
    let wt = dnum / den - num * dden / (den * den);
    Vertex { w, wt, num, dnum, den, dden }
}

/// Assembles the field jet on one edge from the projected ansatz terms.
pub(crate) fn combine(xp: &XPoint, cy: &[f64], cyp: &[f64], g: Jet, a: Anchor, v: &Vertex) -> Jet {
    let x = xp.x;
    Jet {
        value: dot(&xp.xa, cy) + g.value - a.g0 + x * (a.g0 - a.g1) + (1.0 - x) * v.w,
        dx: dot(&xp.xb, cy) + g.dx + a.g0 - a.g1 - v.w,
        dxx: dot(&xp.phi, cy) + g.dxx,
        dt: dot(&xp.xa, cyp) + (1.0 - x) * v.wt,
    }
}

fn eval_node(e: &Expr, x: f64, t: f64) -> Result<f64> {
    e.try_eval(x, t)
}

/// Problem data sampled on the collocation grid.
#[derive(Debug, Clone)]
pub(crate) struct DataCache {
    /// `rho0` jets at the spatial nodes, per edge.
    pub rho0: Vec<Vec<Jet>>,
    pub rho0_anchor: Vec<Anchor>,
    /// `rho_T` jets at the spatial nodes, per edge.
    pub rho_t: Vec<Vec<Jet>>,
    pub rho_t_anchor: Vec<Anchor>,
    pub rho_d: NodeValues,
    pub forcing: NodeValues,
}

fn static_jets(v: &Expr, vx: &Expr, vxx: &Expr, xs: &[XPoint]) -> Result<Vec<Jet>> {
    xs.iter()
        .map(|p| {
            Ok(Jet {
                value: eval_node(v, p.x, 0.0)?,
                dx: eval_node(vx, p.x, 0.0)?,
                dxx: eval_node(vxx, p.x, 0.0)?,
                dt: 0.0,
            })
        })
        .collect()
}

fn anchor(v: &Expr, vx: &Expr) -> Result<Anchor> {
    Ok(Anchor {
        g0: eval_node(v, 0.0, 0.0)?,
        g1: eval_node(v, 1.0, 0.0)?,
        gx0: eval_node(vx, 0.0, 0.0)?,
    })
}

impl DataCache {
    fn new(p: &NormalizedProblem, g: &Grids) -> Result<Self> {
        let n = p.num_edges();
        let (k1, k2) = (g.k1(), g.k2());
        let mut rho_d = NodeValues::zeros(n, k1, k2);
        let mut forcing = NodeValues::zeros(n, k1, k2);
        for i in 0..n {
            for (kx, xp) in g.xs.iter().enumerate() {
                for (kt, tp) in g.ts.iter().enumerate() {
                    rho_d.set(i, kx, kt, eval_node(&p.data[i].rho_d, xp.x, tp.t)?);
                    forcing.set(i, kx, kt, eval_node(&p.data[i].forcing, xp.x, tp.t)?);
                }
            }
        }
        Ok(Self {
            rho0: p
                .data
                .iter()
                .map(|d| static_jets(&d.rho0, &d.rho0_x, &d.rho0_xx, &g.xs))
                .collect::<Result<_>>()?,
            rho0_anchor: p.data.iter().map(|d| anchor(&d.rho0, &d.rho0_x)).collect::<Result<_>>()?,
            rho_t: p
                .data
                .iter()
                .map(|d| static_jets(&d.rho_t, &d.rho_t_x, &d.rho_t_xx, &g.xs))
                .collect::<Result<_>>()?,
            rho_t_anchor: p.data.iter().map(|d| anchor(&d.rho_t, &d.rho_t_x)).collect::<Result<_>>()?,
            rho_d,
            forcing,
        })
    }
}

/// A normalized problem together with its grids and cached data.
#[derive(Debug, Clone)]
pub struct Collocation {
    pub problem: NormalizedProblem,
    pub grids: Grids,
    pub eps_den: f64,
    pub(crate) data: DataCache,
    kappa: Vec<f64>,
}

impl Collocation {
    pub fn new(problem: NormalizedProblem, sx: BasisSpec, st: BasisSpec) -> Result<Self> {
        let grids = Grids::new(sx, st)?;
        let data = DataCache::new(&problem, &grids)?;
        let kappa = problem.coeffs.iter().map(|c| c.kappa).collect();
        Ok(Self {
            problem,
            grids,
            eps_den: DEFAULT_EPS_DEN,
            data,
            kappa,
        })
    }

    pub fn with_eps_den(mut self, eps: f64) -> Self {
        self.eps_den = eps;
        self
    }

    pub fn num_edges(&self) -> usize {
        self.problem.num_edges()
    }

    pub fn k1(&self) -> usize {
        self.grids.k1()
    }

    pub fn k2(&self) -> usize {
        self.grids.k2()
    }

    /// Unknowns per field, `N K1 K2`.
    pub fn field_size(&self) -> usize {
        self.num_edges() * self.k1() * self.k2()
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn zeros(&self) -> EdgeMatrices {
        EdgeMatrices::zeros(self.num_edges(), self.k1(), self.k2())
    }

    pub(crate) fn check_shape(&self, m: &EdgeMatrices, what: &str) -> Result<()> {
        if m.num_edges() != self.num_edges() || m.k1 != self.k1() || m.k2 != self.k2() {
            return Err(Error::DimensionMismatch(format!(
                "{what}: {}x{}x{} does not match {}x{}x{}",
                m.num_edges(),
                m.k1,
                m.k2,
                self.num_edges(),
                self.k1(),
                self.k2()
            )));
        }
        Ok(())
    }

    /// Interpolates node values by a coefficient matrix: solves
    /// `Phi_x C Phi_t^T = V` on the collocation grid.
    pub fn interpolate(&self, values: &NodeValues) -> Result<EdgeMatrices> {
        self.check_shape(values, "node values")?;
        let (k1, k2) = (self.k1(), self.k2());
        let fx = DenseLu::factor(k1, |r, c| self.grids.xs[r].phi[c], "spatial interpolation")?;
        let ft = DenseLu::factor(k2, |r, c| self.grids.ts[r].phi[c], "temporal interpolation")?;
        let mut out = self.zeros();
        for (i, v) in values.edges.iter().enumerate() {
            // Phi_x Z = V, then Phi_t C^T = Z^T.
            let mut z = vec![0.0; k1 * k2];
            for kt in 0..k2 {
                let col: Vec<f64> = (0..k1).map(|kx| v[kx * k2 + kt]).collect();
                let s = fx.solve(&col);
                for p in 0..k1 {
                    z[p * k2 + kt] = s[p];
                }
            }
            for p in 0..k1 {
                let s = ft.solve(&z[p * k2..(p + 1) * k2]);
                out.edges[i][p * k2..(p + 1) * k2].copy_from_slice(&s);
            }
        }
        Ok(out)
    }
}

/// Control values and derivatives on the collocation grid and at the vertex.
#[derive(Debug, Clone)]
pub struct ControlField {
    pub nodes: NodeValues,
    pub nodes_x: NodeValues,
    /// `u_j(0, t_kt)` per edge.
    pub vertex: Vec<Vec<f64>>,
    /// `d_t u_j(0, t_kt)` per edge.
    pub vertex_t: Vec<Vec<f64>>,
    /// `u_j(0, 1-)` and its time derivative.
    pub vertex_final: Vec<f64>,
    pub vertex_final_t: Vec<f64>,
}

/// `(u, u_x)` of one edge at a point.
pub(crate) fn control_point(u: &[f64], k1: usize, k2: usize, xp: &XPoint, tp: &TPoint) -> (f64, f64) {
    let temp = mat_vec(u, k1, k2, &tp.phi);
    (dot(&xp.phi, &temp), dot(&xp.dphi, &temp))
}

/// `(u(0,t), d_t u(0,t))` of one edge.
pub(crate) fn control_vertex(u: &[f64], k1: usize, k2: usize, vphi: &[f64], tp: &TPoint) -> (f64, f64) {
    let temp = mat_vec(u, k1, k2, &tp.phi);
    let dtemp = mat_vec(u, k1, k2, &tp.dphi);
    (dot(vphi, &temp), dot(vphi, &dtemp))
}

impl ControlField {
    pub fn new(coll: &Collocation, u: &ControlCoefficients) -> Result<Self> {
        coll.check_shape(u, "control coefficients")?;
        let g = &coll.grids;
        let (k1, k2) = (coll.k1(), coll.k2());
        let n = coll.num_edges();
        let mut nodes = coll.zeros();
        let mut nodes_x = coll.zeros();
        let mut vertex = vec![vec![0.0; k2]; n];
        let mut vertex_t = vec![vec![0.0; k2]; n];
        let mut vertex_final = vec![0.0; n];
        let mut vertex_final_t = vec![0.0; n];
        for i in 0..n {
            let ui = &u.edges[i];
            for (kt, tp) in g.ts.iter().enumerate() {
                for (kx, xp) in g.xs.iter().enumerate() {
                    let (v, vx) = control_point(ui, k1, k2, xp, tp);
                    nodes.set(i, kx, kt, v);
                    nodes_x.set(i, kx, kt, vx);
                }
                let (v0, v0t) = control_vertex(ui, k1, k2, &g.vertex_phi, tp);
                vertex[i][kt] = v0;
                vertex_t[i][kt] = v0t;
            }
            let (v0, v0t) = control_vertex(ui, k1, k2, &g.vertex_phi, &g.final_time);
            vertex_final[i] = v0;
            vertex_final_t[i] = v0t;
        }
        Ok(Self {
            nodes,
            nodes_x,
            vertex,
            vertex_t,
            vertex_final,
            vertex_final_t,
        })
    }
}

/// Row/column layout of a field block of unknowns or residuals.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    /// Polynomials (and nodes) per time cell.
    pub m2: usize,
}

impl Layout {
    pub fn of(coll: &Collocation) -> Self {
        Self {
            n: coll.num_edges(),
            k1: coll.k1(),
            k2: coll.k2(),
            m2: coll.grids.bt.spec().polys(),
        }
    }

    pub fn size(&self) -> usize {
        self.n * self.k1 * self.k2
    }

    pub fn decode(&self, idx: usize) -> (usize, usize, usize) {
        let b = self.k1 * self.k2;
        (idx / b, (idx % b) / self.k2, idx % self.k2)
    }

    fn cells(&self) -> usize {
        self.k2 / self.m2
    }

    /// Flat indices whose time index lies in `cell`.
    fn in_cell(&self, cell: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n * self.k1 * self.m2);
        for i in 0..self.n {
            for r in 0..self.k1 {
                for c in cell * self.m2..(cell + 1) * self.m2 {
                    out.push((i * self.k1 + r) * self.k2 + c);
                }
            }
        }
        out
    }
}

/// Entry of a field operator: row `(edge, kx, kt)`, column `(edge, p, q)`.
pub(crate) type EntryFn<'a> = dyn Fn((usize, usize, usize), (usize, usize, usize)) -> f64 + Sync + 'a;

/// Dense matrix of a field operator.
pub(crate) fn dense_operator(layout: Layout, entry: &EntryFn<'_>) -> faer::Mat<f64> {
    let n = layout.size();
    faer::Mat::from_fn(n, n, |r, c| entry(layout.decode(r), layout.decode(c)))
}

/// Solves an affine collocation system `R(z) = 0` whose operator is block
/// triangular in time cells: lower (forward in time) or upper (backward).
pub(crate) fn solve_time_blocked(
    layout: Layout,
    backward: bool,
    residual: &dyn Fn(&EdgeMatrices) -> Result<EdgeMatrices>,
    entry: &EntryFn<'_>,
    context: &'static str,
) -> Result<EdgeMatrices> {
    let cells = layout.cells();
    let order: Vec<usize> = if backward {
        (0..cells).rev().collect()
    } else {
        (0..cells).collect()
    };
    let blocks = order
        .iter()
        .map(|&cell| {
            let idx = layout.in_cell(cell);
            let lu = DenseLu::factor(
                idx.len(),
                |r, c| entry(layout.decode(idx[r]), layout.decode(idx[c])),
                context,
            )?;
            Ok((idx, lu))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut z = vec![0.0; layout.size()];
    let zero = EdgeMatrices::zeros(layout.n, layout.k1, layout.k2);
    let r0 = residual(&zero)?.max_abs().max(1.0);
    for _pass in 0..3 {
        for (idx, lu) in &blocks {
            let cur = EdgeMatrices::from_flat(layout.n, layout.k1, layout.k2, &z)?;
            let r = residual(&cur)?.flatten();
            let rhs: Vec<f64> = idx.iter().map(|&k| -r[k]).collect();
            let dz = lu.solve(&rhs);
            for (&k, d) in idx.iter().zip(dz) {
                z[k] += d;
            }
        }
        let cur = EdgeMatrices::from_flat(layout.n, layout.k1, layout.k2, &z)?;
        if residual(&cur)?.max_abs() <= 1e-13 * r0 {
            break;
        }
    }
    let out = EdgeMatrices::from_flat(layout.n, layout.k1, layout.k2, &z)?;
    let rn = residual(&out)?.max_abs();
    if !rn.is_finite() {
        return Err(Error::SingularSystem {
            context: context.to_string(),
            ratio: f64::INFINITY,
        });
    }
    Ok(out)
}
