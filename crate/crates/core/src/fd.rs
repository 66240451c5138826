//! Finite-volume / theta-scheme reference solvers on the star graph:
//! forward, tangent and discrete adjoint problems, mass balance and
//! positivity checks.
//!
//! Nodes are vertex-centred. Interior nodes own a full cell, the vertex owns
//! one half cell per edge and a reflecting outer end owns a half cell. The
//! flux `F = D rho_x + u rho` is evaluated at cell faces as
//! `D (rho_{j+1} - rho_j) / h + (u_{j+1} rho_{j+1} + u_j rho_j) / 2`, and
//! the Kirchhoff condition becomes the balance of the vertex half cells.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::problem::StarProblem;

/// Condition at the outer end `x = l_i` of every edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterCondition {
    Dirichlet,
    /// Zero total flux `D rho_x + u rho = 0`.
    Reflecting,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdGrid {
    pub nx: usize,
    pub nt: usize,
    /// `1` implicit Euler, `0.5` Crank-Nicolson.
    pub theta: f64,
    pub outer: OuterCondition,
}

impl FdGrid {
    pub fn new(nx: usize, nt: usize, theta: f64) -> Result<Self> {
        if nx < 4 || nt < 2 {
            return Err(Error::InvalidConfig(format!("FD grid needs nx >= 4 and nt >= 2, got {nx}x{nt}")));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidConfig(format!("theta must lie in [0, 1], got {theta}")));
        }
        Ok(Self {
            nx,
            nt,
            theta,
            outer: OuterCondition::Dirichlet,
        })
    }

    pub fn with_outer(mut self, outer: OuterCondition) -> Self {
        self.outer = outer;
        self
    }

    /// Unknown nodes per edge besides the vertex.
    fn interior(&self) -> usize {
        match self.outer {
            OuterCondition::Dirichlet => self.nx - 1,
            OuterCondition::Reflecting => self.nx,
        }
    }
}

/// Nodal values per edge on `(nx + 1) x (nt + 1)` points, stored `j * (nt + 1) + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdField {
    pub nx: usize,
    pub nt: usize,
    pub edges: Vec<Vec<f64>>,
}

impl FdField {
    pub fn zeros(edges: usize, nx: usize, nt: usize) -> Self {
        Self {
            nx,
            nt,
            edges: vec![vec![0.0; (nx + 1) * (nt + 1)]; edges],
        }
    }

    pub fn get(&self, edge: usize, j: usize, n: usize) -> f64 {
        self.edges[edge][j * (self.nt + 1) + n]
    }

    pub fn set(&mut self, edge: usize, j: usize, n: usize, v: f64) {
        let nt = self.nt;
        self.edges[edge][j * (nt + 1) + n] = v;
    }

    /// Samples one expression per edge in physical coordinates.
    pub fn sample(problem: &StarProblem, grid: &FdGrid, exprs: &[Expr]) -> Result<Self> {
        let mut f = Self::zeros(problem.num_edges(), grid.nx, grid.nt);
        let dt = problem.horizon / grid.nt as f64;
        for (i, e) in exprs.iter().enumerate() {
            let h = problem.edges[i].l / grid.nx as f64;
            for j in 0..=grid.nx {
                for n in 0..=grid.nt {
                    f.set(i, j, n, e.try_eval(j as f64 * h, n as f64 * dt)?);
                }
            }
        }
        Ok(f)
    }

    pub fn max_abs(&self) -> f64 {
        self.edges.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &FdField) -> FdField {
        let mut out = self.clone();
        for (a, b) in out.edges.iter_mut().zip(&other.edges) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &FdField) -> f64 {
        self.axpy(-1.0, other).max_abs()
    }
}

/// Per-edge tridiagonal block coupled to the vertex through its first row
/// and column.
#[derive(Debug, Clone)]
struct Arrow {
    vertex: f64,
    /// Vertex-row entry multiplying node 1 of each edge.
    row: Vec<f64>,
    /// Node-1 entry multiplying the vertex, per edge.
    col: Vec<f64>,
    lower: Vec<Vec<f64>>,
    diag: Vec<Vec<f64>>,
    upper: Vec<Vec<f64>>,
}

/// State vector: vertex value followed by the unknown nodes of every edge.
#[derive(Debug, Clone, PartialEq)]
struct Vector {
    v: f64,
    e: Vec<Vec<f64>>,
}

impl Vector {
    fn zeros(n: usize, m: usize) -> Self {
        Self { v: 0.0, e: vec![vec![0.0; m]; n] }
    }

    fn axpy(&mut self, s: f64, o: &Vector) {
        self.v += s * o.v;
        for (a, b) in self.e.iter_mut().zip(&o.e) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
    }

    fn dot(&self, o: &Vector) -> f64 {
        let mut s = self.v * o.v;
        for (a, b) in self.e.iter().zip(&o.e) {
            for (x, y) in a.iter().zip(b) {
                s += x * y;
            }
        }
        s
    }
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut piv = diag[0];
    if piv == 0.0 {
        return None;
    }
    c[0] = if m > 1 { upper[0] / piv } else { 0.0 };
    d[0] = rhs[0] / piv;
    for k in 1..m {
        piv = diag[k] - lower[k] * c[k - 1];
        if piv == 0.0 || !piv.is_finite() {
            return None;
        }
        c[k] = if k + 1 < m { upper[k] / piv } else { 0.0 };
        d[k] = (rhs[k] - lower[k] * d[k - 1]) / piv;
    }
    for k in (0..m - 1).rev() {
        d[k] -= c[k] * d[k + 1];
    }
    Some(d)
}

impl Arrow {
    fn zeros(n: usize, m: usize) -> Self {
        Self {
            vertex: 0.0,
            row: vec![0.0; n],
            col: vec![0.0; n],
            lower: vec![vec![0.0; m]; n],
            diag: vec![vec![0.0; m]; n],
            upper: vec![vec![0.0; m]; n],
        }
    }

    fn mul(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(self.row.len(), self.diag[0].len());
        out.v = self.vertex * x.v;
        for i in 0..self.row.len() {
            out.v += self.row[i] * x.e[i][0];
            let (lo, di, up, xe) = (&self.lower[i], &self.diag[i], &self.upper[i], &x.e[i]);
            let m = di.len();
            for k in 0..m {
                let mut s = di[k] * xe[k];
                if k > 0 {
                    s += lo[k] * xe[k - 1];
                }
                if k + 1 < m {
                    s += up[k] * xe[k + 1];
                }
                out.e[i][k] = s;
            }
            out.e[i][0] += self.col[i] * x.v;
        }
        out
    }

    fn transpose(&self) -> Arrow {
        let shift = |up: &Vec<f64>| {
            let mut lo = vec![0.0; up.len()];
            let n = up.len();
            lo[1..].copy_from_slice(&up[..n - 1]);
            lo
        };
        let unshift = |lo: &Vec<f64>| {
            let mut up = vec![0.0; lo.len()];
            let n = lo.len();
            up[..n - 1].copy_from_slice(&lo[1..]);
            up
        };
        Arrow {
            vertex: self.vertex,
            row: self.col.clone(),
            col: self.row.clone(),
            lower: self.upper.iter().map(shift).collect(),
            diag: self.diag.clone(),
            upper: self.lower.iter().map(unshift).collect(),
        }
    }

    /// `self + s * other`.
    fn combine(&self, s: f64, o: &Arrow) -> Arrow {
        let add = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + s * q).collect()).collect()
        };
        Arrow {
            vertex: self.vertex + s * o.vertex,
            row: self.row.iter().zip(&o.row).map(|(a, b)| a + s * b).collect(),
            col: self.col.iter().zip(&o.col).map(|(a, b)| a + s * b).collect(),
            lower: add(&self.lower, &o.lower),
            diag: add(&self.diag, &o.diag),
            upper: add(&self.upper, &o.upper),
        }
    }

    fn solve(&self, rhs: &Vector) -> Result<Vector> {
        let singular = || Error::SingularSystem {
            context: "finite-difference step system".to_string(),
            ratio: f64::INFINITY,
        };
        let n = self.row.len();
        let mut xs = Vec::with_capacity(n);
        let mut zs = Vec::with_capacity(n);
        let mut den = self.vertex;
        let mut num = rhs.v;
        for i in 0..n {
            let m = self.diag[i].len();
            let x = thomas(&self.lower[i], &self.diag[i], &self.upper[i], &rhs.e[i]).ok_or_else(singular)?;
            let mut unit = vec![0.0; m];
            unit[0] = self.col[i];
            let z = thomas(&self.lower[i], &self.diag[i], &self.upper[i], &unit).ok_or_else(singular)?;
            num -= self.row[i] * x[0];
            den -= self.row[i] * z[0];
            xs.push(x);
            zs.push(z);
        }
        if den == 0.0 || !den.is_finite() {
            return Err(singular());
        }
        let v = num / den;
        let e = xs
            .into_iter()
            .zip(zs)
            .map(|(x, z)| x.iter().zip(&z).map(|(a, b)| a - v * b).collect())
            .collect();
        Ok(Vector { v, e })
    }
}

/// Geometry and data shared by all solvers.
struct Setup<'a> {
    problem: &'a StarProblem,
    grid: FdGrid,
    h: Vec<f64>,
    dt: f64,
    m: usize,
    /// Diagonal mass weights of the unknown nodes.
    weights: Vector,
}

impl<'a> Setup<'a> {
    fn new(problem: &'a StarProblem, grid: &FdGrid) -> Result<Self> {
        problem.validate_structure()?;
        let n = problem.num_edges();
        let h: Vec<f64> = problem.edges.iter().map(|e| e.l / grid.nx as f64).collect();
        let m = grid.interior();
        let mut weights = Vector::zeros(n, m);
        weights.v = h.iter().map(|h| 0.5 * h).sum();
        for i in 0..n {
            for k in 0..m {
                weights.e[i][k] = h[i];
            }
            if grid.outer == OuterCondition::Reflecting {
                weights.e[i][m - 1] = 0.5 * h[i];
            }
        }
        Ok(Self {
            problem,
            grid: *grid,
            dt: problem.horizon / grid.nt as f64,
            h,
            m,
            weights,
        })
    }

    fn n(&self) -> usize {
        self.problem.num_edges()
    }

    fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Flux operator `K(u)` at one time level (`diffusion` toggles the `D` part).
    fn operator(&self, u: &FdField, level: usize, diffusion: bool) -> Arrow {
        let n = self.n();
        let m = self.m;
        let mut k = Arrow::zeros(n, m);
        for i in 0..n {
            let dh = if diffusion { self.problem.edges[i].diffusion / self.h[i] } else { 0.0 };
            let nx = self.grid.nx;
            for j in 0..nx {
                // Face j + 1/2 between nodes j and j + 1.
                let cr = dh + 0.5 * u.get(i, j + 1, level);
                let cl = -dh + 0.5 * u.get(i, j, level);
                let right_unknown = j < m;
                // Node j receives +F.
                if j == 0 {
                    k.vertex += cl;
                    if right_unknown {
                        k.row[i] += cr;
                    }
                } else {
                    k.diag[i][j - 1] += cl;
                    if right_unknown {
                        k.upper[i][j - 1] += cr;
                    }
                }
                // Node j + 1 receives -F.
                if right_unknown {
                    k.diag[i][j] -= cr;
                    if j == 0 {
                        k.col[i] -= cl;
                    } else {
                        k.lower[i][j] -= cl;
                    }
                }
            }
        }
        k
    }

    /// Weighted forcing at one time level.
    fn source(&self, level: usize) -> Result<Vector> {
        let t = self.time(level);
        let mut s = Vector::zeros(self.n(), self.m);
        for i in 0..self.n() {
            let f = &self.problem.data[i].forcing;
            s.v += 0.5 * self.h[i] * f.try_eval(0.0, t)?;
            for k in 0..self.m {
                s.e[i][k] = self.weights.e[i][k] * f.try_eval((k + 1) as f64 * self.h[i], t)?;
            }
        }
        Ok(s)
    }

    fn sample(&self, e: impl Fn(usize, f64) -> Result<f64>) -> Result<Vector> {
        let mut y = Vector::zeros(self.n(), self.m);
        y.v = e(0, 0.0)?;
        for i in 0..self.n() {
            for k in 0..self.m {
                y.e[i][k] = e(i, (k + 1) as f64 * self.h[i])?;
            }
        }
        Ok(y)
    }

    fn diag_matrix(&self) -> Arrow {
        let mut w = Arrow::zeros(self.n(), self.m);
        w.vertex = self.weights.v;
        w.diag = self.weights.e.clone();
        w
    }

    fn store(&self, field: &mut FdField, level: usize, y: &Vector) {
        for i in 0..self.n() {
            field.set(i, 0, level, y.v);
            for k in 0..self.m {
                field.set(i, k + 1, level, y.e[i][k]);
            }
        }
    }

    fn load(&self, field: &FdField, level: usize) -> Vector {
        let mut y = Vector::zeros(self.n(), self.m);
        y.v = field.get(0, 0, level);
        for i in 0..self.n() {
            for k in 0..self.m {
                y.e[i][k] = field.get(i, k + 1, level);
            }
        }
        y
    }

    fn check_control(&self, u: &FdField) -> Result<()> {
        if u.nx != self.grid.nx || u.nt != self.grid.nt || u.edges.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "control field {}x{} on {} edges does not match grid {}x{} on {} edges",
                u.nx,
                u.nt,
                u.edges.len(),
                self.grid.nx,
                self.grid.nt,
                self.n()
            )));
        }
        Ok(())
    }

    /// Theta-stepping of `W y' = K(u) y + s` with per-level extra sources.
    fn march(&self, u: &FdField, y0: Vector, extra: &dyn Fn(usize) -> Result<Vector>) -> Result<FdField> {
        let (theta, dt) = (self.grid.theta, self.dt);
        let w = self.diag_matrix();
        let mut out = FdField::zeros(self.n(), self.grid.nx, self.grid.nt);
        self.store(&mut out, 0, &y0);
        let mut y = y0;
        let mut k_old = self.operator(u, 0, true);
        let mut s_old = extra(0)?;
        for level in 1..=self.grid.nt {
            let k_new = self.operator(u, level, true);
            let s_new = extra(level)?;
            let mut rhs = w.combine(dt * (1.0 - theta), &k_old).mul(&y);
            rhs.axpy(dt * theta, &s_new);
            rhs.axpy(dt * (1.0 - theta), &s_old);
            y = w.combine(-dt * theta, &k_new).solve(&rhs)?;
            self.store(&mut out, level, &y);
            k_old = k_new;
            s_old = s_new;
        }
        Ok(out)
    }
}

impl StarProblem {
    /// Structural checks only (edge data and counts), without the initial-data
    /// compatibility that reflecting variants do not need.
    pub(crate) fn validate_structure(&self) -> Result<()> {
        match self.validate() {
            Ok(()) => Ok(()),
            Err(Error::InvalidProblem(errs)) => {
                let hard: Vec<String> = errs.into_iter().filter(|e| !(e.starts_with("data.rho0") && e.contains("outer value"))).collect();
                if hard.is_empty() {
                    Ok(())
                } else {
                    Err(Error::InvalidProblem(hard))
                }
            }
            Err(e) => Err(e),
        }
    }
}

/// Solves the state equation with control `u` (physical nodal values).
pub fn fd_forward(problem: &StarProblem, u: &FdField, grid: &FdGrid) -> Result<FdField> {
    let s = Setup::new(problem, grid)?;
    s.check_control(u)?;
    let y0 = s.sample(|i, x| problem.data[i].rho0.try_eval(x, 0.0))?;
    s.march(u, y0, &|level| s.source(level))
}

/// Linearized state in direction `v` around the forward solution `rho`.
pub fn fd_tangent(problem: &StarProblem, u: &FdField, v: &FdField, rho: &FdField, grid: &FdGrid) -> Result<FdField> {
    let s = Setup::new(problem, grid)?;
    s.check_control(u)?;
    s.check_control(v)?;
    s.check_control(rho)?;
    let y0 = Vector::zeros(s.n(), s.m);
    s.march(u, y0, &|level| Ok(s.operator(v, level, false).mul(&s.load(rho, level))))
}

/// Trapezoid weights in time.
fn time_weight(s: &Setup<'_>, n: usize) -> f64 {
    if n == 0 || n == s.grid.nt {
        0.5 * s.dt
    } else {
        s.dt
    }
}

/// Per-edge trapezoid weight of node `j` in space.
fn space_weight(s: &Setup<'_>, i: usize, j: usize) -> f64 {
    if j == 0 || j == s.grid.nx {
        0.5 * s.h[i]
    } else {
        s.h[i]
    }
}

fn tracking_field(problem: &StarProblem, grid: &FdGrid, rho: &FdField) -> Result<(FdField, Vec<Vec<f64>>)> {
    let dts: Vec<Expr> = problem.data.iter().map(|d| d.rho_d.clone()).collect();
    let gap = rho.axpy(-1.0, &FdField::sample(problem, grid, &dts)?);
    let terminal = (0..problem.num_edges())
        .map(|i| {
            let h = problem.edges[i].l / grid.nx as f64;
            (0..=grid.nx)
                .map(|j| Ok(rho.get(i, j, grid.nt) - problem.data[i].rho_t.try_eval(j as f64 * h, 0.0)?))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((gap, terminal))
}

/// Discrete cost: trapezoid rule in space (per edge) and time.
pub fn fd_cost(problem: &StarProblem, u: &FdField, rho: &FdField, grid: &FdGrid) -> Result<f64> {
    let s = Setup::new(problem, grid)?;
    let (gap, terminal) = tracking_field(problem, grid, rho)?;
    let mut total = 0.0;
    for i in 0..s.n() {
        let alpha = problem.edges[i].alpha;
        for j in 0..=grid.nx {
            let w = space_weight(&s, i, j);
            for n in 0..=grid.nt {
                let (g, uu) = (gap.get(i, j, n), u.get(i, j, n));
                total += time_weight(&s, n) * w * (g * g + alpha * uu * uu);
            }
            total += w * terminal[i][j] * terminal[i][j];
        }
    }
    Ok(0.5 * total)
}

/// Reduced cost `u -> J(G(u), u)`.
pub fn fd_reduced_cost(problem: &StarProblem, u: &FdField, grid: &FdGrid) -> Result<f64> {
    let rho = fd_forward(problem, u, grid)?;
    fd_cost(problem, u, &rho, grid)
}

/// Adjoint field together with the exact gradient of the discrete reduced cost.
#[derive(Debug, Clone)]
pub struct FdAdjoint {
    /// Discrete multipliers; they approximate `q` at the nodes.
    pub q: FdField,
    /// `dJ / du_{ij}^n` divided by the trapezoid weight `c_n w_ij`; the
    /// discrete counterpart of `alpha u - rho q_x`.
    pub gradient: FdField,
    /// Unscaled derivative `dJ / du_{ij}^n`.
    pub derivative: FdField,
}

/// Backward solve of the transposed theta scheme.
pub fn fd_adjoint(problem: &StarProblem, u: &FdField, rho: &FdField, grid: &FdGrid) -> Result<FdAdjoint> {
    let s = Setup::new(problem, grid)?;
    s.check_control(u)?;
    s.check_control(rho)?;
    let (theta, dt, nt) = (grid.theta, s.dt, grid.nt);
    let (gap, terminal) = tracking_field(problem, grid, rho)?;
    let w = s.diag_matrix();
    // Gradient of the tracking terms with respect to the unknowns at level n.
    let cost_grad = |n: usize| -> Vector {
        let mut g = Vector::zeros(s.n(), s.m);
        let c = time_weight(&s, n);
        for i in 0..s.n() {
            g.v += 0.5 * s.h[i] * c * gap.get(i, 0, n);
            for k in 0..s.m {
                g.e[i][k] = c * s.weights.e[i][k] * gap.get(i, k + 1, n);
            }
            if n == nt {
                g.v += 0.5 * s.h[i] * terminal[i][0];
                for k in 0..s.m {
                    g.e[i][k] += s.weights.e[i][k] * terminal[i][k + 1];
                }
            }
        }
        g
    };
    let mut lambda = vec![Vector::zeros(s.n(), s.m); nt + 2];
    for n in (0..=nt).rev() {
        let kn = s.operator(u, n, true).transpose();
        let mut rhs = cost_grad(n);
        if n < nt {
            let k_next = s.operator(u, n, true).transpose();
            let b = w.combine(dt * (1.0 - theta), &k_next);
            rhs.axpy(1.0, &b.mul(&lambda[n + 1]));
        }
        lambda[n] = w.combine(-dt * theta, &kn).solve(&rhs)?;
    }
    let mut q = FdField::zeros(s.n(), grid.nx, nt);
    for n in 0..=nt {
        s.store(&mut q, n, &lambda[n]);
    }
    // Multiplier of the step into level n is lambda[n] for n >= 1.
    let mut derivative = FdField::zeros(s.n(), grid.nx, nt);
    let mut gradient = FdField::zeros(s.n(), grid.nx, nt);
    for n in 0..=nt {
        let mut mu = Vector::zeros(s.n(), s.m);
        if n >= 1 {
            mu.axpy(theta, &lambda[n]);
        }
        if n < nt {
            mu.axpy(1.0 - theta, &lambda[n + 1]);
        }
        let y = s.load(rho, n);
        let c = time_weight(&s, n);
        for i in 0..s.n() {
            let alpha = problem.edges[i].alpha;
            let node = |j: usize| -> (f64, f64) {
                // (rho_j, mu_j) including the vertex and the outer end.
                if j == 0 {
                    (y.v, mu.v)
                } else if j <= s.m {
                    (y.e[i][j - 1], mu.e[i][j - 1])
                } else {
                    (0.0, 0.0)
                }
            };
            for j in 0..=grid.nx {
                let (r, _) = node(j);
                let left = if j == 0 { node(0).1 } else { node(j - 1).1 };
                let right = if j == grid.nx { node(j).1 } else { node(j + 1).1 };
                let drift = 0.5 * r * (left - right);
                let wij = space_weight(&s, i, j);
                let d = alpha * c * wij * u.get(i, j, n) + dt * drift;
                derivative.set(i, j, n, d);
                gradient.set(i, j, n, d / (c * wij));
            }
        }
    }
    Ok(FdAdjoint { q, gradient, derivative })
}

/// Directional derivative `sum dJ/du * v` from [`fd_adjoint`].
pub fn fd_directional_derivative(adj: &FdAdjoint, v: &FdField) -> f64 {
    adj.derivative
        .edges
        .iter()
        .zip(&v.edges)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
        .sum()
}

/// Total mass and boundary bookkeeping over time.
#[derive(Debug, Clone)]
pub struct MassReport {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    /// Accumulated outflow through the outer ends.
    pub outflow: Vec<f64>,
    /// Accumulated forcing input.
    pub source: Vec<f64>,
    /// `max |m(t) - m(0)|`.
    pub drift: f64,
    /// `max |m(t) - m(0) + outflow(t) - source(t)|`.
    pub identity_error: f64,
}

/// Integrates the state and records total mass, outflow and source input.
pub fn mass_balance(problem: &StarProblem, u: &FdField, grid: &FdGrid) -> Result<MassReport> {
    let s = Setup::new(problem, grid)?;
    let rho = fd_forward(problem, u, grid)?;
    let theta = grid.theta;
    let mass_at = |n: usize| s.weights.dot(&s.load(&rho, n));
    let outflow_at = |n: usize| -> f64 {
        if grid.outer == OuterCondition::Reflecting {
            return 0.0;
        }
        let mut out = 0.0;
        for i in 0..s.n() {
            let j = grid.nx - 1;
            let d = problem.edges[i].diffusion / s.h[i];
            let (rl, rr) = (rho.get(i, j, n), 0.0);
            let flux = d * (rr - rl) + 0.5 * (u.get(i, j + 1, n) * rr + u.get(i, j, n) * rl);
            out -= flux;
        }
        out
    };
    let src_at = |n: usize| -> Result<f64> {
        let v = s.source(n)?;
        Ok(v.v + v.e.iter().flatten().sum::<f64>())
    };
    let mut times = vec![0.0];
    let mut mass = vec![mass_at(0)];
    let mut outflow = vec![0.0];
    let mut source = vec![0.0];
    let (mut o_prev, mut s_prev) = (outflow_at(0), src_at(0)?);
    for n in 1..=grid.nt {
        let (o, sn) = (outflow_at(n), src_at(n)?);
        times.push(s.time(n));
        mass.push(mass_at(n));
        outflow.push(outflow[n - 1] + s.dt * (theta * o + (1.0 - theta) * o_prev));
        source.push(source[n - 1] + s.dt * (theta * sn + (1.0 - theta) * s_prev));
        o_prev = o;
        s_prev = sn;
    }
    let m0 = mass[0];
    let drift = mass.iter().fold(0.0, |a: f64, m| a.max((m - m0).abs()));
    let identity_error = (0..mass.len()).fold(0.0, |a: f64, n| a.max((mass[n] - m0 + outflow[n] - source[n]).abs()));
    Ok(MassReport {
        times,
        mass,
        outflow,
        source,
        drift,
        identity_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    pub nonnegative: bool,
    pub min: f64,
}

/// Solves and scans for negative values (tolerance `1e-10`).
pub fn positivity_check(problem: &StarProblem, u: &FdField, grid: &FdGrid) -> Result<PositivityReport> {
    let rho = fd_forward(problem, u, grid)?;
    let min = rho.edges.iter().flatten().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok(PositivityReport {
        nonnegative: min >= -1e-10,
        min,
    })
}

/// Both sides of the duality identity for direction `v`: the tracking
/// derivative along the tangent, and `-sum int rho v q_x` evaluated with the
/// scheme's own quadrature (theta-averaged multipliers, centred differences,
/// one-sided half cells at the ends).
pub fn fd_duality(problem: &StarProblem, u: &FdField, v: &FdField, grid: &FdGrid) -> Result<(f64, f64)> {
    let s = Setup::new(problem, grid)?;
    let rho = fd_forward(problem, u, grid)?;
    let z = fd_tangent(problem, u, v, &rho, grid)?;
    let (gap, terminal) = tracking_field(problem, grid, &rho)?;
    let adj = fd_adjoint(problem, u, &rho, grid)?;
    let mut lhs = 0.0;
    for i in 0..s.n() {
        for j in 0..=grid.nx {
            let w = space_weight(&s, i, j);
            for n in 0..=grid.nt {
                lhs += time_weight(&s, n) * w * gap.get(i, j, n) * z.get(i, j, n);
            }
            lhs += w * terminal[i][j] * z.get(i, j, grid.nt);
        }
    }
    let mut control_part = 0.0;
    for i in 0..s.n() {
        let alpha = problem.edges[i].alpha;
        for j in 0..=grid.nx {
            for n in 0..=grid.nt {
                control_part += alpha * time_weight(&s, n) * space_weight(&s, i, j) * u.get(i, j, n) * v.get(i, j, n);
            }
        }
    }
    let rhs = fd_directional_derivative(&adj, v) - control_part;
    Ok((lhs, rhs))
}
