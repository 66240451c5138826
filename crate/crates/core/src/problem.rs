//! Star-graph control problems: data, validation, file format, built-in
//! examples, manufactured solutions and the map to unit edges and horizon.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};

/// Tolerance for the initial-data compatibility checks.
pub const DATA_COMPAT_TOL: f64 = 1e-12;
/// Tolerance for the manufactured-target compatibility checks.
pub const MANUFACTURE_TOL: f64 = 1e-10;
/// Number of sample times used by [`manufacture_from`].
pub const MANUFACTURE_SAMPLES: usize = 50;

/// Parameters of one edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    /// Length `l_i`.
    pub l: f64,
    /// Diffusion coefficient `D_i`.
    #[serde(rename = "D")]
    pub diffusion: f64,
    /// Control cost weight `alpha_i`.
    pub alpha: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl EdgeSpec {
    pub fn unit(diffusion: f64) -> Self {
        Self {
            l: 1.0,
            diffusion,
            alpha: 1.0,
            u_min: -1.0,
            u_max: 1.0,
        }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.u_min).min(self.u_max)
    }
}

/// Data functions on one edge. `rho0` and `rho_t` are functions of `x` only.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeData {
    pub rho0: Expr,
    pub rho_d: Expr,
    pub rho_t: Expr,
    pub forcing: Expr,
}

/// Optional closed-form reference solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactFields {
    pub rho: Vec<Expr>,
    pub u: Vec<Expr>,
}

/// A complete control problem on a star graph with `N >= 2` edges.
#[derive(Debug, Clone, PartialEq)]
pub struct StarProblem {
    pub edges: Vec<EdgeSpec>,
    pub horizon: f64,
    pub data: Vec<EdgeData>,
    pub exact: Option<ExactFields>,
}

impl StarProblem {
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Checks every structural invariant and reports all failures at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let n = self.edges.len();
        if n < 2 {
            errs.push(format!("edges: star graph needs at least 2 edges, got {n}"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            errs.push(format!("T: horizon must be positive, got {}", self.horizon));
        }
        for (i, e) in self.edges.iter().enumerate() {
            if !(e.l > 0.0 && e.l.is_finite()) {
                errs.push(format!("edges[{i}].l: must be positive, got {}", e.l));
            }
            if !(e.diffusion > 0.0 && e.diffusion.is_finite()) {
                errs.push(format!("edges[{i}].D: must be positive, got {}", e.diffusion));
            }
            if !(e.alpha > 0.0 && e.alpha.is_finite()) {
                errs.push(format!("edges[{i}].alpha: must be positive, got {}", e.alpha));
            }
            if !(e.u_min <= e.u_max) {
                errs.push(format!(
                    "edges[{i}].u_min/u_max: u_min={} exceeds u_max={}",
                    e.u_min, e.u_max
                ));
            }
        }
        if self.data.len() != n {
            errs.push(format!("data: expected {n} entries per field, got {}", self.data.len()));
        }
        if let Some(ex) = &self.exact {
            if ex.rho.len() != n || ex.u.len() != n {
                errs.push(format!("exact: expected {n} entries per field"));
            }
        }
        if self.data.len() == n && n > 0 {
            for (i, d) in self.data.iter().enumerate() {
                if d.rho0.depends_on(Var::T) {
                    errs.push(format!("data.rho0[{i}]: must not depend on t"));
                }
                if d.rho_t.depends_on(Var::T) {
                    errs.push(format!("data.rho_T[{i}]: must not depend on t"));
                }
            }
            let v0: Vec<f64> = self.data.iter().map(|d| d.rho0.eval(0.0, 0.0)).collect();
            for (i, &v) in v0.iter().enumerate() {
                if !v.is_finite() || (v - v0[0]).abs() > DATA_COMPAT_TOL {
                    errs.push(format!(
                        "data.rho0[{i}]: vertex value {v} differs from edge 0 value {}",
                        v0[0]
                    ));
                }
            }
            for (i, (d, e)) in self.data.iter().zip(&self.edges).enumerate() {
                let end = d.rho0.eval(e.l, 0.0);
                if !end.is_finite() || end.abs() > DATA_COMPAT_TOL {
                    errs.push(format!("data.rho0[{i}]: outer value rho0(l)={end} must vanish"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidProblem(errs))
        }
    }

    /// Parses the JSON problem format and validates it.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text)?;
        let p = file.into_problem()?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ProblemFile::from_problem(self))?)
    }

    /// Maps the problem onto unit edges and unit horizon.
    pub fn normalize(&self) -> NormalizedProblem {
        normalize(self)
    }
}

/// Reads and validates a problem file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<StarProblem> {
    let text = std::fs::read_to_string(path)?;
    StarProblem::from_json(&text)
}

#[derive(Debug, Serialize, Deserialize)]
struct ProblemFile {
    edges: Vec<EdgeSpec>,
    #[serde(rename = "T")]
    horizon: f64,
    data: DataFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exact: Option<ExactFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DataFile {
    rho0: Vec<String>,
    rho_d: Vec<String>,
    #[serde(rename = "rho_T")]
    rho_t: Vec<String>,
    f: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ExactFile {
    rho: Vec<String>,
    u: Vec<String>,
}

fn parse_field(name: &str, items: &[String], errs: &mut Vec<String>) -> Vec<Expr> {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Expr::parse(s).unwrap_or_else(|e| {
                errs.push(format!("{name}[{i}]: {e}"));
                Expr::zero()
            })
        })
        .collect()
}

impl ProblemFile {
    fn into_problem(self) -> Result<StarProblem> {
        let mut errs = Vec::new();
        let n = self.edges.len();
        let d = &self.data;
        for (name, len) in [
            ("data.rho0", d.rho0.len()),
            ("data.rho_d", d.rho_d.len()),
            ("data.rho_T", d.rho_t.len()),
            ("data.f", d.f.len()),
        ] {
            if len != n {
                errs.push(format!("{name}: expected {n} expressions, got {len}"));
            }
        }
        let rho0 = parse_field("data.rho0", &d.rho0, &mut errs);
        let rho_d = parse_field("data.rho_d", &d.rho_d, &mut errs);
        let rho_t = parse_field("data.rho_T", &d.rho_t, &mut errs);
        let f = parse_field("data.f", &d.f, &mut errs);
        let exact = self.exact.as_ref().map(|ex| {
            if ex.rho.len() != n || ex.u.len() != n {
                errs.push(format!("exact: expected {n} expressions per field"));
            }
            ExactFields {
                rho: parse_field("exact.rho", &ex.rho, &mut errs),
                u: parse_field("exact.u", &ex.u, &mut errs),
            }
        });
        if !errs.is_empty() {
            return Err(Error::InvalidProblem(errs));
        }
        let data = rho0
            .into_iter()
            .zip(rho_d)
            .zip(rho_t)
            .zip(f)
            .map(|(((rho0, rho_d), rho_t), forcing)| EdgeData {
                rho0,
                rho_d,
                rho_t,
                forcing,
            })
            .collect();
        Ok(StarProblem {
            edges: self.edges,
            horizon: self.horizon,
            data,
            exact,
        })
    }

    fn from_problem(p: &StarProblem) -> Self {
        let strs = |f: &dyn Fn(&EdgeData) -> &Expr| p.data.iter().map(|d| f(d).to_string()).collect();
        ProblemFile {
            edges: p.edges.clone(),
            horizon: p.horizon,
            data: DataFile {
                rho0: strs(&|d| &d.rho0),
                rho_d: strs(&|d| &d.rho_d),
                rho_t: strs(&|d| &d.rho_t),
                f: strs(&|d| &d.forcing),
            },
            exact: p.exact.as_ref().map(|ex| ExactFile {
                rho: ex.rho.iter().map(|e| e.to_string()).collect(),
                u: ex.u.iter().map(|e| e.to_string()).collect(),
            }),
        }
    }
}

/// Builds a problem whose exact optimal pair is `(rho_target, u_target)`.
///
/// The forcing is chosen so that the targets solve the state equation, the
/// initial, terminal and desired states are read off the target, and the
/// targets are recorded as the exact reference. When `u_target` lies inside
/// the bounds the adjoint vanishes and the cost is zero.
pub fn manufacture_from(
    rho_target: &[Expr],
    u_target: &[Expr],
    edges: &[EdgeSpec],
    horizon: f64,
) -> Result<StarProblem> {
    let n = edges.len();
    if rho_target.len() != n || u_target.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} edges but {} state and {} control targets",
            rho_target.len(),
            u_target.len()
        )));
    }
    let times: Vec<f64> = (0..MANUFACTURE_SAMPLES)
        .map(|s| horizon * s as f64 / (MANUFACTURE_SAMPLES - 1) as f64)
        .collect();
    let rho_x: Vec<Expr> = rho_target.iter().map(|r| r.differentiate(Var::X)).collect();

    let worst = |f: &dyn Fn(f64) -> f64| {
        times
            .iter()
            .map(|&t| (f(t).abs(), t))
            .fold((0.0, 0.0), |a, b| if b.0 > a.0 || b.0.is_nan() { b } else { a })
    };
    let checks: [(&str, (f64, f64)); 3] = [
        (
            "vertex continuity rho_i(0,t) = rho_j(0,t)",
            worst(&|t| {
                let r0 = rho_target[0].eval(0.0, t);
                rho_target
                    .iter()
                    .map(|r| (r.eval(0.0, t) - r0).abs())
                    .fold(0.0, f64::max)
            }),
        ),
        (
            "outer Dirichlet rho_i(l_i,t) = 0",
            worst(&|t| {
                rho_target
                    .iter()
                    .zip(edges)
                    .map(|(r, e)| r.eval(e.l, t).abs())
                    .fold(0.0, f64::max)
            }),
        ),
        (
            "Kirchhoff sum_i [D_i d_x rho_i + u_i rho_i](0,t) = 0",
            worst(&|t| {
                (0..n)
                    .map(|i| {
                        edges[i].diffusion * rho_x[i].eval(0.0, t)
                            + u_target[i].eval(0.0, t) * rho_target[i].eval(0.0, t)
                    })
                    .sum()
            }),
        ),
    ];
    for (name, (violation, t)) in checks {
        if !(violation <= MANUFACTURE_TOL) {
            return Err(Error::Compatibility {
                condition: name.to_string(),
                violation,
                t,
            });
        }
    }

    let data = (0..n)
        .map(|i| {
            let r = &rho_target[i];
            let u = &u_target[i];
            let rt = r.differentiate(Var::T);
            let rxx = rho_x[i].differentiate(Var::X);
            let drift = (u.clone() * r.clone()).differentiate(Var::X);
            let forcing = rt - Expr::constant(edges[i].diffusion) * rxx - drift;
            EdgeData {
                rho0: r.fix_t(0.0),
                rho_d: r.clone(),
                rho_t: r.fix_t(horizon),
                forcing,
            }
        })
        .collect();
    let p = StarProblem {
        edges: edges.to_vec(),
        horizon,
        data,
        exact: Some(ExactFields {
            rho: rho_target.to_vec(),
            u: u_target.to_vec(),
        }),
    };
    p.validate()?;
    Ok(p)
}

/// Built-in three-edge examples with polynomial (1) and trigonometric (2)
/// optimal states, zero optimal control and bounds `[-1, 1]`.
pub fn builtin_example(id: u32) -> Result<StarProblem> {
    let (targets, diffusion) = match id {
        1 => (["x^2*(1-x)*t", "x^2*(1-x)*t", "x^2*(1-x)^2*t"], 1.0),
        2 => (
            [
                "exp(-t)*sin(pi*x)^2",
                "exp(-t)*sin(pi*x)^2",
                "2*exp(-t)*sin(pi*x)^2",
            ],
            1.0 / (4.0 * std::f64::consts::PI * std::f64::consts::PI),
        ),
        other => return Err(Error::UnknownExample(other)),
    };
    let rho: Vec<Expr> = targets
        .iter()
        .map(|s| Expr::parse(s).expect("built-in expression"))
        .collect();
    let u = vec![Expr::zero(); 3];
    let edges = vec![EdgeSpec::unit(diffusion); 3];
    manufacture_from(&rho, &u, &edges, 1.0)
}

/// Coefficients of one edge after mapping to `xi = x / l`, `s = t / T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCoefficients {
    /// Diffusion in normalized variables, `T D / l^2`.
    pub a: f64,
    /// Drift scale, `T / l`.
    pub b: f64,
    /// Kirchhoff flux weight, `D / l`.
    pub kappa: f64,
    pub spec: EdgeSpec,
}

/// Edge data expressed in normalized variables, with the derivatives the
/// scheme needs precomputed symbolically.
#[derive(Debug, Clone)]
pub struct NormalizedData {
    pub rho0: Expr,
    pub rho0_x: Expr,
    pub rho0_xx: Expr,
    pub rho_d: Expr,
    pub rho_t: Expr,
    pub rho_t_x: Expr,
    pub rho_t_xx: Expr,
    /// `T * f(l xi, T s)`.
    pub forcing: Expr,
}

/// A problem on unit edges and unit horizon.
#[derive(Debug, Clone)]
pub struct NormalizedProblem {
    pub coeffs: Vec<EdgeCoefficients>,
    pub data: Vec<NormalizedData>,
    pub original: StarProblem,
}

impl NormalizedProblem {
    pub fn num_edges(&self) -> usize {
        self.coeffs.len()
    }

    pub fn horizon(&self) -> f64 {
        self.original.horizon
    }

    /// Physical `(x, t)` of a normalized point on edge `i`.
    pub fn to_physical(&self, edge: usize, xi: f64, s: f64) -> (f64, f64) {
        (xi * self.coeffs[edge].spec.l, s * self.original.horizon)
    }

    /// Normalized `(xi, s)` of a physical point on edge `i`.
    pub fn to_normalized(&self, edge: usize, x: f64, t: f64) -> (f64, f64) {
        (x / self.coeffs[edge].spec.l, t / self.original.horizon)
    }

    /// Exact state in normalized variables, if the problem carries one.
    pub fn exact_rho(&self, edge: usize) -> Option<Expr> {
        let l = self.coeffs[edge].spec.l;
        let t = self.original.horizon;
        self.original.exact.as_ref().map(|ex| ex.rho[edge].scale_vars(l, t))
    }

    /// Exact control in normalized variables, if the problem carries one.
    pub fn exact_u(&self, edge: usize) -> Option<Expr> {
        let l = self.coeffs[edge].spec.l;
        let t = self.original.horizon;
        self.original.exact.as_ref().map(|ex| ex.u[edge].scale_vars(l, t))
    }
}

/// See [`StarProblem::normalize`].
pub fn normalize(p: &StarProblem) -> NormalizedProblem {
    let horizon = p.horizon;
    let coeffs = p
        .edges
        .iter()
        .map(|e| EdgeCoefficients {
            a: horizon * e.diffusion / (e.l * e.l),
            b: horizon / e.l,
            kappa: e.diffusion / e.l,
            spec: *e,
        })
        .collect();
    let data = p
        .data
        .iter()
        .zip(&p.edges)
        .map(|(d, e)| {
            let rho0 = d.rho0.scale_vars(e.l, horizon);
            let rho_t = d.rho_t.scale_vars(e.l, horizon);
            let rho0_x = rho0.differentiate(Var::X);
            let rho_t_x = rho_t.differentiate(Var::X);
            NormalizedData {
                rho0_xx: rho0_x.differentiate(Var::X),
                rho_t_xx: rho_t_x.differentiate(Var::X),
                rho0,
                rho0_x,
                rho_t,
                rho_t_x,
                rho_d: d.rho_d.scale_vars(e.l, horizon),
                forcing: Expr::constant(horizon) * d.forcing.scale_vars(e.l, horizon),
            }
        })
        .collect();
    NormalizedProblem {
        coeffs,
        data,
        original: p.clone(),
    }
}
