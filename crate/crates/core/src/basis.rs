//! Shifted Legendre scaling functions on `[0, 1)` and their exact integrals.
//!
//! A basis of level `J` with `M` polynomials per cell splits `[0, 1)` into
//! `2^(J-1)` dyadic cells and places the first `M` shifted Legendre
//! polynomials, normalised to unit `L2` norm, on each cell. Basis entries are
//! ordered cell-major: entry `k = n * M + m` (zero-based) belongs to cell `n`
//! and degree `m`.
//!
//! Point evaluation of the basis and of its derivative is only defined away
//! from interior cell breakpoints. The integral operators are continuous on
//! the closed interval and may be evaluated anywhere in `[0, 1]`.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest polynomial count accepted by [`legendre_coeffs`].
pub const MAX_POLYNOMIALS: usize = 30;

/// Dilation level and polynomial count for one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisSpec {
    j: u32,
    m: usize,
}

impl BasisSpec {
    pub fn new(j: u32, m: usize) -> Result<Self> {
        if j == 0 || j > 12 {
            return Err(Error::InvalidSpec(format!("dilation level J={j} must be in 1..=12")));
        }
        if m == 0 || m > MAX_POLYNOMIALS {
            return Err(Error::InvalidSpec(format!(
                "polynomial count M={m} must be in 1..={MAX_POLYNOMIALS}"
            )));
        }
        Ok(Self { j, m })
    }

    /// Dilation level `J`.
    pub fn level(&self) -> u32 {
        self.j
    }

    /// Polynomials per cell `M`.
    pub fn polys(&self) -> usize {
        self.m
    }

    /// Number of cells, `2^(J-1)`.
    pub fn cells(&self) -> usize {
        1usize << (self.j - 1)
    }

    /// Basis size `K = 2^(J-1) * M`.
    pub fn size(&self) -> usize {
        self.cells() * self.m
    }

    /// Zero-based basis index of cell `n` and degree `m`.
    pub fn index(&self, cell: usize, degree: usize) -> usize {
        cell * self.m + degree
    }

    /// Inverse of [`BasisSpec::index`].
    pub fn cell_degree(&self, k: usize) -> (usize, usize) {
        (k / self.m, k % self.m)
    }

    /// Half-open span `[start, end)` of a cell.
    pub fn cell_span(&self, cell: usize) -> (f64, f64) {
        let w = 1.0 / self.cells() as f64;
        (cell as f64 * w, (cell + 1) as f64 * w)
    }

    /// True when `t` is an interior cell breakpoint.
    pub fn is_breakpoint(&self, t: f64) -> bool {
        let scaled = t * self.cells() as f64;
        t > 0.0 && t < 1.0 && scaled.fract() == 0.0
    }
}

/// Coefficients `c[i][m]` of `t^i` in the shifted Legendre polynomial `L_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreCoeffTable {
    c: Vec<Vec<f64>>,
}

impl LegendreCoeffTable {
    /// Number of polynomials in the table.
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// Coefficient of `t^i` in `L_m`; zero for `i > m`.
    pub fn coeff(&self, i: usize, m: usize) -> f64 {
        if i > m {
            0.0
        } else {
            self.c[m][i]
        }
    }

    /// Monomial coefficients of `L_m`, lowest degree first.
    pub fn poly(&self, m: usize) -> &[f64] {
        &self.c[m]
    }

    /// `L_m(s)`.
    pub fn eval(&self, m: usize, s: f64) -> f64 {
        self.c[m].iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    /// `L_m'(s)`.
    pub fn eval_derivative(&self, m: usize, s: f64) -> f64 {
        let p = &self.c[m];
        (1..p.len()).rev().fold(0.0, |acc, i| acc * s + i as f64 * p[i])
    }

    /// `sum_i c[i][m] / (i + 1) * s^(i + 1)`, the antiderivative of `L_m` vanishing at 0.
    fn antiderivative(&self, m: usize, s: f64) -> f64 {
        let p = &self.c[m];
        let inner = (0..p.len()).rev().fold(0.0, |acc, i| acc * s + p[i] / (i + 1) as f64);
        inner * s
    }

    /// Second antiderivative of `L_m` vanishing with its derivative at 0.
    fn second_antiderivative(&self, m: usize, s: f64) -> f64 {
        let p = &self.c[m];
        let inner = (0..p.len())
            .rev()
            .fold(0.0, |acc, i| acc * s + p[i] / ((i + 1) * (i + 2)) as f64);
        inner * s * s
    }
}

/// Shifted Legendre coefficients for degrees `0..M`.
///
/// Each coefficient is the exact rational `prod_{j<m}(1+i+j) / prod_{j!=i}(i-j)`
/// evaluated in big-integer arithmetic; the quotient is always an integer.
pub fn legendre_coeffs(m_count: usize) -> Result<LegendreCoeffTable> {
    if m_count == 0 {
        return Err(Error::InvalidSpec("M must be at least 1".into()));
    }
    if m_count > MAX_POLYNOMIALS {
        return Err(Error::DegreeTooLarge(m_count));
    }
    let mut c = Vec::with_capacity(m_count);
    for m in 0..m_count {
        let mut row = Vec::with_capacity(m + 1);
        for i in 0..=m {
            if m == 0 {
                row.push(1.0);
                continue;
            }
            let mut num = BigInt::one();
            for j in 0..m {
                num *= BigInt::from((1 + i + j) as i64);
            }
            let mut den = BigInt::one();
            for j in 0..=m {
                if j != i {
                    den *= BigInt::from(i as i64 - j as i64);
                }
            }
            debug_assert!(!den.is_zero());
            let q = &num / &den;
            debug_assert!((&q * &den) == num);
            row.push(q.to_f64().ok_or(Error::DegreeTooLarge(m_count))?);
        }
        c.push(row);
    }
    Ok(LegendreCoeffTable { c })
}

/// Values of all `K` basis functions (or of one of their integrals) at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisVector {
    pub values: Vec<f64>,
}

impl BasisVector {
    fn zeros(k: usize) -> Self {
        Self { values: vec![0.0; k] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.values.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

impl std::ops::Index<usize> for BasisVector {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

/// Which one-sided limit to take at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Basis together with its coefficient table.
#[derive(Debug, Clone)]
pub struct Basis {
    spec: BasisSpec,
    coeffs: LegendreCoeffTable,
}

impl Basis {
    pub fn new(spec: BasisSpec) -> Result<Self> {
        Ok(Self {
            spec,
            coeffs: legendre_coeffs(spec.polys())?,
        })
    }

    pub fn spec(&self) -> BasisSpec {
        self.spec
    }

    pub fn coeffs(&self) -> &LegendreCoeffTable {
        &self.coeffs
    }

    pub fn size(&self) -> usize {
        self.spec.size()
    }

    fn scale(&self) -> f64 {
        (self.spec.cells() as f64).sqrt()
    }

    fn check_open(&self, t: f64, what: &'static str) -> Result<()> {
        if !(0.0..1.0).contains(&t) || self.spec.is_breakpoint(t) {
            return Err(Error::Domain { what, value: t });
        }
        Ok(())
    }

    fn check_closed(&self, t: f64, what: &'static str) -> Result<()> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain { what, value: t });
        }
        Ok(())
    }

    fn fill_cell(&self, cell: usize, s: f64, deriv: bool) -> BasisVector {
        let mut out = BasisVector::zeros(self.size());
        let cells = self.spec.cells() as f64;
        for m in 0..self.spec.polys() {
            let norm = self.scale() * ((2 * m + 1) as f64).sqrt();
            let v = if deriv {
                norm * cells * self.coeffs.eval_derivative(m, s)
            } else {
                norm * self.coeffs.eval(m, s)
            };
            out.values[self.spec.index(cell, m)] = v;
        }
        out
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let scaled = t * self.spec.cells() as f64;
        let cell = (scaled.floor() as usize).min(self.spec.cells() - 1);
        (cell, scaled - cell as f64)
    }

    /// Basis values `Phi_K(t)` for `t` in `[0, 1)` away from interior breakpoints.
    pub fn eval(&self, t: f64) -> Result<BasisVector> {
        self.check_open(t, "basis evaluation point")?;
        let (cell, s) = self.locate(t);
        Ok(self.fill_cell(cell, s, false))
    }

    /// Derivative of [`Basis::eval`] with respect to `t`.
    pub fn eval_derivative(&self, t: f64) -> Result<BasisVector> {
        self.check_open(t, "basis derivative point")?;
        let (cell, s) = self.locate(t);
        Ok(self.fill_cell(cell, s, true))
    }

    /// One-sided limit of the basis (or its derivative) at any `t` in `[0, 1]`.
    ///
    /// Away from breakpoints this equals [`Basis::eval`]. The left limit at 0
    /// and the right limit at 1 do not exist.
    pub fn eval_limit(&self, t: f64, side: Side, deriv: bool) -> Result<BasisVector> {
        self.check_closed(t, "basis limit point")?;
        let scaled = t * self.spec.cells() as f64;
        let on_break = scaled.fract() == 0.0;
        let (cell, s) = match (on_break, side) {
            (true, Side::Left) => {
                if t == 0.0 {
                    return Err(Error::Domain { what: "left limit point", value: t });
                }
                (scaled as usize - 1, 1.0)
            }
            (true, Side::Right) => {
                if t == 1.0 {
                    return Err(Error::Domain { what: "right limit point", value: t });
                }
                (scaled as usize, 0.0)
            }
            (false, _) => self.locate(t),
        };
        Ok(self.fill_cell(cell, s, deriv))
    }

    /// Exact `int_0^t Phi_K(s) ds`.
    pub fn left_integral(&self, t: f64) -> Result<BasisVector> {
        self.check_closed(t, "left integral point")?;
        let mut out = BasisVector::zeros(self.size());
        let cells = self.spec.cells() as f64;
        for cell in 0..self.spec.cells() {
            let (start, end) = self.spec.cell_span(cell);
            for m in 0..self.spec.polys() {
                let k = self.spec.index(cell, m);
                out.values[k] = if t >= end {
                    if m == 0 {
                        (1.0 / cells).sqrt()
                    } else {
                        0.0
                    }
                } else if t > start {
                    let s = t * cells - cell as f64;
                    ((2 * m + 1) as f64 / cells).sqrt() * self.coeffs.antiderivative(m, s)
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }

    /// Exact `int_t^1 Phi_K(s) ds`.
    pub fn right_integral(&self, t: f64) -> Result<BasisVector> {
        self.check_closed(t, "right integral point")?;
        let mut out = BasisVector::zeros(self.size());
        let cells = self.spec.cells() as f64;
        for cell in 0..self.spec.cells() {
            let (start, end) = self.spec.cell_span(cell);
            for m in 0..self.spec.polys() {
                let k = self.spec.index(cell, m);
                out.values[k] = if t <= start {
                    if m == 0 {
                        (1.0 / cells).sqrt()
                    } else {
                        0.0
                    }
                } else if t < end {
                    let s = t * cells - cell as f64;
                    let full = self.coeffs.antiderivative(m, 1.0);
                    ((2 * m + 1) as f64 / cells).sqrt() * (full - self.coeffs.antiderivative(m, s))
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }

    /// Exact `int_0^t int_0^s Phi_K(r) dr ds`.
    pub fn left_double_integral(&self, t: f64) -> Result<BasisVector> {
        self.check_closed(t, "left double integral point")?;
        let mut out = BasisVector::zeros(self.size());
        let cells = self.spec.cells() as f64;
        for cell in 0..self.spec.cells() {
            let (start, end) = self.spec.cell_span(cell);
            for m in 0..self.spec.polys() {
                let k = self.spec.index(cell, m);
                let weight = ((2 * m + 1) as f64 / cells).sqrt();
                out.values[k] = if t >= end {
                    if m == 0 {
                        weight * (t - start - 0.5 / cells)
                    } else {
                        let tail: f64 = (0..=m)
                            .map(|i| self.coeffs.coeff(i, m) / (i + 2) as f64)
                            .sum();
                        -weight * tail / cells
                    }
                } else if t > start {
                    let s = t * cells - cell as f64;
                    weight / cells * self.coeffs.second_antiderivative(m, s)
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }

    /// Collocation points `(2k - 1) / (2^J M)`, `k = 1..=K`.
    pub fn collocation_points(&self) -> CollocationGrid {
        collocation_points(self.spec)
    }
}

/// Interior collocation nodes, strictly increasing, never on a breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationGrid {
    pub points: Vec<f64>,
}

/// Uniform collocation nodes for a basis specification.
pub fn collocation_points(spec: BasisSpec) -> CollocationGrid {
    let denom = (2 * spec.size()) as f64;
    CollocationGrid {
        points: (1..=spec.size()).map(|k| (2 * k - 1) as f64 / denom).collect(),
    }
}

/// `Fx^T * F * Ft` for a row-major `K1 x K2` coefficient matrix.
pub fn expand_2d(fx: &BasisVector, fmat: &[f64], ft: &BasisVector) -> Result<f64> {
    let (k1, k2) = (fx.len(), ft.len());
    if fmat.len() != k1 * k2 {
        return Err(Error::DimensionMismatch(format!(
            "coefficient matrix has {} entries, expected {k1}x{k2}",
            fmat.len()
        )));
    }
    let mut total = 0.0;
    for p in 0..k1 {
        let row = &fmat[p * k2..(p + 1) * k2];
        let inner: f64 = row.iter().zip(&ft.values).map(|(a, b)| a * b).sum();
        total += fx.values[p] * inner;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(j: u32, m: usize) -> Basis {
        Basis::new(BasisSpec::new(j, m).unwrap()).unwrap()
    }

    #[test]
    fn coefficient_table_small_degrees() {
        let c = legendre_coeffs(3).unwrap();
        assert_eq!(c.coeff(0, 0), 1.0);
        assert_eq!((c.coeff(0, 1), c.coeff(1, 1)), (-1.0, 2.0));
        assert_eq!((c.coeff(0, 2), c.coeff(1, 2), c.coeff(2, 2)), (1.0, -6.0, 6.0));
    }

    #[test]
    fn coefficients_match_binomial_closed_form() {
        // c[i][m] = (-1)^(m+i) C(m,i) C(m+i,i)
        fn binom(n: u64, k: u64) -> f64 {
            (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        }
        let c = legendre_coeffs(12).unwrap();
        for m in 0..12u64 {
            for i in 0..=m {
                let sign = if (m + i) % 2 == 0 { 1.0 } else { -1.0 };
                let expect = sign * binom(m, i) * binom(m + i, i);
                assert!((c.coeff(i as usize, m as usize) - expect).abs() <= 1e-9 * expect.abs());
            }
        }
    }

    #[test]
    fn endpoint_values() {
        let c = legendre_coeffs(10).unwrap();
        for m in 0..10 {
            assert_eq!(c.eval(m, 1.0), 1.0);
            assert_eq!(c.eval(m, 0.0), if m % 2 == 0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn large_degree_is_rejected() {
        assert!(matches!(legendre_coeffs(31), Err(Error::DegreeTooLarge(31))));
        assert!(legendre_coeffs(30).is_ok());
    }

    #[test]
    fn eval_examples() {
        assert_eq!(basis(1, 1).eval(0.3).unwrap().values, vec![1.0]);
        let v = basis(1, 2).eval(0.25).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert!((v[1] + 0.866_025_403_784_438_6).abs() < 1e-15);
        let v = basis(2, 1).eval(0.25).unwrap();
        assert!((v[0] - 2f64.sqrt()).abs() < 1e-15 && v[1] == 0.0);
    }

    #[test]
    fn eval_rejects_out_of_domain_and_breakpoints() {
        let b = basis(2, 2);
        assert!(b.eval(1.0).is_err());
        assert!(b.eval(-0.1).is_err());
        assert!(b.eval(0.5).is_err());
        assert!(b.eval_derivative(0.5).is_err());
        assert!(b.eval(0.0).is_ok());
        assert!(basis(1, 2).eval(0.5).is_ok());
    }

    #[test]
    fn derivative_examples() {
        let d = basis(1, 2).eval_derivative(0.1).unwrap();
        assert_eq!(d[0], 0.0);
        assert!((d[1] - 2.0 * 3f64.sqrt()).abs() < 1e-14);
        assert_eq!(basis(1, 1).eval_derivative(0.5).unwrap().values, vec![0.0]);
        let d = basis(2, 2).eval_derivative(0.75).unwrap();
        assert_eq!(&d.values[..3], &[0.0, 0.0, 0.0]);
        assert!((d[3] - 4.0 * 6f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn integral_examples() {
        assert!((basis(1, 1).left_integral(0.5).unwrap()[0] - 0.5).abs() < 1e-15);
        let v = basis(1, 2).left_integral(1.0).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15 && v[1].abs() < 1e-15);
        let v = basis(2, 1).left_integral(0.75).unwrap();
        assert!((v[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((v[1] - 2f64.sqrt() * 0.25).abs() < 1e-15);

        assert!((basis(1, 1).right_integral(0.3).unwrap()[0] - 0.7).abs() < 1e-15);
        let v = basis(2, 1).right_integral(0.25).unwrap();
        assert!((v[0] - 2f64.sqrt() * 0.25).abs() < 1e-15);
        assert!((v[1] - 0.5f64.sqrt()).abs() < 1e-15);

        assert!((basis(1, 1).left_double_integral(0.5).unwrap()[0] - 0.125).abs() < 1e-15);
        assert!((basis(1, 1).left_double_integral(1.0).unwrap()[0] - 0.5).abs() < 1e-15);
        let v = basis(1, 2).left_double_integral(1.0).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15);
        assert!((v[1] + 3f64.sqrt() / 6.0).abs() < 1e-15);
    }

    #[test]
    fn collocation_examples() {
        let spec = |j, m| BasisSpec::new(j, m).unwrap();
        assert_eq!(collocation_points(spec(1, 2)).points, vec![0.25, 0.75]);
        assert_eq!(collocation_points(spec(2, 4)).points[0], 0.0625);
        assert_eq!(collocation_points(spec(1, 1)).points, vec![0.5]);
        let s = spec(3, 3);
        for &p in &collocation_points(s).points {
            assert!(!s.is_breakpoint(p) && p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn expand_2d_examples() {
        let b = basis(1, 1);
        let fx = b.eval(0.4).unwrap();
        let ft = b.eval(0.9).unwrap();
        assert_eq!(expand_2d(&fx, &[0.0], &ft).unwrap(), 0.0);
        assert_eq!(expand_2d(&fx, &[1.0], &ft).unwrap(), 1.0);
        assert!(expand_2d(&fx, &[1.0, 2.0], &ft).is_err());
    }

    #[test]
    fn limits_agree_with_eval_off_breakpoints() {
        let b = basis(3, 3);
        for &t in &[0.0, 0.1, 0.3, 0.9] {
            assert_eq!(b.eval_limit(t, Side::Right, false).unwrap(), b.eval(t).unwrap());
            assert_eq!(b.eval_limit(t.max(0.01), Side::Left, true).unwrap(), b.eval_derivative(t.max(0.01)).unwrap());
        }
        let left = b.eval_limit(1.0, Side::Left, false).unwrap();
        let last = b.spec().index(3, 0);
        assert!((left[last] - 2.0).abs() < 1e-15);
        assert!(b.eval_limit(1.0, Side::Right, false).is_err());
    }
}
