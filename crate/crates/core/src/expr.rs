//! Closed-form functions of `(x, t)` used to describe problem data.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' exponent)*
//! exponent:= integer | '(' integer ')'
//! primary := number | 'x' | 't' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func    := 'sin' | 'cos' | 'exp' | 'sqrt'
//! ```
//!
//! Exponents are non-negative integer literals. `^` binds tighter than unary
//! minus, so `-x^2` is `-(x^2)`.

use std::fmt;

use crate::error::{Error, Result};

/// Independent variable of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Pi,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn zero() -> Self {
        Expr::Const(0.0)
    }

    pub fn x() -> Self {
        Expr::Var(Var::X)
    }

    pub fn t() -> Self {
        Expr::Var(Var::T)
    }

    /// Parses an expression in the documented grammar.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { src: text.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("end of input"));
        }
        Ok(e)
    }

    /// IEEE evaluation; division by an exact zero yields NaN.
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::T) => t,
            Expr::Pi => std::f64::consts::PI,
            Expr::Neg(a) => -a.eval(x, t),
            Expr::Add(a, b) => a.eval(x, t) + b.eval(x, t),
            Expr::Sub(a, b) => a.eval(x, t) - b.eval(x, t),
            Expr::Mul(a, b) => a.eval(x, t) * b.eval(x, t),
            Expr::Div(a, b) => {
                let d = b.eval(x, t);
                if d == 0.0 {
                    f64::NAN
                } else {
                    a.eval(x, t) / d
                }
            }
            Expr::Pow(a, n) => a.eval(x, t).powi(*n as i32),
            Expr::Call(f, a) => f.apply(a.eval(x, t)),
        }
    }

    /// Like [`Expr::eval`] but flags non-finite results.
    pub fn try_eval(&self, x: f64, t: f64) -> Result<f64> {
        let v = self.eval(x, t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { x, t })
        }
    }

    /// Exact symbolic derivative with light constant folding.
    pub fn differentiate(&self, var: Var) -> Expr {
        use Expr::*;
        match self {
            Const(_) | Pi => Const(0.0),
            Var(v) => Const(if *v == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.differentiate(var)),
            Add(a, b) => add(a.differentiate(var), b.differentiate(var)),
            Sub(a, b) => sub(a.differentiate(var), b.differentiate(var)),
            Mul(a, b) => add(
                mul(a.differentiate(var), (**b).clone()),
                mul((**a).clone(), b.differentiate(var)),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.differentiate(var), (**b).clone()),
                    mul((**a).clone(), b.differentiate(var)),
                ),
                pow((**b).clone(), 2),
            ),
            Pow(a, n) => match n {
                0 => Const(0.0),
                _ => mul(
                    mul(Const(*n as f64), pow((**a).clone(), n - 1)),
                    a.differentiate(var),
                ),
            },
            Call(f, a) => {
                let inner = a.differentiate(var);
                let outer = match f {
                    Func::Sin => call(Func::Cos, (**a).clone()),
                    Func::Cos => neg(call(Func::Sin, (**a).clone())),
                    Func::Exp => call(Func::Exp, (**a).clone()),
                    Func::Sqrt => div(Const(0.5), call(Func::Sqrt, (**a).clone())),
                };
                mul(outer, inner)
            }
        }
    }

    /// Replaces `x` by `sx * x` and `t` by `st * t`.
    pub fn scale_vars(&self, sx: f64, st: f64) -> Expr {
        self.map_vars(&|v| match v {
            Var::X => mul(Expr::Const(sx), Expr::x()),
            Var::T => mul(Expr::Const(st), Expr::t()),
        })
    }

    /// Replaces `t` by a constant.
    pub fn fix_t(&self, value: f64) -> Expr {
        self.map_vars(&|v| match v {
            Var::X => Expr::x(),
            Var::T => Expr::Const(value),
        })
    }

    fn map_vars(&self, f: &dyn Fn(Var) -> Expr) -> Expr {
        use Expr::*;
        match self {
            Const(c) => Const(*c),
            Pi => Pi,
            Var(v) => f(*v),
            Neg(a) => neg(a.map_vars(f)),
            Add(a, b) => add(a.map_vars(f), b.map_vars(f)),
            Sub(a, b) => sub(a.map_vars(f), b.map_vars(f)),
            Mul(a, b) => mul(a.map_vars(f), b.map_vars(f)),
            Div(a, b) => div(a.map_vars(f), b.map_vars(f)),
            Pow(a, n) => pow(a.map_vars(f), *n),
            Call(g, a) => call(*g, a.map_vars(f)),
        }
    }

    /// True when the expression mentions `var`.
    pub fn depends_on(&self, var: Var) -> bool {
        use Expr::*;
        match self {
            Const(_) | Pi => false,
            Var(v) => *v == var,
            Neg(a) | Pow(a, _) | Call(_, a) => a.depends_on(var),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        use Expr::*;
        match self {
            Const(_) | Pi | Var(_) => 1,
            Neg(a) | Pow(a, _) | Call(_, a) => 1 + a.size(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => 1 + a.size() + b.size(),
        }
    }
}

fn is_const(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Const(c) if *c == v)
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        _ if is_const(&a, 0.0) => b,
        _ if is_const(&b, 0.0) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        _ if is_const(&b, 0.0) => a,
        _ if is_const(&a, 0.0) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        _ if is_const(&a, 0.0) || is_const(&b, 0.0) => Expr::Const(0.0),
        _ if is_const(&a, 1.0) => b,
        _ if is_const(&b, 1.0) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is_const(&a, 0.0) && !is_const(&b, 0.0) => Expr::Const(0.0),
        _ if is_const(&b, 1.0) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn pow(a: Expr, n: u32) -> Expr {
    match (&a, n) {
        (_, 0) => Expr::Const(1.0),
        (_, 1) => a,
        (Expr::Const(c), _) => Expr::Const(c.powi(n as i32)),
        _ => Expr::Pow(Box::new(a), n),
    }
}

pub(crate) fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        add(self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        mul(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        neg(self)
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesised output that parses back to an equivalent tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    write!(f, "(-{:?})", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Var(Var::X) => write!(f, "x"),
            Expr::Var(Var::T) => write!(f, "t"),
            Expr::Pi => write!(f, "pi"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, n) => write!(f, "({a}^{n})"),
            Expr::Call(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, expected: &str) -> Error {
        let found = match self.src.get(self.pos) {
            Some(&c) => format!("'{}'", c as char),
            None => "end of input".to_string(),
        };
        Error::Parse {
            offset: self.pos,
            message: format!("expected {expected}, found {found}"),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("'{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.primary()?;
        while self.eat(b'^') {
            let n = if self.eat(b'(') {
                let n = self.integer()?;
                self.expect(b')')?;
                n
            } else {
                self.integer()?
            };
            base = Expr::Pow(Box::new(base), n);
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("non-negative integer exponent"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        text.parse().map_err(|_| Error::Parse {
            offset: start,
            message: format!("exponent {text} is too large"),
        })
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let bytes = self.src;
        let mut end = start;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut e = end + 1;
            if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                e += 1;
            }
            if e < bytes.len() && bytes[e].is_ascii_digit() {
                while e < bytes.len() && bytes[e].is_ascii_digit() {
                    e += 1;
                }
                end = e;
            }
        }
        let text = std::str::from_utf8(&bytes[start..end]).expect("ascii number");
        let v: f64 = text.parse().map_err(|_| Error::Parse {
            offset: start,
            message: format!("malformed number '{text}'"),
        })?;
        self.pos = end;
        Ok(Expr::Const(v))
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii ident");
                let func = match ident {
                    "x" => return Ok(Expr::x()),
                    "t" => return Ok(Expr::t()),
                    "pi" => return Ok(Expr::Pi),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "sqrt" => Func::Sqrt,
                    _ => {
                        return Err(Error::Parse {
                            offset: start,
                            message: format!(
                                "expected x, t, pi or one of sin/cos/exp/sqrt, found '{ident}'"
                            ),
                        })
                    }
                };
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            _ => Err(self.error("number, variable, function or '('")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    #[test]
    fn parse_and_eval_examples() {
        assert!((p("x^2*(1-x)*t").eval(0.5, 0.25) - 0.03125).abs() < 1e-16);
        assert!((p("exp(-t)*sin(pi*x)^2").eval(0.5, 0.0) - 1.0).abs() < 1e-15);
        assert_eq!(p("3").eval(7.0, -2.0), 3.0);
        assert_eq!(p("x*t").eval(2.0, 3.0), 6.0);
        assert_eq!(p("x^2*(1-x)*t").eval(1.0, 1.0), 0.0);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(p("-x^2").eval(3.0, 0.0), -9.0);
        assert_eq!(p("8/2/2").eval(0.0, 0.0), 2.0);
        assert_eq!(p("8-2-2").eval(0.0, 0.0), 4.0);
        assert_eq!(p("2+3*4").eval(0.0, 0.0), 14.0);
        assert_eq!(p("(2+3)*4").eval(0.0, 0.0), 20.0);
        assert_eq!(p("x^(3)").eval(2.0, 0.0), 8.0);
        assert_eq!(p("1.5e1 + .5").eval(0.0, 0.0), 15.5);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match Expr::parse("x^(-1)") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Expr::parse("x^-1").is_err());
        assert!(Expr::parse("x^1.5").is_err());
        assert!(Expr::parse("2x").is_err());
        assert!(Expr::parse("foo(x)").is_err());
        assert!(Expr::parse("(x").is_err());
        assert!(Expr::parse("").is_err());
    }

    #[test]
    fn division_by_zero_is_flagged() {
        let e = p("1/(x-1)");
        assert!(e.eval(1.0, 0.0).is_nan());
        assert!(matches!(e.try_eval(1.0, 0.0), Err(Error::NonFinite { .. })));
        assert!(e.try_eval(2.0, 0.0).is_ok());
    }

    #[test]
    fn derivative_examples() {
        let d = p("x^2").differentiate(Var::X);
        for &x in &[-1.0, 0.3, 2.0] {
            assert!((d.eval(x, 0.0) - 2.0 * x).abs() < 1e-15);
        }
        assert!(p("sin(pi*x)^2").differentiate(Var::X).eval(0.0, 0.0).abs() < 1e-15);
        let d2 = p("x^2*(1-x)^2").differentiate(Var::X).differentiate(Var::X);
        assert!((d2.eval(0.0, 0.0) - 2.0).abs() < 1e-14);
        assert!((d2.eval(0.5, 0.0) - (12.0 * 0.25 - 6.0 + 2.0)).abs() < 1e-14);
        assert_eq!(p("x*t").differentiate(Var::T).eval(4.0, 1.0), 4.0);
    }

    #[test]
    fn variable_scaling_and_fixing() {
        let e = p("x^2 + t");
        assert_eq!(e.scale_vars(2.0, 3.0).eval(1.0, 1.0), 7.0);
        let f = e.fix_t(5.0);
        assert!(!f.depends_on(Var::T) && f.depends_on(Var::X));
        assert_eq!(f.eval(1.0, 100.0), 6.0);
    }

    #[test]
    fn display_reparses() {
        for s in ["-x^2", "x - (-2)", "exp(-t)*sin(pi*x)^2", "1/(x+2) - t^3", "sqrt(1 + x*x)"] {
            let e = p(s);
            let again = p(&e.to_string());
            for &(x, t) in &[(0.3, 0.7), (1.2, -0.4)] {
                assert_eq!(e.eval(x, t), again.eval(x, t), "{s}");
            }
        }
    }
}
