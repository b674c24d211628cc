//! Arithmetic expressions over `x_i`, `u_i`, `w_i` with `sin`, `cos`, `tan`,
//! `exp` and `sqrt`. Polynomial expressions convert to [`Polynomial`];
//! everything evaluates numerically for simulation.

use std::fmt;

use thiserror::Error;

use crate::poly::{Polynomial, Var};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("not a polynomial: {0}")]
    NotPolynomial(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Sqrt,
}

impl Func {
    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        let mut p = Parser {
            text,
            bytes: text.as_bytes(),
            pos: 0,
        };
        p.skip_ws();
        if p.pos == text.len() {
            return Err(ExprError::Syntax {
                position: 0,
                message: "empty expression".into(),
            });
        }
        let e = p.sum()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Variables in first-occurrence order, deduplicated.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn eval<T: Scalar>(&self, x: &[T], u: &[T], w: &[T]) -> T {
        match self {
            Expr::Num(v) => T::lit(*v),
            Expr::Var(Var::State(i)) => x[*i],
            Expr::Var(Var::Input(i)) => u[*i],
            Expr::Var(Var::Noise(i)) => w[*i],
            Expr::Neg(a) => -a.eval(x, u, w),
            Expr::Add(a, b) => a.eval(x, u, w) + b.eval(x, u, w),
            Expr::Sub(a, b) => a.eval(x, u, w) - b.eval(x, u, w),
            Expr::Mul(a, b) => a.eval(x, u, w) * b.eval(x, u, w),
            Expr::Div(a, b) => a.eval(x, u, w) / b.eval(x, u, w),
            Expr::Pow(a, b) => {
                let base = a.eval(x, u, w);
                match b.as_integer() {
                    Some(k) => base.powi(k),
                    None => base.powf(b.eval(x, u, w)),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x, u, w)),
        }
    }

    fn as_integer(&self) -> Option<i32> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Neg(a) => -(a.as_constant()?),
            _ => self.as_constant()?,
        };
        (v.fract() == 0.0 && v.abs() < 1e6).then_some(v as i32)
    }

    fn as_constant(&self) -> Option<f64> {
        self.vars()
            .is_empty()
            .then(|| self.eval::<f64>(&[], &[], &[]))
    }

    /// Expands into a polynomial. Division is allowed by constants only and
    /// exponents must be non-negative integers.
    pub fn to_poly<T: Scalar>(&self) -> Result<Polynomial<T>, ExprError> {
        Ok(match self {
            Expr::Num(v) => Polynomial::constant(T::lit(*v)),
            Expr::Var(v) => Polynomial::var(*v),
            Expr::Neg(a) => -a.to_poly::<T>()?,
            Expr::Add(a, b) => a.to_poly::<T>()? + b.to_poly::<T>()?,
            Expr::Sub(a, b) => a.to_poly::<T>()? - b.to_poly::<T>()?,
            Expr::Mul(a, b) => a.to_poly::<T>()? * b.to_poly::<T>()?,
            Expr::Div(a, b) => {
                let d = b.as_constant().ok_or_else(|| {
                    ExprError::NotPolynomial(format!("division by non-constant `{b}`"))
                })?;
                if d == 0.0 {
                    return Err(ExprError::NotPolynomial("division by zero".into()));
                }
                a.to_poly::<T>()?.scale(T::lit(1.0 / d))
            }
            Expr::Pow(a, b) => match b.as_integer() {
                Some(k) if k >= 0 => a.to_poly::<T>()?.powu(k as u32),
                _ => {
                    return Err(ExprError::NotPolynomial(format!(
                        "exponent `{b}` is not a non-negative integer"
                    )))
                }
            },
            Expr::Call(f, _) => {
                if let Some(v) = self.as_constant() {
                    Polynomial::constant(T::lit(v))
                } else {
                    return Err(ExprError::NotPolynomial(format!(
                        "`{}` of a variable",
                        f.name()
                    )));
                }
            }
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Div(a, b) => write!(f, "{a}/{b}"),
            Expr::Pow(a, b) => write!(f, "{a}^{b}"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        let message = if self.pos >= self.bytes.len() {
            format!("{message} (at end of input)")
        } else {
            message.to_string()
        };
        ExprError::Syntax {
            position: self.pos,
            message,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            lhs = if c == b'+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == b'*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        match self.peek() {
            None => Err(self.error("expected an operand")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let s = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_alphanumeric()
                        || self.bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = &self.text[s..self.pos];
                if let Some(f) = Func::from_name(name) {
                    if self.peek() != Some(b'(') {
                        return Err(self.error("expected `(` after function name"));
                    }
                    self.pos += 1;
                    let arg = self.sum()?;
                    if self.peek() != Some(b')') {
                        return Err(self.error("expected `)`"));
                    }
                    self.pos += 1;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                Var::parse(name)
                    .map(Expr::Var)
                    .ok_or(ExprError::UnknownIdentifier {
                        name: name.to_string(),
                        position: s,
                    })
            }
            Some(_) => {
                let _ = start;
                Err(self.error("unexpected character"))
            }
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let s = self.pos;
        let b = self.bytes;
        while self.pos < b.len() && (b[self.pos].is_ascii_digit() || b[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < b.len() && (b[self.pos] == b'e' || b[self.pos] == b'E') {
            let mut k = self.pos + 1;
            if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
                k += 1;
            }
            if k < b.len() && b[k].is_ascii_digit() {
                while k < b.len() && b[k].is_ascii_digit() {
                    k += 1;
                }
                self.pos = k;
            }
        }
        self.text[s..self.pos]
            .parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ExprError::Syntax {
                position: s,
                message: format!("bad number `{}`", &self.text[s..self.pos]),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn room_temperature_dynamics_expand() {
        let e = Expr::parse("x1 + 5*(0.008*(15 - x1) + 0.0036*(55 - x1)*u1) + 0.1*w1").unwrap();
        let p: Polynomial<f64> = e.to_poly().unwrap();
        let v = p.eval(&[21.0], &[0.0], &[0.0]).unwrap();
        assert!((v - 20.76).abs() < 1e-12);
        assert!((e.eval(&[21.0], &[0.0], &[0.0]) - 20.76f64).abs() < 1e-12);
    }

    #[test]
    fn precedence() {
        let e = Expr::parse("2 + 3*x1^2 - -1").unwrap();
        assert_eq!(e.eval(&[2.0f64], &[], &[]), 2.0 + 12.0 + 1.0);
        let e = Expr::parse("-x1^2").unwrap();
        assert_eq!(e.eval(&[3.0f64], &[], &[]), -9.0);
        let e = Expr::parse("2^3^2").unwrap();
        assert_eq!(e.eval::<f64>(&[], &[], &[]), 512.0);
        let e = Expr::parse("1.5e-3*x1/3").unwrap();
        assert!((e.eval(&[2.0f64], &[], &[]) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn trig_is_simulation_only() {
        let e = Expr::parse("x1 + 0.1*sin(x2)").unwrap();
        assert!(matches!(
            e.to_poly::<f64>(),
            Err(ExprError::NotPolynomial(_))
        ));
        assert!((e.eval(&[1.0f64, std::f64::consts::FRAC_PI_2], &[], &[]) - 1.1).abs() < 1e-12);
        let k: Polynomial<f64> = Expr::parse("cos(0)*x1").unwrap().to_poly().unwrap();
        assert_eq!(k, Polynomial::var(Var::State(0)));
    }

    #[test]
    fn non_polynomial_forms_rejected() {
        assert!(Expr::parse("1/x1").unwrap().to_poly::<f64>().is_err());
        assert!(Expr::parse("x1^0.5").unwrap().to_poly::<f64>().is_err());
        assert!(Expr::parse("x1^-1").unwrap().to_poly::<f64>().is_err());
        assert!(Expr::parse("x1/0").unwrap().to_poly::<f64>().is_err());
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(
            Expr::parse("x1 + y"),
            Err(ExprError::UnknownIdentifier {
                name: "y".into(),
                position: 5
            })
        );
        match Expr::parse("x1 *") {
            Err(ExprError::Syntax { position, message }) => {
                assert_eq!(position, 4);
                assert!(message.contains("end of input"));
            }
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("(x1").is_err());
        assert!(Expr::parse("x1 x2").is_err());
        assert!(Expr::parse("sin x1").is_err());
        assert!(Expr::parse("").is_err());
    }

    #[test]
    fn vars_listed_once() {
        let e = Expr::parse("x1*u1 + x1 + w2").unwrap();
        assert_eq!(e.vars(), vec![Var::State(0), Var::Input(0), Var::Noise(1)]);
    }
}
