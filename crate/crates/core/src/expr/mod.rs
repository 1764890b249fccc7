//! Symbolic scalar expressions.
//!
//! An [`Expr`] is an immutable tree over named variables. It supports
//! exact differentiation ([`Expr::diff`]), a light value-preserving
//! simplifier ([`Expr::simplify`]) and checked pointwise evaluation
//! ([`Expr::eval`]). Every derivative of the metric potential `H` and of
//! level-set functions `F` used in the crate goes through here, so ambient
//! quantities carry no truncation error.
//!
//! Grammar (loosest to tightest): `+ -`, `* /`, unary `-`, `^`. The power
//! operator is right-associative and its exponent must reduce to a
//! constant. Supported functions: `sin cos exp log sqrt tanh`.

mod parser;
mod simplify;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

pub use parser::parse;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: expected {}", expected.join(" or "))]
    Syntax { offset: usize, expected: Vec<String> },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent starting at offset {offset} is not a constant")]
    NonConstantExponent { offset: usize },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error in `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    /// Applies the function, rejecting arguments outside its domain.
    fn apply(self, x: f64) -> Result<f64, &'static str> {
        match self {
            Func::Log if x <= 0.0 => Err("log of non-positive value"),
            Func::Sqrt if x <= 0.0 => Err("sqrt of non-positive value"),
            Func::Sin => Ok(x.sin()),
            Func::Cos => Ok(x.cos()),
            Func::Exp => Ok(x.exp()),
            Func::Log => Ok(x.ln()),
            Func::Sqrt => Ok(x.sqrt()),
            Func::Tanh => Ok(x.tanh()),
        }
    }
}

/// Scalar expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Neg(Box<Expr>),
    Func(Func, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Power with a constant exponent.
    Pow(Box<Expr>, f64),
}

/// Source of variable values for [`Expr::eval`].
pub trait Env {
    fn lookup(&self, name: &str) -> Option<f64>;
}

impl Env for [(&str, f64)] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }
}

impl<const N: usize> Env for [(&str, f64); N] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.as_slice().lookup(name)
    }
}

impl Env for HashMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

/// Parallel slices of names and values.
#[derive(Debug, Clone, Copy)]
pub struct NamedValues<'a> {
    pub names: &'a [String],
    pub values: &'a [f64],
}

impl Env for NamedValues<'_> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        Expr::Func(f, Box::new(arg))
    }

    pub fn powf(self, exponent: f64) -> Expr {
        Expr::Pow(Box::new(self), exponent)
    }

    pub fn is_const(&self, c: f64) -> bool {
        matches!(self, Expr::Const(v) if *v == c)
    }

    /// Names of all free variables.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(a) | Expr::Func(_, a) | Expr::Pow(a, _) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn depends_on(&self, name: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(n) => n == name,
            Expr::Neg(a) | Expr::Func(_, a) | Expr::Pow(a, _) => a.depends_on(name),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(name) || b.depends_on(name)
            }
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Func(_, a) | Expr::Pow(a, _) => 1 + a.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    /// Evaluates the expression. Never returns a non-finite value: division
    /// by zero, out-of-domain function arguments and overflow are reported
    /// as [`ExprError::Domain`] naming the offending subexpression.
    pub fn eval<E: Env + ?Sized>(&self, env: &E) -> Result<f64, ExprError> {
        let value = match self {
            Expr::Const(c) => *c,
            Expr::Var(name) => env
                .lookup(name)
                .ok_or_else(|| ExprError::Unbound(name.clone()))?,
            Expr::Neg(a) => -a.eval(env)?,
            Expr::Func(f, a) => {
                let x = a.eval(env)?;
                f.apply(x).map_err(|reason| self.domain(reason))?
            }
            Expr::Add(a, b) => a.eval(env)? + b.eval(env)?,
            Expr::Sub(a, b) => a.eval(env)? - b.eval(env)?,
            Expr::Mul(a, b) => a.eval(env)? * b.eval(env)?,
            Expr::Div(a, b) => {
                let num = a.eval(env)?;
                let den = b.eval(env)?;
                if den == 0.0 {
                    return Err(self.domain("division by zero"));
                }
                num / den
            }
            Expr::Pow(a, c) => {
                let base = a.eval(env)?;
                checked_pow(base, *c).map_err(|reason| self.domain(reason))?
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(self.domain("non-finite result"))
        }
    }

    fn domain(&self, reason: &'static str) -> ExprError {
        ExprError::Domain {
            subexpr: self.to_string(),
            reason,
        }
    }

    /// Exact partial derivative with respect to `var`, simplified.
    pub fn diff(&self, var: &str) -> Expr {
        self.diff_raw(var).simplify()
    }

    fn diff_raw(&self, var: &str) -> Expr {
        if !self.depends_on(var) {
            return Expr::Const(0.0);
        }
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(n) => Expr::Const(if n == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => -a.diff_raw(var),
            Expr::Add(a, b) => a.diff_raw(var) + b.diff_raw(var),
            Expr::Sub(a, b) => a.diff_raw(var) - b.diff_raw(var),
            Expr::Mul(a, b) => {
                a.diff_raw(var) * (**b).clone() + (**a).clone() * b.diff_raw(var)
            }
            Expr::Div(a, b) => {
                let num = a.diff_raw(var) * (**b).clone() - (**a).clone() * b.diff_raw(var);
                num / (**b).clone().powf(2.0)
            }
            Expr::Pow(a, c) => {
                Expr::Const(*c) * (**a).clone().powf(c - 1.0) * a.diff_raw(var)
            }
            Expr::Func(f, a) => {
                let inner = a.diff_raw(var);
                let arg = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::func(Func::Cos, arg),
                    Func::Cos => -Expr::func(Func::Sin, arg),
                    Func::Exp => Expr::func(Func::Exp, arg),
                    Func::Log => Expr::Const(1.0) / arg,
                    Func::Sqrt => Expr::Const(1.0) / (Expr::Const(2.0) * Expr::func(Func::Sqrt, arg)),
                    Func::Tanh => Expr::Const(1.0) - Expr::func(Func::Tanh, arg).powf(2.0),
                };
                outer * inner
            }
        }
    }

    /// Repeated partial derivatives, applied left to right.
    pub fn diff_many(&self, vars: &[&str]) -> Expr {
        vars.iter().fold(self.clone(), |e, v| e.diff(v))
    }

    /// Replaces every occurrence of variable `name` with `with`.
    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(n) if n == name => with.clone(),
            Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(name, with))),
            Expr::Func(f, a) => Expr::Func(*f, Box::new(a.substitute(name, with))),
            Expr::Pow(a, c) => Expr::Pow(Box::new(a.substitute(name, with)), *c),
            Expr::Add(a, b) => a.substitute(name, with) + b.substitute(name, with),
            Expr::Sub(a, b) => a.substitute(name, with) - b.substitute(name, with),
            Expr::Mul(a, b) => a.substitute(name, with) * b.substitute(name, with),
            Expr::Div(a, b) => a.substitute(name, with) / b.substitute(name, with),
        }
    }
}

pub(crate) fn checked_pow(base: f64, exponent: f64) -> Result<f64, &'static str> {
    if base == 0.0 && exponent < 0.0 {
        return Err("division by zero");
    }
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err("non-integer power of negative value");
    }
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        Ok(base.powi(exponent as i32))
    } else {
        Ok(base.powf(exponent))
    }
}

fn fmt_const(c: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.is_sign_negative() {
        write!(f, "(-{:?})", -c)
    } else {
        write!(f, "{c:?}")
    }
}

/// Canonical fully parenthesized infix form; parses back to the same tree
/// whenever the tree contains no `Neg(Const)` node.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_const(*c, f),
            Expr::Var(name) => f.write_str(name),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Func(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, c) => {
                write!(f, "({a}^")?;
                fmt_const(*c, f)?;
                f.write_str(")")
            }
        }
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl std::ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}
