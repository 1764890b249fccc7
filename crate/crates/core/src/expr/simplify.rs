//! Value-preserving local rewrites: identity elimination and constant folding.
//!
//! Folding is skipped whenever the folded value would be a domain error or
//! non-finite, so evaluation errors are never hidden by the simplifier.

use super::{checked_pow, Expr};

impl Expr {
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => neg(a.simplify()),
            Expr::Func(f, a) => {
                let a = a.simplify();
                if let Expr::Const(x) = a {
                    if let Ok(v) = f.apply(x) {
                        if v.is_finite() {
                            return Expr::Const(v);
                        }
                    }
                }
                Expr::func(*f, a)
            }
            Expr::Add(a, b) => add(a.simplify(), b.simplify()),
            Expr::Sub(a, b) => sub(a.simplify(), b.simplify()),
            Expr::Mul(a, b) => mul(a.simplify(), b.simplify()),
            Expr::Div(a, b) => div(a.simplify(), b.simplify()),
            Expr::Pow(a, c) => pow(a.simplify(), *c),
        }
    }
}

fn finite(v: f64) -> Option<Expr> {
    v.is_finite().then_some(Expr::Const(v))
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        a => -a,
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => finite(x + y).unwrap_or(a + b),
        _ if a.is_const(0.0) => b,
        _ if b.is_const(0.0) => a,
        (_, Expr::Neg(inner)) => sub(a.clone(), (**inner).clone()),
        _ => a + b,
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => finite(x - y).unwrap_or(a - b),
        _ if b.is_const(0.0) => a,
        _ if a.is_const(0.0) => neg(b),
        _ if a == b => Expr::Const(0.0),
        _ => a - b,
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => finite(x * y).unwrap_or(a * b),
        _ if a.is_const(0.0) || b.is_const(0.0) => Expr::Const(0.0),
        _ if a.is_const(1.0) => b,
        _ if b.is_const(1.0) => a,
        _ if a.is_const(-1.0) => neg(b),
        _ if b.is_const(-1.0) => neg(a),
        // keep constants on the left so repeated factors fold
        (Expr::Const(x), Expr::Mul(l, r)) => match **l {
            Expr::Const(y) => match finite(x * y) {
                Some(c) => mul(c, (**r).clone()),
                None => a * b,
            },
            _ => a * b,
        },
        (_, Expr::Const(_)) => mul(b, a),
        _ => a * b,
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => finite(x / y).unwrap_or(a / b),
        _ if b.is_const(1.0) => a,
        _ if a.is_const(0.0) && !b.is_const(0.0) => Expr::Const(0.0),
        _ => a / b,
    }
}

fn pow(a: Expr, c: f64) -> Expr {
    if c == 1.0 {
        return a;
    }
    if c == 0.0 {
        return Expr::Const(1.0);
    }
    if let Expr::Const(x) = a {
        if let Ok(v) = checked_pow(x, c) {
            if v.is_finite() {
                return Expr::Const(v);
            }
        }
    }
    a.powf(c)
}
