//! Recursive-descent parser for [`Expr`].

use super::{Expr, ExprError, Func};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    /// Returns the next token and its byte offset.
    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let Some(c) = rest.chars().next() else {
            return Ok((Tok::End, start));
        };
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += 1;
            return Ok((tok, start));
        }
        if c.is_ascii_digit() || c == '.' {
            let bytes = rest.as_bytes();
            let mut end = 0;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            let text = &rest[..end];
            let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                offset: start,
                expected: vec!["number".into()],
            })?;
            self.pos += end;
            return Ok((Tok::Num(value), start));
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let end = rest
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                .unwrap_or(rest.len());
            self.pos += end;
            return Ok((Tok::Ident(rest[..end].to_string()), start));
        }
        Err(ExprError::Syntax {
            offset: start,
            expected: vec!["expression".into()],
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    offset: usize,
    vars: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ExprError> {
        let (tok, offset) = self.lexer.next()?;
        self.tok = tok;
        self.offset = offset;
        Ok(())
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            offset: self.offset,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Plus => {
                    self.bump()?;
                    lhs = lhs + self.term()?;
                }
                Tok::Minus => {
                    self.bump()?;
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.tok {
                Tok::Star => {
                    self.bump()?;
                    lhs = lhs * self.unary()?;
                }
                Tok::Slash => {
                    self.bump()?;
                    lhs = lhs / self.unary()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.tok == Tok::Minus {
            self.bump()?;
            return Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                e => -e,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if self.tok != Tok::Caret {
            return Ok(base);
        }
        self.bump()?;
        let at = self.offset;
        let exponent = self.unary()?;
        if !exponent.variables().is_empty() {
            return Err(ExprError::NonConstantExponent { offset: at });
        }
        match exponent.eval(&[] as &[(&str, f64)]) {
            Ok(c) => Ok(base.powf(c)),
            Err(_) => Err(ExprError::NonConstantExponent { offset: at }),
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                if self.tok != Tok::RParen {
                    return self.fail(&["`)`", "operator"]);
                }
                self.bump()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let at = self.offset;
                self.bump()?;
                if self.tok == Tok::LParen {
                    self.bump()?;
                    let arg = self.expr()?;
                    if self.tok != Tok::RParen {
                        return self.fail(&["`)`", "operator"]);
                    }
                    self.bump()?;
                    let func = Func::from_name(&name)
                        .ok_or(ExprError::UnknownIdentifier { name, offset: at })?;
                    return Ok(Expr::func(func, arg));
                }
                if self.vars.contains(&name.as_str()) {
                    Ok(Expr::Var(name))
                } else {
                    Err(ExprError::UnknownIdentifier { name, offset: at })
                }
            }
            _ => self.fail(&["number", "identifier", "`(`", "`-`"]),
        }
    }
}

/// Parses infix text over the declared variable names.
pub fn parse(text: &str, vars: &[&str]) -> Result<Expr, ExprError> {
    let mut parser = Parser {
        lexer: Lexer { src: text, pos: 0 },
        tok: Tok::End,
        offset: 0,
        vars,
    };
    parser.bump()?;
    let e = parser.expr()?;
    if parser.tok != Tok::End {
        return parser.fail(&["operator", "end of input"]);
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    const VARS: &[&str] = &["u", "v", "x"];

    fn c(v: f64) -> Box<Expr> {
        Box::new(Expr::Const(v))
    }

    fn var(n: &str) -> Box<Expr> {
        Box::new(Expr::Var(n.into()))
    }

    #[test]
    fn grammar_shape() {
        let e = parse("2*u + x^2", VARS).unwrap();
        assert_eq!(
            e,
            Expr::Add(Box::new(Expr::Mul(c(2.0), var("u"))), Box::new(Expr::Pow(var("x"), 2.0)))
        );
    }

    #[test]
    fn unbalanced_paren_reports_offset() {
        match parse("H(", VARS).unwrap_err() {
            ExprError::Syntax { offset, expected } => {
                assert_eq!(offset, 2);
                assert!(!expected.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("(u + x", VARS),
            Err(ExprError::Syntax { offset: 6, .. })
        ));
        assert!(matches!(
            parse("u x", VARS),
            Err(ExprError::Syntax { offset: 2, .. })
        ));
    }

    #[test]
    fn unary_minus_binds_looser_than_pow() {
        let e = parse("-x^2 + sin(u)", VARS).unwrap();
        let value = e.eval(&[("u", 0.0), ("x", 2.0)]).unwrap();
        assert_eq!(value, -4.0);
        assert_eq!(parse("-2^2", VARS).unwrap().eval(&[] as &[(&str, f64)]).unwrap(), -4.0);
    }

    #[test]
    fn pow_is_right_associative_with_constant_exponents() {
        let e = parse("x^2^3", VARS).unwrap();
        assert_eq!(e, Expr::Pow(var("x"), 8.0));
        assert_eq!(parse("x^-2", VARS).unwrap(), Expr::Pow(var("x"), -2.0));
        assert_eq!(parse("x^(1/2)", VARS).unwrap(), Expr::Pow(var("x"), 0.5));
        assert!(matches!(
            parse("x^u", VARS),
            Err(ExprError::NonConstantExponent { offset: 2 })
        ));
    }

    #[test]
    fn unknown_identifiers() {
        assert_eq!(
            parse("u + y", VARS),
            Err(ExprError::UnknownIdentifier { name: "y".into(), offset: 4 })
        );
        assert_eq!(
            parse("foo(u)", VARS),
            Err(ExprError::UnknownIdentifier { name: "foo".into(), offset: 0 })
        );
    }

    #[test]
    fn scientific_literals() {
        assert_eq!(parse("1e-3", VARS).unwrap(), Expr::Const(1e-3));
        assert_eq!(parse("2.5E+2", VARS).unwrap(), Expr::Const(250.0));
    }

    #[test]
    fn print_parse_round_trip() {
        for src in ["2*u + x^2", "-x^2 + sin(u)", "exp(-x^2)/(1+u)", "x^-1.5 - 3e-7*v", "tanh(-u)"] {
            let e = parse(src, VARS).unwrap();
            let printed = e.to_string();
            assert_eq!(parse(&printed, VARS).unwrap(), e, "{src} -> {printed}");
        }
    }
}
