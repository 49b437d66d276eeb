//! Prefix (S-expression) notation for [`LatticeExpr`].
//!
//! ```text
//! expr := (gen <index>)
//!       | (scale <real> expr)
//!       | (add expr expr+) | (sub expr expr) | (max expr expr+) | (min expr expr+)
//!       | (abs expr) | (pos expr)
//!       | (psum <real> expr+)
//! ```

use super::LatticeExpr;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(src: &str) -> Vec<(usize, Token<'_>)> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push((i, Token::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Token::Close));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                out.push((start, Token::Atom(&src[start..i])));
            }
        }
    }
    out
}

struct Parser<'a> {
    tokens: Vec<(usize, Token<'a>)>,
    at: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn pos(&self) -> usize {
        self.tokens.get(self.at).map_or(self.len, |t| t.0)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn next(&mut self) -> Option<Token<'a>> {
        let t = self.tokens.get(self.at).map(|t| t.1.clone());
        self.at += 1;
        t
    }

    fn peek(&self) -> Option<&Token<'a>> {
        self.tokens.get(self.at).map(|t| &t.1)
    }

    fn atom(&mut self) -> Result<&'a str> {
        match self.peek() {
            Some(Token::Atom(a)) => {
                let a = *a;
                self.at += 1;
                Ok(a)
            }
            _ => self.err("expected an atom"),
        }
    }

    fn real(&mut self) -> Result<f64> {
        let a = self.atom()?;
        match a.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.at -= 1;
                self.err(format!("expected a finite real, found `{a}`"))
            }
        }
    }

    fn close(&mut self) -> Result<()> {
        match self.next() {
            Some(Token::Close) => Ok(()),
            _ => {
                self.at -= 1;
                self.err("expected `)`")
            }
        }
    }

    fn children(&mut self, min: usize) -> Result<Vec<LatticeExpr>> {
        let mut out = Vec::new();
        while matches!(self.peek(), Some(Token::Open)) {
            out.push(self.expr()?);
        }
        if out.len() < min {
            return self.err(format!("expected at least {min} operand(s)"));
        }
        self.close()?;
        Ok(out)
    }

    fn expr(&mut self) -> Result<LatticeExpr> {
        match self.next() {
            Some(Token::Open) => {}
            _ => {
                self.at = self.at.saturating_sub(1);
                return self.err("expected `(`");
            }
        }
        let head = self.atom()?;
        let fold = |xs: Vec<LatticeExpr>, f: fn(LatticeExpr, LatticeExpr) -> LatticeExpr| {
            xs.into_iter().reduce(f).expect("arity checked")
        };
        match head {
            "gen" => {
                let a = self.atom()?;
                let i = match a.parse::<usize>() {
                    Ok(i) => i,
                    Err(_) => {
                        self.at -= 1;
                        return self.err(format!("expected a generator index, found `{a}`"));
                    }
                };
                self.close()?;
                Ok(LatticeExpr::gen(i))
            }
            "scale" => {
                let c = self.real()?;
                let mut xs = self.children(1)?;
                if xs.len() != 1 {
                    return self.err("`scale` takes exactly one operand");
                }
                Ok(xs.pop().unwrap().scaled(c))
            }
            "add" => Ok(fold(self.children(2)?, LatticeExpr::add)),
            "max" => Ok(fold(self.children(2)?, LatticeExpr::max)),
            "min" => Ok(fold(self.children(2)?, LatticeExpr::min)),
            "sub" => {
                let mut xs = self.children(2)?;
                if xs.len() != 2 {
                    return self.err("`sub` takes exactly two operands");
                }
                let b = xs.pop().unwrap();
                Ok(xs.pop().unwrap().sub(b))
            }
            "abs" | "pos" => {
                let mut xs = self.children(1)?;
                if xs.len() != 1 {
                    return self.err(format!("`{head}` takes exactly one operand"));
                }
                let x = xs.pop().unwrap();
                Ok(if head == "abs" { x.abs() } else { x.pos() })
            }
            "psum" => {
                let s = self.real()?;
                if s <= 0.0 {
                    self.at -= 1;
                    return self.err("power-sum exponent must be positive");
                }
                Ok(LatticeExpr::power_sum(s, self.children(1)?))
            }
            other => {
                self.at -= 1;
                self.err(format!("unknown operator `{other}`"))
            }
        }
    }
}

/// Parses one expression in prefix notation.
pub fn parse(src: &str) -> Result<LatticeExpr> {
    let mut p = Parser {
        tokens: tokenize(src),
        at: 0,
        len: src.len(),
    };
    let e = p.expr()?;
    if p.at < p.tokens.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let e = parse("(pos (sub (abs (gen 2)) (scale 16 (add (abs (gen 0)) (abs (gen 1))))))")
            .unwrap();
        // [|3| - 16(|0.1| + |0.05|)]₊ = 3 - 2.4
        let v = e.evaluate_scalar(&[0.1, -0.05, 3.0][..]).unwrap();
        assert!((v - 0.6).abs() < 1e-12);
    }

    #[test]
    fn nary_and_psum() {
        let e = parse("(add (gen 0) (gen 1) (gen 2))").unwrap();
        assert_eq!(e.evaluate_scalar(&[1.0, 2.0, 3.0][..]).unwrap(), 6.0);
        let e = parse("(psum 0.5 (gen 0) (gen 1))").unwrap();
        assert!((e.evaluate_scalar(&[3.0, 0.0][..]).unwrap() - 3.0).abs() < 1e-12);
        let e = parse("(min (gen 0) (gen 1) (scale -2 (gen 2)))").unwrap();
        assert_eq!(e.evaluate_scalar(&[1.0, 2.0, 1.0][..]).unwrap(), -2.0);
    }

    #[test]
    fn print_parse_roundtrip_is_structural() {
        let src = "(max (psum 2.5 (gen 0) (scale -0.1 (gen 3))) (min (pos (gen 1)) (abs (gen 2))))";
        let e = parse(src).unwrap();
        assert_eq!(parse(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn errors_carry_positions() {
        assert!(matches!(parse("(gen x)"), Err(Error::Parse { pos: 5, .. })));
        assert!(matches!(
            parse("(foo (gen 0))"),
            Err(Error::Parse { pos: 1, .. })
        ));
        assert!(matches!(parse("(abs (gen 0)"), Err(Error::Parse { .. })));
        assert!(matches!(parse("(add (gen 0))"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse("(gen 0) (gen 1)"),
            Err(Error::Parse { pos: 8, .. })
        ));
        assert!(matches!(
            parse("(psum 0 (gen 0))"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(parse(""), Err(Error::Parse { pos: 0, .. })));
    }
}
