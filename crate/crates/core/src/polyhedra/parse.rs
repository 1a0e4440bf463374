//! Text syntax for single constraints: `2*il0 - os1 <= 3`, `il0 = os0`,
//! `is2 >= 1`. Variable tokens follow the `il<k>/is<k>/ol<k>/os<k>/t<k>/
//! f<k>/rin_<block>/rout_<block>` scheme.

use super::{LinearConstraint, Rel, VarId};
use num_bigint::BigInt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConstraintParseError {
    #[error("unknown variable token `{0}`")]
    UnknownVariable(String),
    #[error("expected {expected} at `{rest}`")]
    Unexpected { expected: &'static str, rest: String },
    #[error("missing relation (`<=`, `>=` or `=`)")]
    MissingRelation,
}

/// Resolve a standard variable token.
pub fn resolve_token(tok: &str) -> Option<VarId> {
    let num = |s: &str| s.parse::<u32>().ok();
    if let Some(rest) = tok.strip_prefix("rin_") {
        return Some(VarId::RetIn(rest.to_string()));
    }
    if let Some(rest) = tok.strip_prefix("rout_") {
        return Some(VarId::RetOut(rest.to_string()));
    }
    if let Some(k) = tok.strip_prefix("il").and_then(num) {
        return Some(VarId::InL(k));
    }
    if let Some(k) = tok.strip_prefix("is").and_then(num) {
        return Some(VarId::InS(k));
    }
    if let Some(k) = tok.strip_prefix("ol").and_then(num) {
        return Some(VarId::OutL(k));
    }
    if let Some(k) = tok.strip_prefix("os").and_then(num) {
        return Some(VarId::OutS(k));
    }
    if let Some(k) = tok.strip_prefix('t').and_then(num) {
        return Some(VarId::Tmp(k));
    }
    if let Some(k) = tok.strip_prefix('f').and_then(|s| s.parse::<u64>().ok()) {
        return Some(VarId::Fresh(k));
    }
    None
}

struct Lexer<'a> {
    rest: &'a str,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Le,
    Ge,
    Eq,
    End,
}

impl<'a> Lexer<'a> {
    fn new(s: &'a str) -> Self {
        Lexer { rest: s }
    }

    fn next_tok(&mut self) -> Result<Tok, ConstraintParseError> {
        self.rest = self.rest.trim_start();
        let mut chars = self.rest.chars();
        let Some(c) = chars.next() else {
            return Ok(Tok::End);
        };
        let tok = match c {
            '+' => {
                self.rest = &self.rest[1..];
                Tok::Plus
            }
            '-' => {
                self.rest = &self.rest[1..];
                Tok::Minus
            }
            '*' => {
                self.rest = &self.rest[1..];
                Tok::Star
            }
            '=' => {
                self.rest = &self.rest[1..];
                Tok::Eq
            }
            '<' | '>' => {
                if chars.next() != Some('=') {
                    return Err(ConstraintParseError::Unexpected {
                        expected: "`<=` or `>=`",
                        rest: self.rest.to_string(),
                    });
                }
                let ge = c == '>';
                self.rest = &self.rest[2..];
                if ge {
                    Tok::Ge
                } else {
                    Tok::Le
                }
            }
            d if d.is_ascii_digit() => {
                let end = self
                    .rest
                    .find(|ch: char| !ch.is_ascii_digit())
                    .unwrap_or(self.rest.len());
                let (num, rest) = self.rest.split_at(end);
                self.rest = rest;
                Tok::Int(num.parse().unwrap())
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let end = self
                    .rest
                    .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                    .unwrap_or(self.rest.len());
                let (id, rest) = self.rest.split_at(end);
                self.rest = rest;
                Tok::Ident(id.to_string())
            }
            _ => {
                return Err(ConstraintParseError::Unexpected {
                    expected: "term",
                    rest: self.rest.to_string(),
                })
            }
        };
        Ok(tok)
    }
}

/// Accumulated linear side: `terms + konst`.
#[derive(Default)]
struct Side {
    terms: Vec<(VarId, BigInt)>,
    konst: BigInt,
}

/// Parse one side of a relation up to a relation token or end.
fn parse_side(
    lx: &mut Lexer<'_>,
    resolve: &mut dyn FnMut(&str) -> Option<VarId>,
) -> Result<(Side, Tok), ConstraintParseError> {
    let mut side = Side::default();
    let mut sign = BigInt::from(1);
    let mut expect_term = true;
    loop {
        let tok = lx.next_tok()?;
        match tok {
            Tok::Plus if !expect_term => {
                sign = BigInt::from(1);
                expect_term = true;
            }
            Tok::Minus => {
                // allowed as unary (leading) or binary separator
                sign = if expect_term { -sign } else { -BigInt::from(1) };
                expect_term = true;
            }
            Tok::Int(n) => {
                // optionally `n * var`
                let mut lx2 = Lexer { rest: lx.rest };
                if lx2.next_tok()? == Tok::Star {
                    *lx = Lexer { rest: lx2.rest };
                    let vtok = lx.next_tok()?;
                    let Tok::Ident(name) = vtok else {
                        return Err(ConstraintParseError::Unexpected {
                            expected: "variable after `*`",
                            rest: lx.rest.to_string(),
                        });
                    };
                    let v = resolve(&name)
                        .ok_or_else(|| ConstraintParseError::UnknownVariable(name.clone()))?;
                    side.terms.push((v, &sign * &n));
                } else {
                    side.konst += &sign * &n;
                }
                sign = BigInt::from(1);
                expect_term = false;
            }
            Tok::Ident(name) => {
                let v = resolve(&name)
                    .ok_or_else(|| ConstraintParseError::UnknownVariable(name.clone()))?;
                side.terms.push((v, sign.clone()));
                sign = BigInt::from(1);
                expect_term = false;
            }
            Tok::Le | Tok::Ge | Tok::Eq | Tok::End => return Ok((side, tok)),
            _ => {
                return Err(ConstraintParseError::Unexpected {
                    expected: "term",
                    rest: lx.rest.to_string(),
                })
            }
        }
    }
}

/// Parse a constraint, resolving variable tokens with `resolve`.
pub fn parse_constraint_with(
    s: &str,
    resolve: &mut dyn FnMut(&str) -> Option<VarId>,
) -> Result<LinearConstraint, ConstraintParseError> {
    let mut lx = Lexer::new(s);
    let (lhs, rel_tok) = parse_side(&mut lx, resolve)?;
    let rel = match rel_tok {
        Tok::Le => Rel::Le,
        Tok::Ge => Rel::Le, // handled by negation below
        Tok::Eq => Rel::Eq,
        _ => return Err(ConstraintParseError::MissingRelation),
    };
    let negate = rel_tok == Tok::Ge;
    let (rhs, end_tok) = parse_side(&mut lx, resolve)?;
    if end_tok != Tok::End {
        return Err(ConstraintParseError::Unexpected {
            expected: "end of constraint",
            rest: lx.rest.to_string(),
        });
    }
    // lhs REL rhs  ->  lhs - rhs REL (rhs.konst - lhs.konst)
    let mut terms = lhs.terms;
    terms.extend(rhs.terms.into_iter().map(|(v, c)| (v, -c)));
    let mut bound = &rhs.konst - &lhs.konst;
    if negate {
        terms = terms.into_iter().map(|(v, c)| (v, -c)).collect();
        bound = -bound;
    }
    Ok(LinearConstraint::new(terms, rel, bound))
}

/// Parse a constraint over the standard variable tokens.
pub fn parse_constraint(s: &str) -> Result<LinearConstraint, ConstraintParseError> {
    parse_constraint_with(s, &mut resolve_token)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_forms() {
        let c = parse_constraint("2*il0 - os1 <= 3").unwrap();
        assert_eq!(c.coeffs[&VarId::InL(0)], BigInt::from(2));
        assert_eq!(c.coeffs[&VarId::OutS(1)], BigInt::from(-1));
        assert_eq!(c.bound, BigInt::from(3));

        let c = parse_constraint("il0 = os0").unwrap();
        assert_eq!(c.rel, Rel::Eq);

        let c = parse_constraint("is2 >= 1").unwrap();
        assert_eq!(c.rel, Rel::Le);
        assert_eq!(c.coeffs[&VarId::InS(2)], BigInt::from(-1));
        assert_eq!(c.bound, BigInt::from(-1));

        let c = parse_constraint("-1 = is0").unwrap();
        assert_eq!(c.rel, Rel::Eq);
        assert_eq!(c.coeffs[&VarId::InS(0)], BigInt::from(-1));
        assert_eq!(c.bound, BigInt::from(1));
    }

    #[test]
    fn rejects_unknown_tokens() {
        assert!(matches!(
            parse_constraint("zz9 = 0"),
            Err(ConstraintParseError::UnknownVariable(_))
        ));
    }

    #[test]
    fn ret_tokens_resolve_to_block_names() {
        let c = parse_constraint("rin_b1 = rout_b1").unwrap();
        assert!(c.coeffs.contains_key(&VarId::RetIn("b1".into())));
        assert!(c.coeffs.contains_key(&VarId::RetOut("b1".into())));
    }
}
