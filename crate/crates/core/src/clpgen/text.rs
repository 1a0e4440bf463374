//! Prolog-like textual clause format with a companion parser.
//!
//! ```text
//! % entry Sum.main -> main
//! b1(il0, is0, rin_b1) :- il0 = ol0, is0 = 0, 0 = os0, rin_b1 = os0.
//! b5(il0, is0, is1, rin_b5) :- il0 = ol0, is0 = os0, rin_b5 = rout_b5, sum(is1, os1), b6(ol0, os0, os1, rout_b5).
//! ```
//! Items after `:-` are constraints (they contain a relation) or body
//! atoms; `%` starts a comment. Variable tokens follow the standard
//! scheme; unrecognized identifiers parse as clause-local fresh variables.

use super::{Atom, Clause, ClpProgram};
use crate::polyhedra::{parse_constraint_with, resolve_token, Polyhedron, VarId};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClpParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

pub fn emit_clause(clause: &Clause) -> String {
    let mut s = clause.head.to_string();
    let items: Vec<String> = clause
        .constraint
        .constraints
        .iter()
        .map(|c| c.to_string())
        .chain(clause.body.iter().map(|a| a.to_string()))
        .collect();
    if !items.is_empty() {
        s.push_str(" :- ");
        s.push_str(&items.join(", "));
    }
    s.push('.');
    s
}

/// Deterministic listing: entry table first, then clauses in order.
pub fn emit_clp(p: &ClpProgram) -> String {
    let mut out = String::new();
    for (m, pred) in &p.entries {
        let _ = writeln!(out, "% entry {m} -> {pred}");
    }
    for c in &p.clauses {
        let _ = writeln!(out, "{}", emit_clause(c));
    }
    out
}

struct VarTable {
    named: BTreeMap<String, VarId>,
    next_fresh: u64,
}

impl VarTable {
    fn new() -> Self {
        VarTable {
            named: BTreeMap::new(),
            next_fresh: 1_000_000,
        }
    }

    fn resolve(&mut self, tok: &str) -> VarId {
        if let Some(v) = resolve_token(tok) {
            return v;
        }
        if let Some(v) = self.named.get(tok) {
            return v.clone();
        }
        let v = VarId::Fresh(self.next_fresh);
        self.next_fresh += 1;
        self.named.insert(tok.to_string(), v.clone());
        v
    }
}

/// Split `items` on top-level commas (commas inside parentheses separate
/// atom arguments, not items).
fn split_items(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => {
                depth += 1;
                cur.push(ch);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                cur.push(ch);
            }
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
            }
            _ => cur.push(ch),
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn parse_atom(s: &str, vars: &mut VarTable, line: usize) -> Result<Atom, ClpParseError> {
    let err = |msg: String| ClpParseError::Syntax { line, msg };
    let open = s.find('(').ok_or_else(|| err(format!("malformed atom `{s}`")))?;
    if !s.trim_end().ends_with(')') {
        return Err(err(format!("malformed atom `{s}`")));
    }
    let pred = s[..open].trim().to_string();
    if pred.is_empty() || !pred.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(err(format!("bad predicate name `{pred}`")));
    }
    let inner = &s[open + 1..s.trim_end().len() - 1];
    let mut args = Vec::new();
    for a in split_items(inner) {
        if a.is_empty() {
            continue;
        }
        if !a.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err(format!("bad atom argument `{a}`")));
        }
        args.push(vars.resolve(&a));
    }
    Ok(Atom { pred, args })
}

/// Parse one clause line (without trailing comment).
pub fn parse_clause(text: &str) -> Result<Clause, ClpParseError> {
    parse_clause_at(text, 0)
}

fn parse_clause_at(text: &str, line: usize) -> Result<Clause, ClpParseError> {
    let err = |msg: String| ClpParseError::Syntax { line, msg };
    let t = text.trim();
    let t = t
        .strip_suffix('.')
        .ok_or_else(|| err("clause must end with `.`".into()))?;
    let mut vars = VarTable::new();
    let (head_s, rest) = match t.find(":-") {
        Some(i) => (&t[..i], Some(&t[i + 2..])),
        None => (t, None),
    };
    let head = parse_atom(head_s.trim(), &mut vars, line)?;
    let mut constraints = Vec::new();
    let mut body = Vec::new();
    if let Some(rest) = rest {
        for item in split_items(rest) {
            let is_constraint = item.contains("<=") || item.contains(">=") || {
                // `=` outside parentheses marks a constraint
                let mut depth = 0;
                let mut found = false;
                for ch in item.chars() {
                    match ch {
                        '(' => depth += 1,
                        ')' => depth -= 1,
                        '=' if depth == 0 => found = true,
                        _ => {}
                    }
                }
                found
            };
            if is_constraint {
                let c = parse_constraint_with(&item, &mut |tok| Some(vars.resolve(tok)))
                    .map_err(|e| err(format!("bad constraint `{item}`: {e}")))?;
                constraints.push(c);
            } else {
                body.push(parse_atom(&item, &mut vars, line)?);
            }
        }
    }
    let scope: Vec<VarId> = head
        .args
        .iter()
        .chain(body.iter().flat_map(|a| a.args.iter()))
        .cloned()
        .collect();
    Ok(Clause {
        head,
        constraint: Polyhedron::from_constraints(constraints, scope).canonicalize(),
        body,
    })
}

/// Parse a listing produced by [`emit_clp`].
pub fn parse_clp(text: &str) -> Result<ClpProgram, ClpParseError> {
    let mut p = ClpProgram::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let stripped = match raw.find('%') {
            Some(i) => {
                let comment = raw[i + 1..].trim();
                if let Some(rest) = comment.strip_prefix("entry ") {
                    if let Some((m, pred)) = rest.split_once("->") {
                        p.entries
                            .insert(m.trim().to_string(), pred.trim().to_string());
                    }
                }
                &raw[..i]
            }
            None => raw,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        p.clauses.push(parse_clause_at(stripped, line)?);
    }
    Ok(p)
}
