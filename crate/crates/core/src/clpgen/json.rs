//! JSON form of clause programs:
//! `{"clauses": [{"head": {"pred", "args"}, "constraint": [..], "body": [..]}], "entries": {..}}`.

use super::{Atom, Clause, ClpProgram};
use crate::polyhedra::{parse_constraint_with, resolve_token, Polyhedron, VarId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Serialize, Deserialize)]
struct AtomJson {
    pred: String,
    args: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClauseJson {
    head: AtomJson,
    constraint: Vec<String>,
    body: Vec<AtomJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClpJson {
    clauses: Vec<ClauseJson>,
    entries: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum ClpJsonError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad constraint `{0}`")]
    Constraint(String),
}

fn atom_json(a: &Atom) -> AtomJson {
    AtomJson {
        pred: a.pred.clone(),
        args: a.args.iter().map(|v| v.token()).collect(),
    }
}

pub fn clp_to_json(p: &ClpProgram) -> serde_json::Value {
    let doc = ClpJson {
        clauses: p
            .clauses
            .iter()
            .map(|c| ClauseJson {
                head: atom_json(&c.head),
                constraint: c
                    .constraint
                    .constraints
                    .iter()
                    .map(|k| k.to_string())
                    .collect(),
                body: c.body.iter().map(atom_json).collect(),
            })
            .collect(),
        entries: p.entries.clone(),
    };
    serde_json::to_value(doc).expect("serializable")
}

pub fn clp_from_json(v: &serde_json::Value) -> Result<ClpProgram, ClpJsonError> {
    let doc: ClpJson = serde_json::from_value(v.clone())?;
    let mut out = ClpProgram {
        clauses: Vec::new(),
        entries: doc.entries,
    };
    for c in doc.clauses {
        let mut fresh = 1_000_000u64;
        let mut named: BTreeMap<String, VarId> = BTreeMap::new();
        let mut resolve = move |tok: &str| -> VarId {
            resolve_token(tok).unwrap_or_else(|| {
                named
                    .entry(tok.to_string())
                    .or_insert_with(|| {
                        fresh += 1;
                        VarId::Fresh(fresh)
                    })
                    .clone()
            })
        };
        let head = Atom {
            pred: c.head.pred,
            args: c.head.args.iter().map(|a| resolve(a)).collect(),
        };
        let body: Vec<Atom> = c
            .body
            .into_iter()
            .map(|a| Atom {
                pred: a.pred,
                args: a.args.iter().map(|x| resolve(x)).collect(),
            })
            .collect();
        let mut constraints = Vec::new();
        for s in &c.constraint {
            let k = parse_constraint_with(s, &mut |tok| Some(resolve(tok)))
                .map_err(|_| ClpJsonError::Constraint(s.clone()))?;
            constraints.push(k);
        }
        let scope: Vec<VarId> = head
            .args
            .iter()
            .chain(body.iter().flat_map(|a| a.args.iter()))
            .cloned()
            .collect();
        out.clauses.push(Clause {
            head,
            constraint: Polyhedron::from_constraints(constraints, scope).canonicalize(),
            body,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clpgen::parse_clp;

    #[test]
    fn json_round_trips() {
        let src = "\
% entry A.f -> e
e(il0, rin_e) :- il0 = ol0, rin_e = rout_e, x(ol0, rout_e).
x(il0, rin_x) :- il0 <= 0, rin_x = f0.
";
        let p = parse_clp(src).unwrap();
        let j = clp_to_json(&p);
        let back = clp_from_json(&j).unwrap();
        assert_eq!(p.entries, back.entries);
        assert_eq!(p.clauses.len(), back.clauses.len());
        for (a, b) in p.clauses.iter().zip(&back.clauses) {
            assert!(crate::clpgen::alpha_equivalent(a, b));
        }
    }
}
