//! Alpha-equivalence of clauses via canonical renumbering: head argument
//! positions first, then body argument positions, then constraint-only
//! variables. A variable repeated across positions becomes an explicit
//! equality between position variables, so `p(x) :- {}, q(x)` and
//! `p(x) :- {x = y}, q(y)` share one canonical form.

use super::Clause;
use crate::polyhedra::{LinearConstraint, Rel, VarId};
use num_bigint::BigInt;
use std::collections::BTreeMap;

type CanonConstraint = (Vec<(usize, BigInt)>, bool, BigInt); // (terms, is_eq, bound)

/// Canonical form of a clause; equal forms mean alpha-equivalent clauses.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CanonClause {
    pub head: (String, usize),
    pub body: Vec<(String, usize)>,
    pub constraints: Vec<CanonConstraint>,
}

fn translate(
    cs: &[LinearConstraint],
    map: &BTreeMap<VarId, usize>,
    frees: &BTreeMap<VarId, usize>,
) -> Vec<CanonConstraint> {
    let mut out: Vec<CanonConstraint> = cs
        .iter()
        .map(|c| {
            let mut terms: Vec<(usize, BigInt)> = c
                .coeffs
                .iter()
                .map(|(v, k)| {
                    let idx = map.get(v).or_else(|| frees.get(v)).copied().unwrap();
                    (idx, k.clone())
                })
                .collect();
            terms.sort_by_key(|t| t.0);
            // orient equalities on the renumbered variables
            let mut bound = c.bound.clone();
            if c.rel == Rel::Eq && terms.first().is_some_and(|(_, k)| k < &BigInt::from(0)) {
                for (_, k) in &mut terms {
                    *k = -&*k;
                }
                bound = -bound;
            }
            (terms, c.rel == Rel::Eq, bound)
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// Compute the canonical form.
pub fn canonical(clause: &Clause) -> CanonClause {
    let normalized = clause.constraint.canonicalize();
    let mut map: BTreeMap<VarId, usize> = BTreeMap::new();
    let mut eqs: Vec<LinearConstraint> = Vec::new();
    let mut next = 0usize;
    let positions = clause
        .head
        .args
        .iter()
        .chain(clause.body.iter().flat_map(|a| a.args.iter()));
    let mut position_vars: Vec<usize> = Vec::new();
    for v in positions {
        let idx = next;
        next += 1;
        position_vars.push(idx);
        match map.get(v) {
            None => {
                map.insert(v.clone(), idx);
            }
            Some(&first) => {
                // repeated variable: explicit equality between positions
                eqs.push(LinearConstraint::new(
                    vec![
                        (VarId::Fresh(first as u64), BigInt::from(1)),
                        (VarId::Fresh(idx as u64), BigInt::from(-1)),
                    ],
                    Rel::Eq,
                    BigInt::from(0),
                ));
            }
        }
    }
    // Equality constraints between position indices are pre-translated:
    // build them directly in canon space via a self-map.
    let self_map: BTreeMap<VarId, usize> = (0..next).map(|i| (VarId::Fresh(i as u64), i)).collect();

    let mut all_cs: Vec<LinearConstraint> = normalized.constraints.clone();
    let free_vars: Vec<VarId> = {
        let mut seen = Vec::new();
        for c in &all_cs {
            for v in c.support() {
                if !map.contains_key(v) && !seen.contains(v) {
                    seen.push(v.clone());
                }
            }
        }
        seen.sort();
        seen
    };

    let head = (clause.head.pred.clone(), clause.head.args.len());
    let body: Vec<(String, usize)> = clause
        .body
        .iter()
        .map(|a| (a.pred.clone(), a.args.len()))
        .collect();

    let mut extra = translate(&eqs, &self_map, &BTreeMap::new());

    let k = free_vars.len();
    let constraints = if k <= 6 {
        let mut best: Option<Vec<CanonConstraint>> = None;
        for perm in permutations(k) {
            let frees: BTreeMap<VarId, usize> = free_vars
                .iter()
                .cloned()
                .zip(perm.iter().map(|p| next + p))
                .collect();
            let cand = translate(&all_cs, &map, &frees);
            if best.as_ref().is_none_or(|b| &cand < b) {
                best = Some(cand);
            }
        }
        best.unwrap()
    } else {
        // Too many frees for exhaustive renumbering; first-occurrence
        // order is deterministic, merely not always minimal.
        let frees: BTreeMap<VarId, usize> = free_vars
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, v)| (v, next + i))
            .collect();
        translate(&all_cs, &map, &frees)
    };
    all_cs.clear();
    let mut constraints = constraints;
    constraints.append(&mut extra);
    constraints.sort();
    constraints.dedup();
    CanonClause {
        head,
        body,
        constraints,
    }
}

/// Structural equality up to variable renaming.
pub fn alpha_equivalent(a: &Clause, b: &Clause) -> bool {
    canonical(a) == canonical(b)
}

/// Deterministic string key for dedup maps and stable ordering.
pub fn canonical_key(clause: &Clause) -> String {
    let c = canonical(clause);
    let mut s = format!("{}/{}", c.head.0, c.head.1);
    for (p, n) in &c.body {
        s.push_str(&format!(" <- {p}/{n}"));
    }
    s.push_str(" | ");
    for (terms, is_eq, bound) in &c.constraints {
        for (v, k) in terms {
            s.push_str(&format!("{k}*v{v} "));
        }
        s.push_str(if *is_eq { "= " } else { "<= " });
        s.push_str(&format!("{bound}; "));
    }
    s
}
