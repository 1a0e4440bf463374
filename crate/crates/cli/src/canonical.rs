//! Canonical display form for `compile --canonical`: clauses sorted by
//! canonical key, variables renumbered in first-occurrence order.

use nonterm_core::clpgen::{canonical_key, Atom, Clause, ClpProgram};
use nonterm_core::polyhedra::VarId;
use std::collections::BTreeMap;

fn renumber(clause: &Clause) -> Clause {
    let mut map: BTreeMap<VarId, VarId> = BTreeMap::new();
    let mut next = 0u64;
    let touch = |v: &VarId, map: &mut BTreeMap<VarId, VarId>, next: &mut u64| -> VarId {
        map.entry(v.clone())
            .or_insert_with(|| {
                let nv = VarId::Fresh(*next);
                *next += 1;
                nv
            })
            .clone()
    };
    let head = Atom {
        pred: clause.head.pred.clone(),
        args: clause
            .head
            .args
            .iter()
            .map(|v| touch(v, &mut map, &mut next))
            .collect(),
    };
    let body: Vec<Atom> = clause
        .body
        .iter()
        .map(|a| Atom {
            pred: a.pred.clone(),
            args: a.args.iter().map(|v| touch(v, &mut map, &mut next)).collect(),
        })
        .collect();
    let mut support: Vec<VarId> = clause.constraint.support().into_iter().collect();
    support.sort();
    for v in support {
        touch(&v, &mut map, &mut next);
    }
    Clause {
        head,
        constraint: clause.constraint.rename(&map).canonicalize(),
        body,
    }
}

pub fn canonicalize_program(p: &ClpProgram) -> ClpProgram {
    let mut clauses: Vec<Clause> = p.clauses.iter().map(renumber).collect();
    clauses.sort_by_key(canonical_key);
    ClpProgram {
        clauses,
        entries: p.entries.clone(),
    }
}
