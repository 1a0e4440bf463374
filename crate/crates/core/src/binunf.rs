//! Binary unfolding: compresses derivation prefixes of a clause program
//! into clauses with at most one body atom. A recursive clause in the
//! result is a compressed loop of the original program; iterating the
//! operator to a bounded depth keeps every compressed loop reachable
//! within that many steps.

use crate::clpgen::{canonical_key, Atom, Clause, ClpProgram};
use crate::polyhedra::{
    eliminate_dark, eliminate_exact, sat_int, LinearConstraint, Polyhedron, ProjectionMode, VarId,
};
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;
use thiserror::Error;

/// A binary clause tagged with the first operator power that produced it.
#[derive(Debug, Clone)]
pub struct BinClause {
    pub clause: Clause,
    pub iteration: u32,
}

/// Deduplicated set of binary clauses, ordered by (iteration, canonical
/// form) for deterministic output.
#[derive(Debug, Clone, Default)]
pub struct BinClauseSet {
    pub clauses: Vec<BinClause>,
}

impl BinClauseSet {
    pub fn recursive(&self) -> impl Iterator<Item = &BinClause> {
        self.clauses.iter().filter(|b| b.clause.is_recursive())
    }

    pub fn contains_alpha(&self, clause: &Clause) -> bool {
        self.find_alpha(clause).is_some()
    }

    pub fn find_alpha(&self, clause: &Clause) -> Option<&BinClause> {
        let key = canonical_key(clause);
        self.clauses.iter().find(|b| canonical_key(&b.clause) == key)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UnfoldOpts {
    pub mode: ProjectionMode,
    pub max: u32,
    /// Wall-clock guard for pathological growth.
    pub timeout_ms: u64,
}

impl Default for UnfoldOpts {
    fn default() -> Self {
        UnfoldOpts {
            mode: ProjectionMode::DarkShadow,
            max: 10,
            timeout_ms: 20_000,
        }
    }
}

#[derive(Debug, Error)]
#[error("binary unfolding timed out after {elapsed_ms} ms at iteration {iteration}")]
pub struct UnfoldTimeout {
    pub iteration: u32,
    pub elapsed_ms: u64,
}

/// All variables a clause mentions.
fn clause_vars(c: &Clause) -> BTreeSet<VarId> {
    let mut vs: BTreeSet<VarId> = c.head.args.iter().cloned().collect();
    for a in &c.body {
        vs.extend(a.args.iter().cloned());
    }
    vs.extend(c.constraint.support());
    vs.extend(c.constraint.scope.iter().cloned());
    vs
}

fn rename_clause(c: &Clause, fresh: &mut u64) -> Clause {
    let map: BTreeMap<VarId, VarId> = clause_vars(c)
        .into_iter()
        .map(|v| {
            let nv = VarId::Fresh(*fresh);
            *fresh += 1;
            (v, nv)
        })
        .collect();
    let ren_atom = |a: &Atom| Atom {
        pred: a.pred.clone(),
        args: a.args.iter().map(|v| map[v].clone()).collect(),
    };
    Clause {
        head: ren_atom(&c.head),
        constraint: c.constraint.rename(&map),
        body: c.body.iter().map(ren_atom).collect(),
    }
}

/// The identity clause `p(x~) :- {x~ = y~}, p(y~)` with fresh variables.
pub fn id_clause(pred: &str, arity: usize, fresh: &mut u64) -> Clause {
    let mut take = |n: usize| -> Vec<VarId> {
        (0..n)
            .map(|_| {
                let v = VarId::Fresh(*fresh);
                *fresh += 1;
                v
            })
            .collect()
    };
    let xs = take(arity);
    let ys = take(arity);
    let eqs: Vec<LinearConstraint> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| LinearConstraint::var_eq(x.clone(), y.clone()))
        .collect();
    let scope: Vec<VarId> = xs.iter().chain(ys.iter()).cloned().collect();
    Clause {
        head: Atom {
            pred: pred.to_string(),
            args: xs,
        },
        constraint: Polyhedron::from_constraints(eqs, scope),
        body: vec![Atom {
            pred: pred.to_string(),
            args: ys,
        }],
    }
}

fn arg_equalities(a: &Atom, b: &Atom) -> Vec<LinearConstraint> {
    debug_assert_eq!(a.pred, b.pred);
    debug_assert_eq!(a.args.len(), b.args.len());
    a.args
        .iter()
        .zip(&b.args)
        .map(|(x, y)| LinearConstraint::var_eq(x.clone(), y.clone()))
        .collect()
}

/// Project a conjunction onto the variables of head and kept body, then
/// build the resulting clauses (one per disjunct in exact mode).
fn project_clause(
    head: Atom,
    body: Vec<Atom>,
    conj: Polyhedron,
    mode: ProjectionMode,
) -> Vec<Clause> {
    let keep: BTreeSet<VarId> = head
        .args
        .iter()
        .chain(body.iter().flat_map(|a| a.args.iter()))
        .cloned()
        .collect();
    let mut drop: BTreeSet<VarId> = conj.support();
    drop.extend(conj.scope.iter().cloned());
    let drop: BTreeSet<VarId> = drop.difference(&keep).cloned().collect();
    let polys = match mode {
        ProjectionMode::DarkShadow => vec![eliminate_dark(&conj, &drop)],
        ProjectionMode::Exact => eliminate_exact(&conj, &drop),
    };
    polys
        .into_iter()
        .filter(|p| sat_int(p).is_some())
        .map(|mut p| {
            p.scope = keep.clone();
            Clause {
                head: head.clone(),
                constraint: p.canonicalize(),
                body: body.clone(),
            }
        })
        .collect()
}

/// One application of the unfolding operator to the set `x`.
///
/// The result is the satisfiable facts of the program, plus every clause
/// obtained by resolving a prefix of some clause body against facts of `x`
/// and one clause of `x ∪ id`, discarding the atoms after the chosen
/// position. The chosen clause must have a non-empty body when atoms are
/// discarded after it.
pub fn tbeta_step(program: &ClpProgram, x: &[Clause], mode: ProjectionMode) -> Vec<Clause> {
    let mut fresh = 0u64;
    let mut out: Vec<Clause> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let push = |c: Clause, out: &mut Vec<Clause>, seen: &mut BTreeSet<String>| {
        if seen.insert(canonical_key(&c)) {
            out.push(c);
        }
    };

    // Satisfiable facts of the program itself.
    for c in &program.clauses {
        if c.is_fact() && sat_int(&c.constraint).is_some() {
            push(c.clone(), &mut out, &mut seen);
        }
    }

    // Index x by head predicate.
    let mut by_pred: BTreeMap<&str, Vec<&Clause>> = BTreeMap::new();
    for c in x {
        by_pred.entry(c.head.pred.as_str()).or_default().push(c);
    }
    let facts_for = |pred: &str| -> Vec<&Clause> {
        by_pred
            .get(pred)
            .map(|v| v.iter().copied().filter(|c| c.is_fact()).collect())
            .unwrap_or_default()
    };

    for r in &program.clauses {
        let m = r.body.len();
        for i in 1..=m {
            // Facts for positions 1..i-1, then any candidate at position i.
            let prefix_choices: Vec<Vec<&Clause>> = r.body[..i - 1]
                .iter()
                .map(|b| facts_for(&b.pred))
                .collect();
            if prefix_choices.iter().any(|v| v.is_empty()) {
                continue;
            }
            let mut combos: Vec<Vec<&Clause>> = vec![vec![]];
            for options in &prefix_choices {
                let mut next = Vec::new();
                for combo in &combos {
                    for opt in options {
                        let mut c = combo.clone();
                        c.push(opt);
                        next.push(c);
                    }
                }
                combos = next;
            }
            let target = &r.body[i - 1];
            let mut candidates: Vec<Clause> = by_pred
                .get(target.pred.as_str())
                .map(|cs| cs.iter().map(|c| rename_clause(c, &mut fresh)).collect())
                .unwrap_or_default();
            candidates.push(id_clause(&target.pred, target.args.len(), &mut fresh));
            for combo in combos {
                for cand in &candidates {
                    if i < m && cand.body.is_empty() {
                        continue;
                    }
                    let r2 = rename_clause(r, &mut fresh);
                    let cand2 = rename_clause(cand, &mut fresh);
                    let mut conj = r2.constraint.clone();
                    for (j, fact) in combo.iter().enumerate() {
                        let f2 = rename_clause(fact, &mut fresh);
                        conj = conj.and(&f2.constraint);
                        for eq in arg_equalities(&r2.body[j], &f2.head) {
                            conj.push(eq);
                        }
                    }
                    conj = conj.and(&cand2.constraint);
                    for eq in arg_equalities(&r2.body[i - 1], &cand2.head) {
                        conj.push(eq);
                    }
                    for clause in project_clause(r2.head.clone(), cand2.body.clone(), conj, mode)
                    {
                        push(clause, &mut out, &mut seen);
                    }
                }
            }
        }
    }
    out
}

/// Iterate the unfolding operator `max` times (stopping early at a
/// fixpoint), tagging each clause with the first iteration producing it.
pub fn unfold(program: &ClpProgram, opts: UnfoldOpts) -> Result<BinClauseSet, UnfoldTimeout> {
    let start = Instant::now();
    let mut x: Vec<Clause> = Vec::new();
    let mut tagged: Vec<BinClause> = Vec::new();
    let mut known: BTreeSet<String> = BTreeSet::new();
    for it in 1..=opts.max {
        if start.elapsed().as_millis() as u64 > opts.timeout_ms {
            return Err(UnfoldTimeout {
                iteration: it,
                elapsed_ms: start.elapsed().as_millis() as u64,
            });
        }
        let next = tbeta_step(program, &x, opts.mode);
        let mut grew = false;
        for c in &next {
            if known.insert(canonical_key(c)) {
                tagged.push(BinClause {
                    clause: c.clone(),
                    iteration: it,
                });
                grew = true;
            }
        }
        x = next;
        if !grew {
            break;
        }
    }
    tagged.sort_by(|a, b| {
        a.iteration
            .cmp(&b.iteration)
            .then_with(|| canonical_key(&a.clause).cmp(&canonical_key(&b.clause)))
    });
    Ok(BinClauseSet { clauses: tagged })
}

/// Text listing with per-iteration annotations.
pub fn emit_binclauses(set: &BinClauseSet) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let mut current = 0;
    for b in &set.clauses {
        if b.iteration != current {
            current = b.iteration;
            let _ = writeln!(out, "% iteration: {current}");
        }
        let _ = writeln!(out, "{}", crate::clpgen::emit_clause(&b.clause));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clpgen::{alpha_equivalent, parse_clp};

    #[test]
    fn id_clause_links_arguments_pairwise() {
        let mut fresh = 0;
        let c = id_clause("sum", 2, &mut fresh);
        assert_eq!(c.head.pred, "sum");
        assert_eq!(c.body[0].pred, "sum");
        assert_eq!(c.constraint.constraints.len(), 2);
        let z = id_clause("p", 0, &mut fresh);
        assert!(z.constraint.constraints.is_empty());
        assert_eq!(z.body.len(), 1);
    }

    #[test]
    fn facts_only_program_unfolds_to_its_facts() {
        let p = parse_clp("p(t0) :- t0 <= 3.\nq(t0) :- t0 = 1.\n").unwrap();
        let set = unfold(&p, UnfoldOpts::default()).unwrap();
        assert_eq!(set.clauses.len(), 2);
        assert!(set.clauses.iter().all(|b| b.iteration == 1));
    }

    #[test]
    fn unsatisfiable_clauses_are_filtered() {
        let p = parse_clp("p(t0) :- t0 <= 0, t0 >= 1.\nq(t0) :- t0 = 1.\n").unwrap();
        let set = unfold(&p, UnfoldOpts::default()).unwrap();
        assert_eq!(set.clauses.len(), 1);
        assert_eq!(set.clauses[0].clause.head.pred, "q");
    }

    #[test]
    fn two_step_loop_compresses_into_a_recursive_clause() {
        // p -> q -> p decrementing; the compressed p-loop steps by 2.
        let p = parse_clp("p(t0) :- t0 - 1 = t1, q(t1).\nq(t0) :- t0 - 1 = t1, p(t1).\n").unwrap();
        let set = unfold(&p, UnfoldOpts::default()).unwrap();
        let want = crate::clpgen::parse_clause("p(t0) :- t0 - 2 = t1, p(t1).").unwrap();
        assert!(
            set.recursive()
                .any(|b| alpha_equivalent(&b.clause, &want)),
            "{}",
            emit_binclauses(&set)
        );
    }
}
