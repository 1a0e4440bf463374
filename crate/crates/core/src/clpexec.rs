//! A miniature resolution engine for clause programs, used to replay
//! derivations: witnesses are checked to actually reach their loop, and
//! binary clauses are spot-checked against concrete derivation prefixes.
//! Leftmost selection, clauses tried in program order, constraint store
//! checked for integer satisfiability at every step.

use crate::clpgen::{Atom, Clause, ClpProgram};
use crate::polyhedra::{sat_int, LinearConstraint, Polyhedron, VarId};
use num_bigint::BigInt;
use std::collections::{BTreeMap, BTreeSet};

/// A query atom with ground or free arguments.
#[derive(Debug, Clone)]
pub struct QueryAtom {
    pub pred: String,
    pub args: Vec<Option<BigInt>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exploration {
    /// Every derivation ended (success or failure) within the budget.
    Exhausted,
    /// The budget ran out with derivations still open.
    BudgetHit,
}

struct Engine<'p> {
    program: &'p ClpProgram,
    fresh: u64,
    steps: u64,
    budget: u64,
}

#[derive(Clone)]
struct Node {
    goal: Vec<Atom>,
    store: Polyhedron,
}

fn rename_clause(c: &Clause, fresh: &mut u64) -> Clause {
    let mut vars: BTreeSet<VarId> = c.head.args.iter().cloned().collect();
    for a in &c.body {
        vars.extend(a.args.iter().cloned());
    }
    vars.extend(c.constraint.support());
    vars.extend(c.constraint.scope.iter().cloned());
    let map: BTreeMap<VarId, VarId> = vars
        .into_iter()
        .map(|v| {
            let nv = VarId::Fresh(*fresh);
            *fresh += 1;
            (v, nv)
        })
        .collect();
    let ren = |a: &Atom| Atom {
        pred: a.pred.clone(),
        args: a.args.iter().map(|v| map[v].clone()).collect(),
    };
    Clause {
        head: ren(&c.head),
        constraint: c.constraint.rename(&map),
        body: c.body.iter().map(ren).collect(),
    }
}

impl<'p> Engine<'p> {
    fn initial(&mut self, query: &QueryAtom) -> Node {
        let args: Vec<VarId> = (0..query.args.len())
            .map(|_| {
                let v = VarId::Fresh(self.fresh);
                self.fresh += 1;
                v
            })
            .collect();
        let mut store = Polyhedron::top(args.iter().cloned());
        for (v, a) in args.iter().zip(&query.args) {
            if let Some(n) = a {
                store.push(LinearConstraint::var_eq_const(v.clone(), n.clone()));
            }
        }
        Node {
            goal: vec![Atom {
                pred: query.pred.clone(),
                args,
            }],
            store,
        }
    }

    /// Expand the leftmost atom; returns successor nodes in clause order.
    /// The store is projected onto the live goal variables after each step
    /// so it cannot grow with the derivation length; the exact projection
    /// forks a node per disjunct in the rare inexact cases.
    fn expand(&mut self, node: &Node) -> Vec<Node> {
        let Some(atom) = node.goal.first().cloned() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for clause in self.program.clauses.iter() {
            if clause.head.pred != atom.pred || clause.head.args.len() != atom.args.len() {
                continue;
            }
            let c = rename_clause(clause, &mut self.fresh);
            let mut store = node.store.and(&c.constraint);
            for (x, y) in atom.args.iter().zip(&c.head.args) {
                store.push(LinearConstraint::var_eq(x.clone(), y.clone()));
            }
            self.steps += 1;
            let mut goal = c.body.clone();
            goal.extend(node.goal[1..].iter().cloned());
            let live: BTreeSet<VarId> = goal.iter().flat_map(|a| a.args.iter().cloned()).collect();
            let mut drop: BTreeSet<VarId> = store.support();
            drop.extend(store.scope.iter().cloned());
            let drop: BTreeSet<VarId> = drop.difference(&live).cloned().collect();
            for mut projected in crate::polyhedra::eliminate_exact(&store, &drop) {
                if sat_int(&projected).is_none() {
                    continue;
                }
                projected.scope = live.clone();
                out.push(Node {
                    goal: goal.clone(),
                    store: projected,
                });
            }
        }
        out
    }
}

/// Explore every derivation of the query up to `budget` resolution steps.
pub fn explore(program: &ClpProgram, query: &QueryAtom, budget: u64) -> Exploration {
    let mut engine = Engine {
        program,
        fresh: 10_000_000,
        steps: 0,
        budget,
    };
    let root = engine.initial(query);
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if engine.steps > engine.budget {
            return Exploration::BudgetHit;
        }
        if node.goal.is_empty() {
            continue; // successful derivation; finite
        }
        stack.extend(engine.expand(&node));
    }
    Exploration::Exhausted
}

/// Search for a derivation prefix whose leftmost atom is `target` with
/// arguments satisfying `accept` (a polyhedron over `Fresh(0..arity)`,
/// renamed onto the atom's arguments).
pub fn reaches(
    program: &ClpProgram,
    query: &QueryAtom,
    target: &str,
    accept: &Polyhedron,
    budget: u64,
) -> bool {
    let mut engine = Engine {
        program,
        fresh: 10_000_000,
        steps: 0,
        budget,
    };
    let root = engine.initial(query);
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if engine.steps > engine.budget {
            return false;
        }
        if let Some(atom) = node.goal.first() {
            if atom.pred == target {
                let map: BTreeMap<VarId, VarId> = (0..atom.args.len())
                    .map(|k| (VarId::Fresh(k as u64), atom.args[k].clone()))
                    .collect();
                let test = node.store.and(&accept.rename(&map));
                engine.steps += 1;
                if sat_int(&test).is_some() {
                    return true;
                }
            }
        }
        stack.extend(engine.expand(&node));
    }
    false
}
