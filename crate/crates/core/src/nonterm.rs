//! Recurrent-set criteria over compressed loops, reachability of those
//! loops from an entry predicate, witness extraction and the end-to-end
//! verdict.
//!
//! A recursive binary clause `p(x~) :- c, p(y~)` admits a recurrent set
//! `e` (the projection of `c` onto `x~`) when either every output of the
//! loop stays in `e` (universal criterion) or every point of `e` has some
//! output back in `e` (existential criterion). Either way, any entry of
//! the loop inside `e` starts an infinite derivation; a reach clause from
//! the entry predicate with an output in `e` makes it reachable.

use crate::binunf::{unfold, BinClause, UnfoldOpts};
use crate::bytecode::{Program, ProgramFrames, SlotTy};
use crate::clpgen::{
    compile_program, emit_clause, Clause, CompileError, CompileOptions,
};
use crate::interpreter::{build_state, run_bounded, RunOutcome};
use crate::polyhedra::{
    eliminate_dark, entails_any, sample_model, sat_check_count, sat_int, Assignment,
    LinearConstraint, Polyhedron, ProjectionMode, VarId,
};
use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;
use thiserror::Error;

/// A satisfiable projection of a loop constraint onto the loop head.
/// `e`'s variables are `Fresh(0..arity)`, displayed as `x0..`.
#[derive(Debug, Clone)]
pub struct RecurrentSet {
    pub pred: String,
    pub e: Polyhedron,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionMode {
    Universal,
    Existential,
}

/// A reachable recurrent loop with concrete entry values.
#[derive(Debug, Clone)]
pub struct Witness {
    pub loop_clause: Clause,
    pub loop_iteration: u32,
    /// `None` when the loop head is itself the entry predicate.
    pub reach_clause: Option<Clause>,
    pub recurrent_set: RecurrentSet,
    /// Values for the entry predicate's arguments, positionally.
    pub entry_values: Vec<BigInt>,
    pub mode: CriterionMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownReason {
    MaxUnfoldExhausted,
    NoLoopFound,
    CriteriaFailed,
    Timeout,
}

#[derive(Debug)]
pub enum Verdict {
    NonTerminating(Vec<Witness>),
    Unknown(UnknownReason),
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AnalysisStats {
    pub clauses: usize,
    pub bin_clauses: usize,
    pub unfold_iterations: u32,
    pub sat_checks: u64,
    pub wall_ms: u64,
}

#[derive(Debug)]
pub struct AnalysisResult {
    pub entry: String,
    pub entry_pred: String,
    pub verdict: Verdict,
    pub stats: AnalysisStats,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOpts {
    pub max_unfold: u32,
    pub timeout_ms: u64,
    pub mode: ProjectionMode,
    pub seed: u64,
    pub all_witnesses: bool,
    pub pl: crate::abstraction::PathLengthOptions,
}

impl Default for AnalyzeOpts {
    fn default() -> Self {
        AnalyzeOpts {
            max_unfold: 10,
            timeout_ms: 20_000,
            mode: ProjectionMode::DarkShadow,
            seed: 0,
            all_witnesses: false,
            pl: Default::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("method `{0}` not found (or ambiguous)")]
    NoSuchMethod(String),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// A loop clause rewritten so the head arguments are `Fresh(0..n)` and the
/// body arguments `Fresh(n..n+n)`, all distinct, with linking equalities
/// folded into the constraint.
#[derive(Debug, Clone)]
pub struct NormalizedLoop {
    pub pred: String,
    pub xs: Vec<VarId>,
    pub ys: Vec<VarId>,
    pub constraint: Polyhedron,
}

/// Rewrite a binary clause into positional form. Works for any binary
/// clause; for recursive ones `xs` and `ys` have the same length.
pub fn normalize_binary(r: &Clause) -> NormalizedLoop {
    assert_eq!(r.body.len(), 1, "normalize_binary expects a binary clause");
    // Move every existing variable out of the way.
    let mut vars: BTreeSet<VarId> = r.head.args.iter().cloned().collect();
    vars.extend(r.body[0].args.iter().cloned());
    vars.extend(r.constraint.support());
    let map: BTreeMap<VarId, VarId> = vars
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, VarId::Fresh(1_000 + i as u64)))
        .collect();
    let mut constraint = r.constraint.rename(&map);
    let n = r.head.args.len();
    let xs: Vec<VarId> = (0..n).map(|k| VarId::Fresh(k as u64)).collect();
    let ys: Vec<VarId> = (0..r.body[0].args.len())
        .map(|k| VarId::Fresh((n + k) as u64))
        .collect();
    for (x, old) in xs.iter().zip(&r.head.args) {
        constraint.push(LinearConstraint::var_eq(x.clone(), map[old].clone()));
    }
    for (y, old) in ys.iter().zip(&r.body[0].args) {
        constraint.push(LinearConstraint::var_eq(y.clone(), map[old].clone()));
    }
    constraint.scope = xs.iter().chain(ys.iter()).cloned().collect();
    NormalizedLoop {
        pred: r.head.pred.clone(),
        xs,
        ys,
        constraint,
    }
}

/// The projection of a recursive clause's constraint onto its head
/// arguments; `None` when the projection is unsatisfiable.
pub fn recurrent_set(r: &Clause) -> Option<RecurrentSet> {
    assert!(r.is_recursive(), "recurrent_set expects a recursive clause");
    let norm = normalize_binary(r);
    let keep: BTreeSet<VarId> = norm.xs.iter().cloned().collect();
    let mut drop: BTreeSet<VarId> = norm.constraint.support();
    drop.extend(norm.constraint.scope.iter().cloned());
    let drop: BTreeSet<VarId> = drop.difference(&keep).cloned().collect();
    let mut e = eliminate_dark(&norm.constraint, &drop);
    e.scope = keep;
    let e = e.canonicalize();
    sat_int(&e)?;
    Some(RecurrentSet {
        pred: norm.pred,
        e,
    })
}

fn substitute_ys(e: &Polyhedron, xs: &[VarId], ys: &[VarId]) -> Polyhedron {
    let map: BTreeMap<VarId, VarId> = xs.iter().cloned().zip(ys.iter().cloned()).collect();
    e.rename(&map)
}

/// Universal criterion: every output of the loop from a point of `e`
/// lies in `e` again.
pub fn check_universal(r: &Clause, e: &RecurrentSet) -> bool {
    let norm = normalize_binary(r);
    let e_y = substitute_ys(&e.e, &norm.xs, &norm.ys);
    for gamma in &e_y.constraints {
        let Some(g) = gamma.clone().normalized() else {
            continue;
        };
        let negations: Vec<LinearConstraint> = match g.rel {
            crate::polyhedra::Rel::Le => vec![LinearConstraint::new(
                g.coeffs.iter().map(|(v, c)| (v.clone(), -c)).collect(),
                crate::polyhedra::Rel::Le,
                -&g.bound - 1,
            )],
            crate::polyhedra::Rel::Eq => vec![
                LinearConstraint::new(
                    g.coeffs.iter().map(|(v, c)| (v.clone(), c.clone())).collect(),
                    crate::polyhedra::Rel::Le,
                    &g.bound - 1,
                ),
                LinearConstraint::new(
                    g.coeffs.iter().map(|(v, c)| (v.clone(), -c)).collect(),
                    crate::polyhedra::Rel::Le,
                    -&g.bound - 1,
                ),
            ],
        };
        for neg in negations {
            let mut sys = norm.constraint.and(&e.e);
            sys.push(neg);
            if sat_int(&sys).is_some() {
                return false;
            }
        }
    }
    true
}

/// Existential criterion: every point of `e` has some loop output back in
/// `e`. The successor quantifier is computed with the exact projection so
/// the check matches its formula precisely; each exact disjunct enters an
/// entailment-into-union test.
pub fn check_existential(r: &Clause, e: &RecurrentSet) -> bool {
    let norm = normalize_binary(r);
    let e_y = substitute_ys(&e.e, &norm.xs, &norm.ys);
    let sys = norm.constraint.and(&e_y);
    let keep: BTreeSet<VarId> = norm.xs.iter().cloned().collect();
    let mut drop: BTreeSet<VarId> = sys.support();
    drop.extend(sys.scope.iter().cloned());
    let drop: BTreeSet<VarId> = drop.difference(&keep).cloned().collect();
    let disjuncts: Vec<Polyhedron> = crate::polyhedra::eliminate_exact(&sys, &drop)
        .into_iter()
        .map(|mut d| {
            d.scope = keep.clone();
            d
        })
        .collect();
    entails_any(&e.e, &disjuncts)
}

/// Reachability: a model of `c' ∧ e(y~')` restricted to the head
/// arguments of the reach clause; `extra` carries entry realizability
/// side conditions over the head argument positions.
pub fn check_reachable_with(
    rp: &Clause,
    e: &RecurrentSet,
    extra: &Polyhedron,
    seed: u64,
) -> Option<Vec<BigInt>> {
    assert_eq!(rp.body[0].pred, e.pred, "reach clause must call the loop");
    let norm = normalize_binary(rp);
    // e is over Fresh(0..arity); the body arguments are ys here.
    let e_on_body = {
        let map: BTreeMap<VarId, VarId> = (0..norm.ys.len())
            .map(|k| (VarId::Fresh(k as u64), norm.ys[k].clone()))
            .collect();
        e.e.rename(&map)
    };
    let mut sys = norm.constraint.and(&e_on_body);
    sys = sys.and(extra);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = sample_model(&sys, &norm.xs, &mut rng, -8, 8)?;
    Some(
        norm.xs
            .iter()
            .map(|x| model.get(x).cloned().unwrap_or_default())
            .collect(),
    )
}

/// `check_reachable_with` without extra side conditions.
pub fn check_reachable(rp: &Clause, e: &RecurrentSet, seed: u64) -> Option<Vec<BigInt>> {
    check_reachable_with(rp, e, &Polyhedron::top([]), seed)
}

/// Entry realizability over positional variables: class-typed parameter
/// slots need non-negative lengths, null-typed ones zero.
fn entry_realizability(entry_locals: &[SlotTy]) -> Polyhedron {
    let mut p = Polyhedron::top([]);
    for (k, t) in entry_locals.iter().enumerate() {
        match t {
            SlotTy::Int => {}
            SlotTy::Class(_) => p.push(LinearConstraint::var_ge_const(VarId::Fresh(k as u64), 0)),
            SlotTy::Null => p.push(LinearConstraint::var_eq_const(VarId::Fresh(k as u64), 0)),
        }
    }
    p
}

/// Run the whole pipeline for one entry method.
pub fn analyze(
    program: &Program,
    entry: &str,
    opts: &AnalyzeOpts,
) -> Result<AnalysisResult, AnalyzeError> {
    let started = Instant::now();
    let sat0 = sat_check_count();
    let method = program
        .resolve_by_name(entry)
        .ok_or_else(|| AnalyzeError::NoSuchMethod(entry.to_string()))?;
    let entry_pred = method.entry.clone();
    let entry_locals = method.entry_locals();

    let clp = compile_program(
        program,
        CompileOptions {
            mode: opts.mode,
            pl: opts.pl.clone(),
        },
    )?;
    let clause_count = clp.clauses.len();

    let mut stats = AnalysisStats {
        clauses: clause_count,
        ..Default::default()
    };
    let finish = |verdict: Verdict, mut stats: AnalysisStats| {
        stats.sat_checks = sat_check_count() - sat0;
        stats.wall_ms = started.elapsed().as_millis() as u64;
        Ok(AnalysisResult {
            entry: entry.to_string(),
            entry_pred: entry_pred.clone(),
            verdict,
            stats,
        })
    };

    let set = match unfold(
        &clp,
        UnfoldOpts {
            mode: opts.mode,
            max: opts.max_unfold,
            timeout_ms: opts.timeout_ms,
        },
    ) {
        Ok(s) => s,
        Err(_) => return finish(Verdict::Unknown(UnknownReason::Timeout), stats),
    };
    stats.bin_clauses = set.clauses.len();
    stats.unfold_iterations = set.clauses.iter().map(|b| b.iteration).max().unwrap_or(0);

    let deadline_hit = || started.elapsed().as_millis() as u64 > opts.timeout_ms;
    let realizability = entry_realizability(&entry_locals);

    // A recursion compresses into a loop at every block of its cycle;
    // the canonical cut is the callee's entry predicate, so loops headed
    // by a method entry are scanned first, then (iteration, form) order.
    let entry_preds: BTreeSet<&String> = clp.entries.values().collect();
    let mut loops: Vec<&BinClause> = set.recursive().collect();
    loops.sort_by_key(|b| {
        (
            !entry_preds.contains(&b.clause.head.pred),
            b.iteration,
            crate::clpgen::canonical_key(&b.clause),
        )
    });
    if loops.is_empty() {
        return finish(Verdict::Unknown(UnknownReason::NoLoopFound), stats);
    }

    let mut witnesses: Vec<Witness> = Vec::new();
    let mut any_criterion = false;
    for lb in &loops {
        if deadline_hit() {
            return finish(Verdict::Unknown(UnknownReason::Timeout), stats);
        }
        let r = &lb.clause;
        let Some(e) = recurrent_set(r) else {
            continue;
        };
        let mode = if check_universal(r, &e) {
            CriterionMode::Universal
        } else if check_existential(r, &e) {
            CriterionMode::Existential
        } else {
            continue;
        };
        any_criterion = true;

        if r.head.pred == entry_pred {
            // The loop head is the entry itself; entry values are a model
            // of e under the realizability side conditions.
            let sys = e.e.and(&realizability);
            let order: Vec<VarId> = (0..r.head.args.len())
                .map(|k| VarId::Fresh(k as u64))
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            if let Some(model) = sample_model(&sys, &order, &mut rng, -8, 8) {
                let entry_values = order
                    .iter()
                    .map(|v| model.get(v).cloned().unwrap_or_default())
                    .collect();
                witnesses.push(Witness {
                    loop_clause: r.clone(),
                    loop_iteration: lb.iteration,
                    reach_clause: None,
                    recurrent_set: e.clone(),
                    entry_values,
                    mode,
                });
                if !opts.all_witnesses {
                    break;
                }
            }
            continue;
        }

        for rb in &set.clauses {
            let rp = &rb.clause;
            if rp.body.len() != 1
                || rp.head.pred != entry_pred
                || rp.body[0].pred != r.head.pred
                || rp.body[0].args.len() != r.head.args.len()
            {
                continue;
            }
            if let Some(entry_values) = check_reachable_with(rp, &e, &realizability, opts.seed) {
                witnesses.push(Witness {
                    loop_clause: r.clone(),
                    loop_iteration: lb.iteration,
                    reach_clause: Some(rp.clone()),
                    recurrent_set: e.clone(),
                    entry_values,
                    mode,
                });
                if !opts.all_witnesses {
                    break;
                }
            }
        }
        if !witnesses.is_empty() && !opts.all_witnesses {
            break;
        }
    }

    if !witnesses.is_empty() {
        return finish(Verdict::NonTerminating(witnesses), stats);
    }
    let reason = if any_criterion {
        // A loop admits a recurrent set but no reach clause was found at
        // this unfolding depth.
        UnknownReason::MaxUnfoldExhausted
    } else {
        UnknownReason::CriteriaFailed
    };
    finish(Verdict::Unknown(reason), stats)
}

/// Corroborate a verdict: build the entry state from the witness values
/// and confirm the bounded interpreter runs out of budget.
pub fn corroborate(
    program: &Program,
    entry: &str,
    witness: &Witness,
    budget: u64,
) -> Result<bool, String> {
    let method = program
        .resolve_by_name(entry)
        .ok_or_else(|| format!("method {entry} not found"))?;
    let frames = ProgramFrames::infer(program).map_err(|e| e.to_string())?;
    let frame = frames
        .of_method(method)
        .entry_frame(&method.entry)
        .ok_or("entry frame missing")?
        .clone();
    let mut rho = Assignment::new();
    for (k, _) in frame.locals.iter().enumerate() {
        let v = witness
            .entry_values
            .get(k)
            .ok_or("witness entry values too short")?;
        rho.insert(VarId::InL(k as u32), v.clone());
    }
    let state = build_state(&rho, &frame, &program.classes).map_err(|e| e.to_string())?;
    match run_bounded(program, &method.entry, state, budget).map_err(|e| e.to_string())? {
        RunOutcome::BudgetExceeded(_) => Ok(true),
        other => Err(format!("expected budget exhaustion, got {other:?}")),
    }
}

/// Render a polyhedron over positional variables with `x<k>` names.
pub fn render_positional(p: &Polyhedron) -> Vec<String> {
    let map: BTreeMap<VarId, VarId> = (0..64)
        .map(|k| (VarId::Fresh(k), VarId::RetIn(format!("__x{k}"))))
        .collect();
    p.rename(&map)
        .constraints
        .iter()
        .map(|c| c.to_string().replace("rin___x", "x"))
        .collect()
}

/// JSON form of a verdict per the documented schema.
pub fn verdict_json(result: &AnalysisResult) -> serde_json::Value {
    let witnesses: Vec<serde_json::Value> = match &result.verdict {
        Verdict::NonTerminating(ws) => ws
            .iter()
            .map(|w| {
                serde_json::json!({
                    "loop_clause": emit_clause(&w.loop_clause),
                    "loop_iteration": w.loop_iteration,
                    "reach_clause": w.reach_clause.as_ref().map(emit_clause),
                    "recurrent_set": {
                        "predicate": w.recurrent_set.pred,
                        "constraints": render_positional(&w.recurrent_set.e),
                    },
                    "entry_values": w.entry_values.iter().enumerate()
                        .map(|(k, v)| (format!("x{k}"), v.to_string()))
                        .collect::<BTreeMap<String, String>>(),
                    "mode": w.mode,
                })
            })
            .collect(),
        Verdict::Unknown(_) => vec![],
    };
    serde_json::json!({
        "verdict": match &result.verdict {
            Verdict::NonTerminating(_) => "NONTERMINATING",
            Verdict::Unknown(_) => "UNKNOWN",
        },
        "reason": match &result.verdict {
            Verdict::NonTerminating(_) => serde_json::Value::Null,
            Verdict::Unknown(r) => serde_json::to_value(r).unwrap(),
        },
        "entry": result.entry,
        "entry_predicate": result.entry_pred,
        "witnesses": witnesses,
        "stats": serde_json::to_value(&result.stats).unwrap(),
    })
}
