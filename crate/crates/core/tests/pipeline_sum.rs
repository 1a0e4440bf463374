//! End-to-end tests on the sum fixture: golden unfolding (the six
//! reference binary clauses at their documented iteration indices), the
//! non-termination verdict with its recurrent set, witness corroboration
//! by the bounded interpreter, and derivation replay.

use nonterm_core::binunf::{unfold, UnfoldOpts};
use nonterm_core::bytecode::parse_program;
use nonterm_core::clpexec::{explore, reaches, Exploration, QueryAtom};
use nonterm_core::clpgen::{compile_program, parse_clause, CompileOptions};
use nonterm_core::interpreter::{build_state, run_bounded, RunOutcome};
use nonterm_core::nonterm::{
    analyze, corroborate, AnalyzeOpts, CriterionMode, UnknownReason, Verdict,
};
use nonterm_core::polyhedra::{Assignment, Polyhedron, VarId};
use num_bigint::BigInt;
use std::fs;
use std::path::PathBuf;

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name);
    fs::read_to_string(&p).unwrap_or_else(|e| panic!("read {}: {e}", p.display()))
}

/// The six reference unfoldings with the iteration that first produces
/// each of them.
pub const SUM_UNFOLDINGS: [(&str, u32); 6] = [
    ("b5(il0, is0, is1, rin_b5) :- sum(is1, os1).", 1),
    ("b7(il0, is0) :- sum(is0, os0).", 1),
    ("b4(il0, rin_b4) :- il0 - 1 = is1, sum(is1, os1).", 2),
    ("main(il0) :- -1 = is0, sum(is0, os0).", 2),
    (
        "b2(il0, is0, rin_b2) :- il0 - 1 = is1, is0 <= -1, sum(is1, os1).",
        3,
    ),
    (
        "sum(il0, rin_sum) :- il0 <= -1, il0 - 1 = is1, sum(is1, os1).",
        4,
    ),
];

#[test]
fn unfolding_contains_the_six_reference_clauses_at_their_iterations() {
    let p = parse_program(&fixture("sum.jbc")).unwrap();
    let clp = compile_program(&p, CompileOptions::default()).unwrap();
    let set = unfold(
        &clp,
        UnfoldOpts {
            max: 4,
            ..Default::default()
        },
    )
    .unwrap();
    for (i, (src, want_iter)) in SUM_UNFOLDINGS.iter().enumerate() {
        let want = parse_clause(src).unwrap();
        let found = set
            .find_alpha(&want)
            .unwrap_or_else(|| panic!("u{} missing: {src}", i + 1));
        assert_eq!(
            found.iteration,
            *want_iter,
            "u{} found at iteration {} instead of {want_iter}",
            i + 1,
            found.iteration
        );
    }
}

#[test]
fn unfolding_is_monotone_in_the_iteration_bound() {
    let p = parse_program(&fixture("sum.jbc")).unwrap();
    let clp = compile_program(&p, CompileOptions::default()).unwrap();
    let small = unfold(
        &clp,
        UnfoldOpts {
            max: 3,
            ..Default::default()
        },
    )
    .unwrap();
    let large = unfold(
        &clp,
        UnfoldOpts {
            max: 4,
            ..Default::default()
        },
    )
    .unwrap();
    for b in &small.clauses {
        let hit = large.find_alpha(&b.clause).expect("larger bound keeps clause");
        assert_eq!(hit.iteration, b.iteration);
    }
    assert!(large.clauses.len() >= small.clauses.len());
}

#[test]
fn analyze_reports_nontermination_from_main() {
    let p = parse_program(&fixture("sum.jbc")).unwrap();
    let result = analyze(&p, "Sum.main", &AnalyzeOpts::default()).unwrap();
    let Verdict::NonTerminating(witnesses) = &result.verdict else {
        panic!("expected NONTERMINATING, got {:?}", result.verdict);
    };
    let w = &witnesses[0];
    // The recurrent set is {x0 <= -1} on the sum predicate.
    assert_eq!(w.recurrent_set.pred, "sum");
    let want = Polyhedron::from_constraints(
        vec![nonterm_core::polyhedra::parse_constraint("f0 <= -1").unwrap()],
        [VarId::Fresh(0)],
    )
    .canonicalize();
    assert_eq!(w.recurrent_set.e.constraints, want.constraints);
    assert_eq!(w.mode, CriterionMode::Universal);
    // Reached from the main predicate.
    let reach = w.reach_clause.as_ref().expect("reach clause");
    assert_eq!(reach.head.pred, "main");
    assert_eq!(reach.body[0].pred, "sum");
    // The witness survives the concrete interpreter.
    assert!(corroborate(&p, "Sum.main", w, 10_000).unwrap());
}

#[test]
fn analyze_from_sum_finds_the_direct_loop() {
    let p = parse_program(&fixture("sum.jbc")).unwrap();
    let result = analyze(&p, "Sum.sum", &AnalyzeOpts::default()).unwrap();
    let Verdict::NonTerminating(ws) = &result.verdict else {
        panic!("expected NONTERMINATING, got {:?}", result.verdict);
    };
    let w = &ws[0];
    assert!(w.reach_clause.is_none(), "loop head is the entry");
    assert!(w.entry_values[0] <= BigInt::from(-1));
    assert!(corroborate(&p, "Sum.sum", w, 10_000).unwrap());
}

#[test]
fn interpreter_behaviour_matches_the_verdict() {
    let p = parse_program(&fixture("sum.jbc")).unwrap();
    // main with a null argument diverges (sum(-1) recurses forever)
    let frames = nonterm_core::bytecode::ProgramFrames::infer(&p).unwrap();
    let main = p.resolve_by_name("Sum.main").unwrap();
    let frame = frames.of_method(main).entry_frame("main").unwrap().clone();
    let rho: Assignment = [(VarId::InL(0), BigInt::from(0))].into_iter().collect();
    let st = build_state(&rho, &frame, &p.classes).unwrap();
    match run_bounded(&p, "main", st, 10_000).unwrap() {
        RunOutcome::BudgetExceeded(_) => {}
        other => panic!("expected budget exhaustion, got {other:?}"),
    }
    // sum(0) halts with return length 0; sum(3) halts with 6 = 3+2+1+0
    let sum = p.resolve_by_name("Sum.sum").unwrap();
    let sframe = frames.of_method(sum).entry_frame("sum").unwrap().clone();
    for (input, want) in [(0i64, 0i64), (3, 6)] {
        let rho: Assignment = [(VarId::InL(0), BigInt::from(input))].into_iter().collect();
        let st = build_state(&rho, &sframe, &p.classes).unwrap();
        match run_bounded(&p, "sum", st, 10_000).unwrap() {
            RunOutcome::Halted(fs) => {
                assert_eq!(fs.len(), 1);
                assert_eq!(
                    fs[0].stack,
                    vec![nonterm_core::interpreter::Value::Int(BigInt::from(want))]
                );
            }
            other => panic!("sum({input}): expected halt, got {other:?}"),
        }
    }
}

#[test]
fn witness_values_replay_to_the_loop_in_the_clause_program() {
    let p = parse_program(&fixture("sum.jbc")).unwrap();
    let clp = compile_program(&p, CompileOptions::default()).unwrap();
    let result = analyze(&p, "Sum.main", &AnalyzeOpts::default()).unwrap();
    let Verdict::NonTerminating(ws) = &result.verdict else {
        panic!("expected NONTERMINATING");
    };
    let w = &ws[0];
    // From main(v) the derivation must reach sum(args) with args in e.
    let query = QueryAtom {
        pred: "main".into(),
        args: w.entry_values.iter().map(|v| Some(v.clone())).collect(),
    };
    assert!(reaches(&clp, &query, "sum", &w.recurrent_set.e, 5_000));
}

#[test]
fn call_free_program_agrees_with_its_clause_image_on_termination() {
    // Same iterative countdown, checked both concretely and symbolically.
    let src = r#"
method static T.count(int):void entry count {
  block count { load 0 }                              -> step done
  block step  { ifgt ; load 0 ; const -1 ; add ; store 0 } -> count
  block done  { ifle }                                ->
}
"#;
    let p = parse_program(src).unwrap();
    let clp = compile_program(&p, CompileOptions::default()).unwrap();
    let frames = nonterm_core::bytecode::ProgramFrames::infer(&p).unwrap();
    let m = p.resolve_by_name("T.count").unwrap();
    let frame = frames.of_method(m).entry_frame("count").unwrap().clone();
    for n in [-2i64, 0, 1, 5] {
        let rho: Assignment = [(VarId::InL(0), BigInt::from(n))].into_iter().collect();
        let st = build_state(&rho, &frame, &p.classes).unwrap();
        let concrete_halts = !matches!(
            run_bounded(&p, "count", st, 10_000).unwrap(),
            RunOutcome::BudgetExceeded(_)
        );
        let query = QueryAtom {
            pred: "count".into(),
            args: vec![Some(BigInt::from(n))],
        };
        let symbolic_halts = explore(&clp, &query, 10_000) == Exploration::Exhausted;
        assert_eq!(concrete_halts, symbolic_halts, "disagreement at n = {n}");
        assert!(concrete_halts);
    }
}

#[test]
fn max_unfold_one_keeps_only_facts_and_first_unfoldings() {
    let p = parse_program(&fixture("sum.jbc")).unwrap();
    let result = analyze(
        &p,
        "Sum.main",
        &AnalyzeOpts {
            max_unfold: 1,
            ..Default::default()
        },
    )
    .unwrap();
    // One iteration cannot compress the recursion into a loop clause.
    match &result.verdict {
        Verdict::Unknown(UnknownReason::NoLoopFound) => {}
        other => panic!("expected UNKNOWN(no-loop-found), got {other:?}"),
    }
}

#[test]
fn exact_projection_mode_reaches_the_same_verdict() {
    let p = parse_program(&fixture("sum.jbc")).unwrap();
    // On unit-coefficient constraints the exact projection coincides with
    // the dark shadow, so both the clause image and the verdict agree.
    let dark = compile_program(&p, CompileOptions::default()).unwrap();
    let exact = compile_program(
        &p,
        CompileOptions {
            mode: nonterm_core::polyhedra::ProjectionMode::Exact,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(dark.clauses.len(), exact.clauses.len());
    for (a, b) in dark.clauses.iter().zip(&exact.clauses) {
        assert!(nonterm_core::clpgen::alpha_equivalent(a, b));
    }
    let result = analyze(
        &p,
        "Sum.main",
        &AnalyzeOpts {
            mode: nonterm_core::polyhedra::ProjectionMode::Exact,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(matches!(result.verdict, Verdict::NonTerminating(_)));
}
