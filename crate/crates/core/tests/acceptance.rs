//! Acceptance suite: one test per shipped acceptance criterion, each
//! printing a `[PASS]`/`[FAIL]` line (run with `-- --nocapture` to see
//! them). Tolerances, trial counts and time budgets are pinned here.

mod common;

use common::{for_each_point, random_instance, FastPoly, BOX_HI, BOX_LO};
use nonterm_core::abstraction::{exactness_check, exactness_check_pair, EXACT_FAMILIES};
use nonterm_core::binunf::{unfold, UnfoldOpts};
use nonterm_core::bytecode::{desugar_ifne, parse_program, validate};
use nonterm_core::clpgen::{
    alpha_equivalent, compile_program, parse_clause, CompileOptions,
};
use nonterm_core::nonterm::{
    analyze, check_existential, check_universal, corroborate, recurrent_set, AnalyzeOpts,
    Verdict,
};
use nonterm_core::polyhedra::{
    eliminate_dark, eliminate_exact, entails, sat_int, LinearConstraint, Polyhedron, Rel, VarId,
};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

fn fixture_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

fn load(rel: &str) -> (nonterm_core::bytecode::Program, String) {
    let text = fs::read_to_string(fixture_path(rel)).expect("fixture");
    let entry = text
        .lines()
        .find_map(|l| l.trim().strip_prefix("# entry:").map(|s| s.trim().to_string()))
        .expect("entry directive");
    let p = parse_program(&text).expect("parse");
    let p = desugar_ifne(&p).expect("desugar");
    assert!(validate(&p).is_clean());
    (p, entry)
}

/// Run a criterion body, print its pass/fail line, propagate failures.
fn criterion(number: u32, label: &str, deadline: Duration, body: impl FnOnce() + std::panic::UnwindSafe) {
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(body);
    let elapsed = start.elapsed();
    let within = elapsed <= deadline;
    match (&outcome, within) {
        (Ok(()), true) => println!("[PASS] criterion {number}: {label} ({elapsed:.2?})"),
        (Ok(()), false) => println!(
            "[FAIL] criterion {number}: {label} exceeded its {deadline:.0?} budget ({elapsed:.2?})"
        ),
        (Err(_), _) => println!("[FAIL] criterion {number}: {label} ({elapsed:.2?})"),
    }
    if let Err(e) = outcome {
        std::panic::resume_unwind(e);
    }
    assert!(within, "criterion {number} exceeded its time budget: {elapsed:.2?}");
}

#[test]
fn criterion_1_golden_clp_translation() {
    criterion(1, "golden clause translation of sum.jbc", Duration::from_secs(1), || {
        let (p, _) = load("sum.jbc");
        let clp = compile_program(&p, CompileOptions::default()).unwrap();
        let expected = [
            "sum(il0, rin_sum) :- il0 = ol0, il0 = os0, rin_sum = rout_sum, b1(ol0, os0, rout_sum).",
            "sum(il0, rin_sum) :- il0 = ol0, il0 = os0, rin_sum = rout_sum, b2(ol0, os0, rout_sum).",
            "sum(il0, rin_sum) :- il0 = ol0, il0 = os0, rin_sum = rout_sum, b3(ol0, os0, rout_sum).",
            "b1(il0, is0, rin_b1) :- il0 = ol0, is0 = 0, 0 = os0, rin_b1 = os0.",
            "b2(il0, is0, rin_b2) :- il0 = ol0, is0 <= -1, rin_b2 = rout_b2, b4(ol0, rout_b2).",
            "b3(il0, is0, rin_b3) :- il0 = ol0, is0 >= 1, rin_b3 = rout_b3, b4(ol0, rout_b3).",
            "b4(il0, rin_b4) :- il0 = ol0, il0 = os0, il0 - 1 = os1, rin_b4 = rout_b4, b5(ol0, os0, os1, rout_b4).",
            "b5(il0, is0, is1, rin_b5) :- il0 = ol0, is0 = os0, rin_b5 = rout_b5, sum(is1, os1), b6(ol0, os0, os1, rout_b5).",
            "b6(il0, is0, is1, rin_b6) :- il0 = ol0, is0 + is1 = os0, rin_b6 = os0.",
            "main(il0) :- il0 = ol0, -1 = os0, b7(ol0, os0).",
            "b7(il0, is0) :- il0 = ol0, sum(is0, os0), b8(ol0, os0).",
            "b8(il0, is0) :- il0 = ol0.",
        ];
        assert_eq!(clp.clauses.len(), 12);
        for (i, (got, want_src)) in clp.clauses.iter().zip(&expected).enumerate() {
            let want = parse_clause(want_src).unwrap();
            assert!(
                alpha_equivalent(got, &want),
                "clause r{} differs from the reference:\n got  {got}\n want {want_src}",
                i + 1
            );
        }
    });
}

#[test]
fn criterion_2_golden_unfolding() {
    criterion(2, "golden unfolding of sum.jbc at depth 4", Duration::from_secs(5), || {
        let (p, _) = load("sum.jbc");
        let clp = compile_program(&p, CompileOptions::default()).unwrap();
        let set = unfold(
            &clp,
            UnfoldOpts {
                max: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let expected = [
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
        for (i, (src, want_iter)) in expected.iter().enumerate() {
            let want = parse_clause(src).unwrap();
            let hit = set
                .find_alpha(&want)
                .unwrap_or_else(|| panic!("u{} missing from the unfolding: {src}", i + 1));
            assert_eq!(
                hit.iteration,
                *want_iter,
                "u{} first appears at iteration {}, reference says {want_iter}",
                i + 1,
                hit.iteration
            );
        }
    });
}

#[test]
fn criterion_3_end_to_end_verdict() {
    criterion(3, "analyze sum.jbc --entry Sum.main", Duration::from_secs(5), || {
        let (p, entry) = load("sum.jbc");
        let result = analyze(&p, &entry, &AnalyzeOpts::default()).unwrap();
        let Verdict::NonTerminating(ws) = &result.verdict else {
            panic!("expected NONTERMINATING, got {:?}", result.verdict);
        };
        let w = &ws[0];
        let want = Polyhedron::from_constraints(
            vec![LinearConstraint::var_le_const(VarId::Fresh(0), -1)],
            [VarId::Fresh(0)],
        )
        .canonicalize();
        assert_eq!(
            w.recurrent_set.e.constraints, want.constraints,
            "recurrent set must be the negative half-line on the loop input"
        );
        let reach = w.reach_clause.as_ref().expect("reach clause");
        assert_eq!(reach.head.pred, result.entry_pred);
        assert_eq!(result.entry_pred, "main");
    });
}

#[test]
fn criterion_4_witness_corroboration() {
    criterion(4, "all corpus witnesses replay to budget exhaustion", Duration::from_secs(30), || {
        let mut programs: Vec<String> = fs::read_dir(fixture_path("nonterminating"))
            .unwrap()
            .map(|e| format!("nonterminating/{}", e.unwrap().file_name().to_string_lossy()))
            .collect();
        programs.sort();
        programs.push("sum.jbc".into());
        let mut verdicts = 0;
        for rel in programs {
            let (p, entry) = load(&rel);
            let result = analyze(
                &p,
                &entry,
                &AnalyzeOpts {
                    all_witnesses: true,
                    ..Default::default()
                },
            )
            .unwrap();
            let Verdict::NonTerminating(ws) = &result.verdict else {
                panic!("{rel}: expected NONTERMINATING");
            };
            verdicts += 1;
            for w in ws {
                assert!(
                    corroborate(&p, &entry, w, 10_000).unwrap(),
                    "{rel}: witness did not exhaust the interpreter budget"
                );
            }
        }
        assert!(verdicts >= 4);
    });
}

#[test]
fn criterion_5_instruction_exactness() {
    criterion(5, "instruction exactness, 100 trials per family", Duration::from_secs(60), || {
        for family in EXACT_FAMILIES {
            let report = exactness_check(family, 100, 42);
            assert_eq!(
                report.passes, report.trials,
                "{family}: {:?}",
                report.first_failure
            );
        }
        let negative = exactness_check("getfield", 100, 42);
        assert!(
            negative.passes < negative.trials,
            "the inexact control must produce a counterexample"
        );
        let failure = negative.first_failure.expect("counterexample report");
        assert!(!failure.model.is_empty());
    });
}

#[test]
fn criterion_6_composition_exactness() {
    criterion(6, "composed two-instruction exactness, 50 pairs", Duration::from_secs(60), || {
        let report = exactness_check_pair(50, 42);
        assert_eq!(report.trials, 50);
        assert_eq!(report.passes, 50, "{:?}", report.first_failure);
    });
}

#[test]
fn criterion_7_constraint_engine_oracle() {
    criterion(7, "constraint engine vs brute force, 200 instances", Duration::from_secs(60), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xacce97);
        for round in 0..200 {
            let inst = random_instance(&mut rng, 4, 6);
            let n = inst.vars.len();
            let fast = FastPoly::compile(&inst.poly, &inst.vars);
            let mut any = false;
            let mut points: BTreeSet<Vec<i64>> = BTreeSet::new();
            for_each_point(n, BOX_LO, BOX_HI, |pt| {
                if fast.eval(pt) {
                    any = true;
                    points.insert(pt.to_vec());
                }
            });
            // satisfiability + model validity
            let model = sat_int(&inst.poly);
            assert_eq!(model.is_some(), any, "sat mismatch on round {round}");
            if let Some(m) = &model {
                assert!(inst.poly.eval(m));
            }
            // exact projection vs enumeration; dark shadow inclusion
            if n >= 2 {
                let ndrop = rng.gen_range(1..n);
                let kept = inst.vars[..n - ndrop].to_vec();
                let drop: BTreeSet<VarId> = inst.vars[n - ndrop..].iter().cloned().collect();
                let proj: BTreeSet<Vec<i64>> =
                    points.iter().map(|p| p[..n - ndrop].to_vec()).collect();
                let exact = eliminate_exact(&inst.poly, &drop);
                let dark = eliminate_dark(&inst.poly, &drop);
                let fast_exact: Vec<FastPoly> =
                    exact.iter().map(|d| FastPoly::compile(d, &kept)).collect();
                let fast_dark = FastPoly::compile(&dark, &kept);
                for_each_point(n - ndrop, BOX_LO, BOX_HI, |pt| {
                    let in_exact = fast_exact.iter().any(|d| d.eval(pt));
                    assert_eq!(
                        in_exact,
                        proj.contains(pt),
                        "projection mismatch on round {round} at {pt:?}"
                    );
                    if fast_dark.eval(pt) {
                        assert!(in_exact, "dark shadow escaped the projection on round {round}");
                    }
                });
            }
            // entailment vs pointwise inclusion
            let q_inst = random_instance(&mut rng, n, 2);
            let q = Polyhedron::from_constraints(
                q_inst
                    .poly
                    .constraints
                    .iter()
                    .filter(|c| c.support().count() > 0)
                    .take(2)
                    .cloned()
                    .collect(),
                inst.vars.iter().cloned(),
            );
            let fast_q = FastPoly::compile(&q, &inst.vars);
            let included = points.iter().all(|pt| fast_q.eval(pt));
            assert_eq!(
                entails(&inst.poly, &q),
                included,
                "entailment mismatch on round {round}"
            );
        }
    });
}

#[test]
fn criterion_8_loop_criteria_oracle() {
    criterion(8, "loop criteria vs point-set formulas, 50 loops", Duration::from_secs(60), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xc8);
        let mut checked = 0;
        while checked < 50 {
            let arity = rng.gen_range(1..=2);
            let r = random_boxed_loop(&mut rng, arity);
            let Some(e) = recurrent_set(&r) else { continue };
            checked += 1;
            let cvars: Vec<VarId> = (0..2 * arity).map(|k| VarId::Tmp(k as u32)).collect();
            let fast_c = FastPoly::compile(&r.constraint.canonicalize(), &cvars);
            let evars: Vec<VarId> = (0..arity).map(|k| VarId::Fresh(k as u64)).collect();
            let fast_e = FastPoly::compile(&e.e, &evars);
            let mut e_points = Vec::new();
            for_each_point(arity, BOX_LO, BOX_HI, |x| {
                if fast_e.eval(x) {
                    e_points.push(x.to_vec());
                }
            });
            let successors = |x: &[i64]| {
                let mut out = Vec::new();
                for_each_point(arity, BOX_LO, BOX_HI, |y| {
                    let mut xy = x.to_vec();
                    xy.extend_from_slice(y);
                    if fast_c.eval(&xy) {
                        out.push(y.to_vec());
                    }
                });
                out
            };
            let formula_exist = e_points
                .iter()
                .all(|x| successors(x).iter().any(|y| fast_e.eval(y)));
            let formula_univ = e_points
                .iter()
                .all(|x| successors(x).iter().all(|y| fast_e.eval(y)));
            let got_exist = check_existential(&r, &e);
            let got_univ = check_universal(&r, &e);
            assert_eq!(got_exist, formula_exist, "existential mismatch: {}", r.constraint);
            assert_eq!(got_univ, formula_univ, "universal mismatch: {}", r.constraint);
            if got_univ {
                assert!(got_exist, "universal criterion must entail the existential one");
            }
        }
        // The discriminating loop p(x) :- {x >= 0}, p(y).
        let r = parse_clause("p(t0) :- t0 >= 0, p(t1).").unwrap();
        let e = recurrent_set(&r).unwrap();
        assert!(check_existential(&r, &e));
        assert!(!check_universal(&r, &e));
    });
}

#[test]
fn criterion_9_terminating_corpus_soundness() {
    criterion(9, "terminating corpus never flagged", Duration::from_secs(30), || {
        let mut fixtures: Vec<String> = fs::read_dir(fixture_path("terminating"))
            .unwrap()
            .map(|e| format!("terminating/{}", e.unwrap().file_name().to_string_lossy()))
            .collect();
        fixtures.sort();
        assert!(fixtures.len() >= 5, "corpus must hold at least five programs");
        for rel in fixtures {
            let (p, entry) = load(&rel);
            let result = analyze(&p, &entry, &AnalyzeOpts::default()).unwrap();
            assert!(
                matches!(result.verdict, Verdict::Unknown(_)),
                "{rel}: terminating program flagged non-terminating"
            );
        }
    });
}

fn random_boxed_loop(rng: &mut ChaCha8Rng, arity: usize) -> nonterm_core::clpgen::Clause {
    let xs: Vec<VarId> = (0..arity).map(|k| VarId::Tmp(k as u32)).collect();
    let ys: Vec<VarId> = (0..arity).map(|k| VarId::Tmp((arity + k) as u32)).collect();
    let all: Vec<VarId> = xs.iter().chain(ys.iter()).cloned().collect();
    let mut constraints = Vec::new();
    for _ in 0..rng.gen_range(1..=4) {
        let mut terms = Vec::new();
        for v in &all {
            let c: i64 = rng.gen_range(-1..=1);
            if c != 0 {
                terms.push((v.clone(), BigInt::from(c)));
            }
        }
        if terms.is_empty() {
            continue;
        }
        let rel = if rng.gen_bool(0.3) { Rel::Eq } else { Rel::Le };
        constraints.push(LinearConstraint::new(
            terms,
            rel,
            BigInt::from(rng.gen_range(-5..=5)),
        ));
    }
    for v in &all {
        constraints.push(LinearConstraint::var_ge_const(v.clone(), BOX_LO));
        constraints.push(LinearConstraint::var_le_const(v.clone(), BOX_HI));
    }
    nonterm_core::clpgen::Clause {
        head: nonterm_core::clpgen::Atom {
            pred: "p".into(),
            args: xs,
        },
        constraint: Polyhedron::from_constraints(constraints, all),
        body: vec![nonterm_core::clpgen::Atom {
            pred: "p".into(),
            args: ys,
        }],
    }
}
