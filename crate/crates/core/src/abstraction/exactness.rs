//! Exactness harness: samples models of an instruction's polyhedron,
//! builds a compatible state, executes the instruction, and checks that
//! the transition is defined with output path lengths matching the model.
//!
//! Models whose reference-typed input slots carry negative values have no
//! compatible state at all, so sampling constrains those slots to be
//! realizable instead of emitting non-negativity into the abstraction.

use super::{getfield_pl, ins_pl, output_arity, PathLengthOptions};
use crate::bytecode::{instruction_effect, ConstVal, FieldRef, Frame, Instruction, SlotTy, Ty};
use crate::interpreter::{
    build_state, exec_instruction, input_assignment, output_assignment, ExecResult, State, Value,
};
use crate::polyhedra::{
    compose_pl, sample_model, Assignment, LinearConstraint, Polyhedron, VarId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// What the harness exercises: a real instruction or the inexact
/// `getfield` control.
#[derive(Debug, Clone)]
pub enum HarnessSubject {
    Ins(Instruction),
    GetfieldInt(FieldRef),
}

impl HarnessSubject {
    pub fn name(&self) -> String {
        match self {
            HarnessSubject::Ins(i) => i.to_string(),
            HarnessSubject::GetfieldInt(fr) => format!("getfield {}.{}:int", fr.class, fr.field),
        }
    }

    fn abstraction(&self, frame: &Frame, opts: PathLengthOptions) -> Polyhedron {
        match self {
            HarnessSubject::Ins(i) => ins_pl(i, frame, opts).expect("abstractable instruction"),
            HarnessSubject::GetfieldInt(_) => getfield_pl(frame, opts),
        }
    }

    fn out_arity(&self, frame: &Frame) -> (usize, usize) {
        match self {
            HarnessSubject::Ins(i) => output_arity(i, frame),
            HarnessSubject::GetfieldInt(_) => frame.arity(),
        }
    }

    /// Concrete semantics; `None` when the transition is undefined.
    fn execute(&self, state: &State) -> Option<State> {
        match self {
            HarnessSubject::Ins(i) => match exec_instruction(i, state).expect("well-typed state") {
                ExecResult::Next(s) => Some(s),
                ExecResult::Stuck => None,
            },
            HarnessSubject::GetfieldInt(fr) => {
                let mut st = state.clone();
                match st.stack.pop().expect("receiver on stack") {
                    Value::Null => None,
                    Value::Loc(l) => {
                        let v = st
                            .heap
                            .get(l)
                            .and_then(|o| o.fields.get(&fr.field).cloned())
                            .unwrap_or(Value::Int(0.into()));
                        st.stack.push(v);
                        Some(st)
                    }
                    Value::Int(_) => unreachable!("receiver slot is class-typed"),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureCase {
    pub model: BTreeMap<String, String>,
    pub state: String,
    pub expected: BTreeMap<String, String>,
    pub got: BTreeMap<String, String>,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactnessReport {
    pub instruction: String,
    pub trials: u32,
    pub passes: u32,
    pub first_failure: Option<FailureCase>,
}

impl ExactnessReport {
    pub fn all_passed(&self) -> bool {
        self.passes == self.trials
    }
}

fn stringify(asg: &Assignment) -> BTreeMap<String, String> {
    asg.iter().map(|(v, n)| (v.token(), n.to_string())).collect()
}

/// Realizability side conditions: class-typed input slots are >= 0,
/// null-typed ones are exactly 0.
fn realizable_inputs(frame: &Frame) -> Vec<LinearConstraint> {
    let mut cs = Vec::new();
    let mut add = |var: VarId, ty: &SlotTy| match ty {
        SlotTy::Int => {}
        SlotTy::Class(_) => cs.push(LinearConstraint::var_ge_const(var, 0)),
        SlotTy::Null => cs.push(LinearConstraint::var_eq_const(var, 0)),
    };
    for (k, t) in frame.locals.iter().enumerate() {
        add(VarId::InL(k as u32), t);
    }
    for (k, t) in frame.stack.iter().enumerate() {
        add(VarId::InS(k as u32), t);
    }
    cs
}

fn out_vars(arity: (usize, usize)) -> BTreeSet<VarId> {
    let (l, s) = arity;
    (0..l)
        .map(|k| VarId::OutL(k as u32))
        .chain((0..s).map(|k| VarId::OutS(k as u32)))
        .collect()
}

/// Class table used by the harness frames: one class with an int field.
pub fn harness_classes() -> BTreeMap<String, Vec<(String, Ty)>> {
    [("C".to_string(), vec![("f".to_string(), Ty::Int)])]
        .into_iter()
        .collect()
}

fn run_trial(
    subject: &HarnessSubject,
    frame: &Frame,
    rng: &mut ChaCha8Rng,
    classes: &BTreeMap<String, Vec<(String, Ty)>>,
) -> Result<(), FailureCase> {
    let pl = subject.abstraction(frame, PathLengthOptions::default());
    let mut sampling = pl.clone();
    sampling.constraints.extend(realizable_inputs(frame));
    let order: Vec<VarId> = sampling.scope.iter().cloned().collect();
    let Some(model) = sample_model(&sampling, &order, rng, -8, 8) else {
        // No realizable model: exactness is vacuous for this frame.
        return Ok(());
    };
    let fail = |state: String, expected: &Assignment, got: &Assignment, reason: &str| FailureCase {
        model: stringify(&model),
        state,
        expected: stringify(expected),
        got: stringify(got),
        reason: reason.to_string(),
    };
    let rho_in: Assignment = model
        .iter()
        .filter(|(v, _)| matches!(v, VarId::InL(_) | VarId::InS(_)))
        .map(|(v, n)| (v.clone(), n.clone()))
        .collect();
    let state = match build_state(&rho_in, frame, classes) {
        Ok(s) => s,
        Err(e) => {
            return Err(fail(
                String::new(),
                &Assignment::new(),
                &Assignment::new(),
                &format!("no compatible state: {e}"),
            ))
        }
    };
    debug_assert_eq!(input_assignment(&state).unwrap(), rho_in);
    let Some(out_state) = subject.execute(&state) else {
        return Err(fail(
            state.to_string(),
            &Assignment::new(),
            &Assignment::new(),
            "transition undefined on a model of the abstraction",
        ));
    };
    let wanted = out_vars(subject.out_arity(frame));
    let expected: Assignment = model
        .iter()
        .filter(|(v, _)| wanted.contains(v))
        .map(|(v, n)| (v.clone(), n.clone()))
        .collect();
    let got = match output_assignment(&out_state) {
        Ok(a) => a,
        Err(e) => {
            return Err(fail(
                state.to_string(),
                &expected,
                &Assignment::new(),
                &format!("output lengths undefined: {e}"),
            ))
        }
    };
    if got != expected {
        return Err(fail(
            state.to_string(),
            &expected,
            &got,
            "output path lengths disagree with the model",
        ));
    }
    Ok(())
}

/// Run `trials` seeded exactness trials for one subject at one frame shape
/// family (the frame is re-randomized per trial).
pub fn exactness_check(family: &str, trials: u32, seed: u64) -> ExactnessReport {
    let classes = harness_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passes = 0;
    let mut first_failure = None;
    let mut name = family.to_string();
    for _ in 0..trials {
        let (subject, frame) = random_subject(family, &mut rng);
        name = subject.name();
        match run_trial(&subject, &frame, &mut rng, &classes) {
            Ok(()) => passes += 1,
            Err(f) => {
                if first_failure.is_none() {
                    first_failure = Some(f);
                }
            }
        }
    }
    ExactnessReport {
        instruction: format!("{family} ({name})"),
        trials,
        passes,
        first_failure,
    }
}

/// Composition harness: two chained instructions, the composed polyhedron
/// checked against two-step execution.
pub fn exactness_check_pair(trials: u32, seed: u64) -> ExactnessReport {
    let classes = harness_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passes = 0;
    let mut first_failure = None;
    let mut done = 0u32;
    let mut attempts = 0u32;
    while done < trials && attempts < trials * 200 {
        attempts += 1;
        let (s1, frame0) = random_subject(random_exact_family(&mut rng), &mut rng);
        let HarnessSubject::Ins(ins1) = &s1 else { unreachable!() };
        let Ok(frame1) = instruction_effect(&frame0, ins1) else {
            continue;
        };
        let Some(ins2) = instruction_for_frame(&frame1, &mut rng) else {
            continue;
        };
        let pl1 = ins_pl(ins1, &frame0, PathLengthOptions::default()).unwrap();
        let pl2 = ins_pl(&ins2, &frame1, PathLengthOptions::default()).unwrap();
        let composed = compose_pl(&pl1, &pl2, frame1.arity()).unwrap();
        let mut sampling = composed.clone();
        sampling.constraints.extend(realizable_inputs(&frame0));
        let order: Vec<VarId> = sampling.scope.iter().cloned().collect();
        let Some(model) = sample_model(&sampling, &order, &mut rng, -8, 8) else {
            continue; // guards of the pair are incompatible; pick another
        };
        done += 1;
        let rho_in: Assignment = model
            .iter()
            .filter(|(v, _)| matches!(v, VarId::InL(_) | VarId::InS(_)))
            .map(|(v, n)| (v.clone(), n.clone()))
            .collect();
        let pair_name = format!("{ins1} ; {ins2}");
        let state = build_state(&rho_in, &frame0, &classes).expect("realizable inputs");
        let step1 = HarnessSubject::Ins(ins1.clone()).execute(&state);
        let out = step1.and_then(|s| HarnessSubject::Ins(ins2.clone()).execute(&s));
        let record = |expected: &Assignment, got: &Assignment, reason: &str| FailureCase {
            model: stringify(&model),
            state: state.to_string(),
            expected: stringify(expected),
            got: stringify(got),
            reason: format!("{pair_name}: {reason}"),
        };
        let wanted = out_vars(output_arity(&ins2, &frame1));
        let expected: Assignment = model
            .iter()
            .filter(|(v, _)| wanted.contains(v))
            .map(|(v, n)| (v.clone(), n.clone()))
            .collect();
        match out {
            None => {
                if first_failure.is_none() {
                    first_failure = Some(record(
                        &expected,
                        &Assignment::new(),
                        "two-step transition undefined on a model",
                    ));
                }
            }
            Some(out_state) => {
                let got = output_assignment(&out_state).expect("finite output lengths");
                if got == expected {
                    passes += 1;
                } else if first_failure.is_none() {
                    first_failure = Some(record(&expected, &got, "composed lengths disagree"));
                }
            }
        }
    }
    ExactnessReport {
        instruction: "composed pairs".into(),
        trials: done,
        passes,
        first_failure,
    }
}

/// Families exercised by the per-instruction exactness suite.
pub const EXACT_FAMILIES: &[&str] = &[
    "const-int",
    "const-null",
    "dup",
    "new",
    "load",
    "store",
    "add",
    "putfield-int",
    "ifeq-int",
    "ifeq-class",
    "iflt",
    "ifle",
    "ifgt",
    "ifge",
    "pop",
];

fn random_exact_family(rng: &mut ChaCha8Rng) -> &'static str {
    EXACT_FAMILIES[rng.gen_range(0..EXACT_FAMILIES.len())]
}

fn random_slot(rng: &mut ChaCha8Rng) -> SlotTy {
    if rng.gen_bool(0.5) {
        SlotTy::Int
    } else {
        SlotTy::Class("C".into())
    }
}

/// A random frame fitting `family`, with the demanded stack suffix and a
/// random prefix below it.
pub fn random_frame_for(family: &str, rng: &mut ChaCha8Rng) -> Frame {
    let nl = rng.gen_range(1..=3);
    let locals: Vec<SlotTy> = (0..nl).map(|_| random_slot(rng)).collect();
    let prefix: Vec<SlotTy> = (0..rng.gen_range(0..=1)).map(|_| random_slot(rng)).collect();
    let mut stack = prefix;
    match family {
        "const-int" | "const-null" | "new" | "load" => {}
        "dup" | "store" | "pop" => stack.push(random_slot(rng)),
        "add" => {
            stack.push(SlotTy::Int);
            stack.push(SlotTy::Int);
        }
        "putfield-int" => {
            stack.push(SlotTy::Class("C".into()));
            stack.push(SlotTy::Int);
        }
        "ifeq-int" | "iflt" | "ifle" | "ifgt" | "ifge" => stack.push(SlotTy::Int),
        "ifeq-class" | "getfield" => stack.push(SlotTy::Class("C".into())),
        other => panic!("unknown family `{other}`"),
    }
    Frame { locals, stack }
}

/// A random subject plus a fitting random frame.
pub fn random_subject(family: &str, rng: &mut ChaCha8Rng) -> (HarnessSubject, Frame) {
    let frame = random_frame_for(family, rng);
    let nl = frame.locals.len();
    let ins = match family {
        "const-int" => HarnessSubject::Ins(Instruction::Const(ConstVal::Int(rng.gen_range(-5..=5)))),
        "const-null" => HarnessSubject::Ins(Instruction::Const(ConstVal::Null)),
        "dup" => HarnessSubject::Ins(Instruction::Dup),
        "new" => HarnessSubject::Ins(Instruction::New("C".into())),
        "load" => HarnessSubject::Ins(Instruction::Load(rng.gen_range(0..nl))),
        "store" => HarnessSubject::Ins(Instruction::Store(rng.gen_range(0..nl))),
        "add" => HarnessSubject::Ins(Instruction::Add),
        "putfield-int" => HarnessSubject::Ins(Instruction::PutfieldInt(FieldRef {
            class: "C".into(),
            field: "f".into(),
        })),
        "ifeq-int" => HarnessSubject::Ins(Instruction::IfEq(Ty::Int)),
        "ifeq-class" => HarnessSubject::Ins(Instruction::IfEq(Ty::Class("C".into()))),
        "iflt" => HarnessSubject::Ins(Instruction::IfLt),
        "ifle" => HarnessSubject::Ins(Instruction::IfLe),
        "ifgt" => HarnessSubject::Ins(Instruction::IfGt),
        "ifge" => HarnessSubject::Ins(Instruction::IfGe),
        "pop" => HarnessSubject::Ins(Instruction::Pop),
        "getfield" => HarnessSubject::GetfieldInt(FieldRef {
            class: "C".into(),
            field: "f".into(),
        }),
        other => panic!("unknown family `{other}`"),
    };
    (ins, frame)
}

/// A random instruction whose demands the given frame already meets.
pub fn instruction_for_frame(frame: &Frame, rng: &mut ChaCha8Rng) -> Option<Instruction> {
    let nl = frame.locals.len();
    let s = frame.stack.len();
    let top_int = |k: usize| frame.stack.get(s.wrapping_sub(k)).map(|t| *t == SlotTy::Int);
    let mut options: Vec<Instruction> = vec![
        Instruction::Const(ConstVal::Int(rng.gen_range(-5..=5))),
        Instruction::Const(ConstVal::Null),
        Instruction::New("C".into()),
        Instruction::Load(rng.gen_range(0..nl)),
    ];
    if s >= 1 {
        options.push(Instruction::Dup);
        options.push(Instruction::Pop);
        options.push(Instruction::Store(rng.gen_range(0..nl)));
        if top_int(1) == Some(true) {
            options.extend([
                Instruction::IfEq(Ty::Int),
                Instruction::IfLt,
                Instruction::IfLe,
                Instruction::IfGt,
                Instruction::IfGe,
            ]);
        }
        if let Some(SlotTy::Class(c)) = frame.stack.last() {
            options.push(Instruction::IfEq(Ty::Class(c.clone())));
        }
    }
    if s >= 2 && top_int(1) == Some(true) && top_int(2) == Some(true) {
        options.push(Instruction::Add);
    }
    if s >= 2
        && top_int(1) == Some(true)
        && matches!(frame.stack.get(s - 2), Some(SlotTy::Class(c)) if c == "C")
    {
        options.push(Instruction::PutfieldInt(FieldRef {
            class: "C".into(),
            field: "f".into(),
        }));
    }
    if options.is_empty() {
        return None;
    }
    Some(options[rng.gen_range(0..options.len())].clone())
}
