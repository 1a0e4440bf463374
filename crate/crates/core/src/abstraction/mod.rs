//! Per-instruction path-length polyhedra and block-level composition.
//!
//! Every supported instruction (calls excepted; those become predicate
//! calls during clause generation) maps to a polyhedron relating the sizes
//! of its input and output slots. These abstractions are exact: any model
//! corresponds to a defined transition whose output sizes match the model.
//! `getfield_pl` is the deliberate exception, kept as a negative control
//! for the exactness harness; the instruction itself is not part of the
//! language.

use crate::bytecode::{ConstVal, Frame, Instruction};
use crate::polyhedra::{
    compose_pl_all, ComposeError, LinearConstraint, Polyhedron, ProjectionMode, VarId,
};
use num_bigint::BigInt;
use std::collections::BTreeSet;
use thiserror::Error;

mod exactness;

pub use self::exactness::{
    exactness_check, exactness_check_pair, harness_classes, instruction_for_frame,
    random_frame_for, random_subject, ExactnessReport, FailureCase, HarnessSubject,
    EXACT_FAMILIES,
};

/// One side of an externally supplied alias fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotRef {
    Local(usize),
    Stack(usize),
}

impl SlotRef {
    fn in_var(&self) -> VarId {
        match self {
            SlotRef::Local(i) => VarId::InL(*i as u32),
            SlotRef::Stack(i) => VarId::InS(*i as u32),
        }
    }

    fn fits(&self, frame: &Frame) -> bool {
        match self {
            SlotRef::Local(i) => *i < frame.locals.len(),
            SlotRef::Stack(i) => *i < frame.stack.len(),
        }
    }
}

/// Options controlling constraint emission.
#[derive(Debug, Clone, Default)]
pub struct PathLengthOptions {
    /// Also emit `>= 0` for every reference-typed slot of the input frame.
    /// Off by default: the generated clauses then match the classic
    /// presentation, and reference realizability is enforced where states
    /// get built instead.
    pub reference_nonneg: bool,
    /// Externally supplied alias facts; each pair adds an input equality
    /// wherever both slots exist in the frame. No alias analysis runs
    /// here, so the default is the empty set.
    pub alias_pairs: Vec<(SlotRef, SlotRef)>,
}

fn alias_equalities(frame: &Frame, pairs: &[(SlotRef, SlotRef)]) -> Vec<LinearConstraint> {
    pairs
        .iter()
        .filter(|(a, b)| a.fits(frame) && b.fits(frame) && a != b)
        .map(|(a, b)| LinearConstraint::var_eq(a.in_var(), b.in_var()))
        .collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AbstractionError {
    #[error("call instructions are not abstracted into a polyhedron")]
    CallNotAbstracted,
    #[error("ifne must be desugared before abstraction")]
    IfNeNotAbstracted,
    #[error("instruction demands {needed} stack slots, frame has {have}")]
    StackTooShallow { needed: usize, have: usize },
    #[error("local index {index} out of frame ({count} locals)")]
    BadLocal { index: usize, count: usize },
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

fn nonneg_inputs(frame: &Frame) -> Vec<LinearConstraint> {
    let mut out = Vec::new();
    for (i, t) in frame.locals.iter().enumerate() {
        if t.is_reference() {
            out.push(LinearConstraint::var_ge_const(VarId::InL(i as u32), 0));
        }
    }
    for (i, t) in frame.stack.iter().enumerate() {
        if t.is_reference() {
            out.push(LinearConstraint::var_ge_const(VarId::InS(i as u32), 0));
        }
    }
    out
}

/// Equalities `il^i = ol^i` for `i` in `locals` and `is^i = os^i` for `i`
/// in `stack` (no reference constraints; alias sets are taken empty).
pub fn unchanged_eq(frame: &Frame, locals: &BTreeSet<usize>, stack: &BTreeSet<usize>) -> Polyhedron {
    let (nl, ns) = frame.arity();
    let mut cs = Vec::new();
    for &i in locals {
        assert!(i < nl, "unchanged local index {i} out of frame");
        cs.push(LinearConstraint::var_eq(
            VarId::InL(i as u32),
            VarId::OutL(i as u32),
        ));
    }
    for &i in stack {
        assert!(i < ns, "unchanged stack index {i} out of frame");
        cs.push(LinearConstraint::var_eq(
            VarId::InS(i as u32),
            VarId::OutS(i as u32),
        ));
    }
    Polyhedron::from_constraints(cs, [])
}

/// `unchanged_eq` plus non-negativity for every reference-typed slot of the
/// frame, mirroring the full definition used in the exactness proofs.
pub fn unchanged(frame: &Frame, locals: &BTreeSet<usize>, stack: &BTreeSet<usize>) -> Polyhedron {
    let mut p = unchanged_eq(frame, locals, stack);
    p.constraints.extend(nonneg_inputs(frame));
    p
}

fn range(n: usize) -> BTreeSet<usize> {
    (0..n).collect()
}

fn scoped(mut p: Polyhedron, frame: &Frame, out: (usize, usize)) -> Polyhedron {
    let (il, is) = frame.arity();
    let (ol, os) = out;
    let mut scope = BTreeSet::new();
    scope.extend((0..il).map(|k| VarId::InL(k as u32)));
    scope.extend((0..is).map(|k| VarId::InS(k as u32)));
    scope.extend((0..ol).map(|k| VarId::OutL(k as u32)));
    scope.extend((0..os).map(|k| VarId::OutS(k as u32)));
    p.scope = scope;
    p.canonicalize()
}

/// Output (locals, stack) arity of a non-call instruction at a frame.
pub fn output_arity(ins: &Instruction, frame: &Frame) -> (usize, usize) {
    let (l, s) = frame.arity();
    match ins {
        Instruction::Const(_) | Instruction::Dup | Instruction::New(_) | Instruction::Load(_) => {
            (l, s + 1)
        }
        Instruction::Store(_)
        | Instruction::Pop
        | Instruction::IfEq(_)
        | Instruction::IfNe(_)
        | Instruction::IfLt
        | Instruction::IfLe
        | Instruction::IfGt
        | Instruction::IfGe => (l, s - 1),
        Instruction::Add => (l, s - 1),
        Instruction::PutfieldInt(_) => (l, s - 2),
        Instruction::Call { .. } => unreachable!("calls have no single-frame arity"),
    }
}

/// The path-length polyhedron of a non-call instruction at a frame.
pub fn ins_pl(
    ins: &Instruction,
    frame: &Frame,
    opts: PathLengthOptions,
) -> Result<Polyhedron, AbstractionError> {
    let (l, s) = frame.arity();
    let need = |needed: usize| {
        if s < needed {
            Err(AbstractionError::StackTooShallow { needed, have: s })
        } else {
            Ok(())
        }
    };
    let top = |k: usize| VarId::InS((s - k) as u32);
    let mut p = match ins {
        Instruction::Call { .. } => return Err(AbstractionError::CallNotAbstracted),
        Instruction::IfNe(_) => return Err(AbstractionError::IfNeNotAbstracted),
        Instruction::Const(c) => {
            let mut p = unchanged_eq(frame, &range(l), &range(s));
            let val = match c {
                ConstVal::Int(n) => BigInt::from(*n),
                ConstVal::Null => BigInt::from(0),
            };
            p.push(LinearConstraint::new(
                vec![(VarId::OutS(s as u32), BigInt::from(-1))],
                crate::polyhedra::Rel::Eq,
                -val,
            ));
            p
        }
        Instruction::Dup => {
            need(1)?;
            let mut p = unchanged_eq(frame, &range(l), &range(s));
            p.push(LinearConstraint::var_eq(top(1), VarId::OutS(s as u32)));
            p
        }
        Instruction::New(_) => {
            let mut p = unchanged_eq(frame, &range(l), &range(s));
            p.push(LinearConstraint::var_eq_const(VarId::OutS(s as u32), 1));
            p
        }
        Instruction::Load(i) => {
            if *i >= l {
                return Err(AbstractionError::BadLocal { index: *i, count: l });
            }
            let mut p = unchanged_eq(frame, &range(l), &range(s));
            p.push(LinearConstraint::var_eq(
                VarId::InL(*i as u32),
                VarId::OutS(s as u32),
            ));
            p
        }
        Instruction::Store(i) => {
            need(1)?;
            if *i >= l {
                return Err(AbstractionError::BadLocal { index: *i, count: l });
            }
            let mut keep = range(l);
            keep.remove(i);
            let mut p = unchanged_eq(frame, &keep, &range(s - 1));
            p.push(LinearConstraint::var_eq(top(1), VarId::OutL(*i as u32)));
            p
        }
        Instruction::Add => {
            need(2)?;
            let mut p = unchanged_eq(frame, &range(l), &range(s - 2));
            // is^{s-2} + is^{s-1} = os^{s-2}
            p.push(LinearConstraint::new(
                vec![
                    (top(2), BigInt::from(1)),
                    (top(1), BigInt::from(1)),
                    (VarId::OutS((s - 2) as u32), BigInt::from(-1)),
                ],
                crate::polyhedra::Rel::Eq,
                BigInt::from(0),
            ));
            p
        }
        Instruction::PutfieldInt(_) => {
            need(2)?;
            let mut p = unchanged_eq(frame, &range(l), &range(s - 2));
            p.push(LinearConstraint::var_ge_const(top(2), 1));
            p
        }
        Instruction::IfEq(_) => {
            need(1)?;
            let mut p = unchanged_eq(frame, &range(l), &range(s - 1));
            p.push(LinearConstraint::var_eq_const(top(1), 0));
            p
        }
        Instruction::IfLt => {
            need(1)?;
            let mut p = unchanged_eq(frame, &range(l), &range(s - 1));
            p.push(LinearConstraint::var_le_const(top(1), -1));
            p
        }
        Instruction::IfLe => {
            need(1)?;
            let mut p = unchanged_eq(frame, &range(l), &range(s - 1));
            p.push(LinearConstraint::var_le_const(top(1), 0));
            p
        }
        Instruction::IfGt => {
            need(1)?;
            let mut p = unchanged_eq(frame, &range(l), &range(s - 1));
            p.push(LinearConstraint::var_ge_const(top(1), 1));
            p
        }
        Instruction::IfGe => {
            need(1)?;
            let mut p = unchanged_eq(frame, &range(l), &range(s - 1));
            p.push(LinearConstraint::var_ge_const(top(1), 0));
            p
        }
        Instruction::Pop => {
            need(1)?;
            unchanged_eq(frame, &range(l), &range(s - 1))
        }
    };
    p.constraints.extend(alias_equalities(frame, &opts.alias_pairs));
    if opts.reference_nonneg {
        p.constraints.extend(nonneg_inputs(frame));
    }
    Ok(scoped(p, frame, output_arity(ins, frame)))
}

/// The classic inexact abstraction of an integer `getfield`: it constrains
/// the receiver to be non-null but says nothing about the pushed value, so
/// models can disagree with the executed result. Not part of the language;
/// used as the harness's negative control.
pub fn getfield_pl(frame: &Frame, opts: PathLengthOptions) -> Polyhedron {
    let (l, s) = frame.arity();
    assert!(s >= 1, "getfield needs a receiver on the stack");
    let mut p = unchanged_eq(frame, &range(l), &range(s - 1));
    p.push(LinearConstraint::var_ge_const(VarId::InS((s - 1) as u32), 1));
    p.constraints.extend(alias_equalities(frame, &opts.alias_pairs));
    if opts.reference_nonneg {
        p.constraints.extend(nonneg_inputs(frame));
    }
    scoped(p, frame, (l, s))
}

/// Left-to-right composition of the instruction abstractions of
/// `block.instructions[start..]`. Returns one polyhedron per projection
/// disjunct (a singleton in dark-shadow mode). The instruction at `start`
/// must not be a call.
pub fn block_constraint_from(
    instructions: &[Instruction],
    frames: &[Frame],
    opts: &PathLengthOptions,
    mode: ProjectionMode,
) -> Result<Vec<Polyhedron>, AbstractionError> {
    assert_eq!(instructions.len(), frames.len());
    assert!(!instructions.is_empty(), "blocks are non-empty");
    let mut acc = vec![ins_pl(&instructions[0], &frames[0], opts.clone())?];
    for (ins, frame) in instructions.iter().zip(frames).skip(1) {
        let pl = ins_pl(ins, frame, opts.clone())?;
        let mid = frame.arity();
        let mut next = Vec::new();
        for p in &acc {
            next.extend(compose_pl_all(p, &pl, mid, mode)?);
        }
        acc = next;
    }
    Ok(acc)
}

/// `block_constraint_from` over a whole block (no leading call).
pub fn block_constraint(
    instructions: &[Instruction],
    frames: &[Frame],
    opts: &PathLengthOptions,
) -> Result<Polyhedron, AbstractionError> {
    let mut v = block_constraint_from(instructions, frames, opts, ProjectionMode::DarkShadow)?;
    Ok(v.pop().expect("dark mode yields one polyhedron"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::SlotTy;
    use crate::polyhedra::parse_constraint;

    fn frame(locals: &[SlotTy], stack: &[SlotTy]) -> Frame {
        Frame {
            locals: locals.to_vec(),
            stack: stack.to_vec(),
        }
    }

    fn canon(cs: &[&str]) -> Vec<LinearConstraint> {
        Polyhedron::from_constraints(
            cs.iter().map(|s| parse_constraint(s).unwrap()).collect(),
            [],
        )
        .canonicalize()
        .constraints
    }

    #[test]
    fn unchanged_on_an_int_frame_is_just_equalities() {
        let f = frame(&[SlotTy::Int], &[]);
        let p = unchanged(&f, &range(1), &range(0));
        assert_eq!(p.canonicalize().constraints, canon(&["il0 = ol0"]));
    }

    #[test]
    fn unchanged_adds_nonneg_for_class_typed_locals() {
        let f = frame(&[SlotTy::Class("C".into())], &[]);
        let p = unchanged(&f, &range(1), &range(0));
        assert_eq!(
            p.canonicalize().constraints,
            canon(&["il0 = ol0", "il0 >= 0"])
        );
        // the equality-only flavour omits it
        let q = unchanged_eq(&f, &range(1), &range(0));
        assert_eq!(q.canonicalize().constraints, canon(&["il0 = ol0"]));
    }

    #[test]
    fn empty_index_sets_give_the_empty_polyhedron() {
        let f = frame(&[SlotTy::Int, SlotTy::Int], &[SlotTy::Int]);
        let p = unchanged(&f, &BTreeSet::new(), &BTreeSet::new());
        assert!(p.constraints.is_empty());
    }

    #[test]
    fn dup_constrains_the_new_top() {
        let f = frame(&[SlotTy::Int], &[SlotTy::Int]);
        let p = ins_pl(&Instruction::Dup, &f, PathLengthOptions::default()).unwrap();
        assert_eq!(
            p.constraints,
            canon(&["il0 = ol0", "is0 = os0", "is0 = os1"])
        );
    }

    #[test]
    fn iflt_guards_the_popped_top() {
        // frame (#l=1, #s=1): {il0 = ol0, is0 <= -1}
        let f = frame(&[SlotTy::Int], &[SlotTy::Int]);
        let p = ins_pl(&Instruction::IfLt, &f, PathLengthOptions::default()).unwrap();
        assert_eq!(p.constraints, canon(&["il0 = ol0", "is0 <= -1"]));
    }

    #[test]
    fn store_moves_the_top_into_the_local() {
        // store 0 at (#l=1, #s=1): {is0 = ol0}
        let f = frame(&[SlotTy::Int], &[SlotTy::Int]);
        let p = ins_pl(&Instruction::Store(0), &f, PathLengthOptions::default()).unwrap();
        assert_eq!(p.constraints, canon(&["is0 = ol0"]));
    }

    #[test]
    fn const_null_pushes_length_zero() {
        let f = frame(&[SlotTy::Int], &[]);
        let p = ins_pl(
            &Instruction::Const(ConstVal::Null),
            &f,
            PathLengthOptions::default(),
        )
        .unwrap();
        assert_eq!(p.constraints, canon(&["il0 = ol0", "0 = os0"]));
    }

    #[test]
    fn call_is_rejected() {
        let f = frame(&[SlotTy::Int], &[SlotTy::Int]);
        let sig = crate::bytecode::MethodSig {
            class: "A".into(),
            name: "f".into(),
            params: vec![crate::bytecode::Ty::Int],
            ret: None,
        };
        assert_eq!(
            ins_pl(
                &Instruction::Call {
                    sig,
                    is_static: true
                },
                &f,
                PathLengthOptions::default()
            )
            .unwrap_err(),
            AbstractionError::CallNotAbstracted
        );
    }

    #[test]
    fn the_b4_body_composes_to_the_r7_constraint() {
        // load 0 ; load 0 ; const -1 ; add  at (#l=1, #s=0)
        // => {il0 = ol0, il0 = os0, il0 - 1 = os1}
        let f0 = frame(&[SlotTy::Int], &[]);
        let f1 = frame(&[SlotTy::Int], &[SlotTy::Int]);
        let f2 = frame(&[SlotTy::Int], &[SlotTy::Int, SlotTy::Int]);
        let f3 = frame(
            &[SlotTy::Int],
            &[SlotTy::Int, SlotTy::Int, SlotTy::Int],
        );
        let instructions = [
            Instruction::Load(0),
            Instruction::Load(0),
            Instruction::Const(ConstVal::Int(-1)),
            Instruction::Add,
        ];
        let frames = [f0, f1, f2, f3];
        let p = block_constraint(&instructions, &frames, &PathLengthOptions::default()).unwrap();
        assert_eq!(
            p.constraints,
            canon(&["il0 = ol0", "il0 = os0", "il0 - 1 = os1"])
        );
    }

    #[test]
    fn single_instruction_block_is_its_abstraction() {
        let f0 = frame(&[SlotTy::Int], &[]);
        let p = block_constraint(
            &[Instruction::Load(0)],
            std::slice::from_ref(&f0),
            &PathLengthOptions::default(),
        )
        .unwrap();
        assert_eq!(p.constraints, canon(&["il0 = ol0", "il0 = os0"]));
    }
}

#[cfg(test)]
mod alias_tests {
    use super::*;
    use crate::bytecode::SlotTy;

    #[test]
    fn supplied_alias_pairs_add_input_equalities() {
        let frame = Frame {
            locals: vec![SlotTy::Class("C".into())],
            stack: vec![SlotTy::Class("C".into())],
        };
        let opts = PathLengthOptions {
            alias_pairs: vec![
                (SlotRef::Local(0), SlotRef::Stack(0)),
                (SlotRef::Local(3), SlotRef::Stack(0)), // out of frame: ignored
            ],
            ..Default::default()
        };
        let p = ins_pl(&Instruction::Pop, &frame, opts).unwrap();
        let want = LinearConstraint::var_eq(VarId::InL(0), VarId::InS(0))
            .normalized()
            .unwrap();
        assert!(p.constraints.contains(&want), "{p}");
        // without the facts the equality is absent
        let q = ins_pl(&Instruction::Pop, &frame, PathLengthOptions::default()).unwrap();
        assert!(!q.constraints.contains(&want));
    }
}
