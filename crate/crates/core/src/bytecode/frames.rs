//! Frame inference: forward dataflow from the entry frame, simulating each
//! instruction's stack effect. Joins require exact equality of local/stack
//! heights and types; any merge ambiguity is a verification error.

use super::{Instruction, Method, Program, SlotTy, Ty};
use std::collections::{BTreeMap, VecDeque};
use thiserror::Error;

/// Local and stack slot types at one program point, recorded just before
/// executing the instruction. `stack[0]` is the base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub locals: Vec<SlotTy>,
    pub stack: Vec<SlotTy>,
}

impl Frame {
    pub fn arity(&self) -> (usize, usize) {
        (self.locals.len(), self.stack.len())
    }
}

impl std::fmt::Display for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "locals=[")?;
        for (i, t) in self.locals.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, "] stack=[")?;
        for (i, t) in self.stack.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{block}:{index}: {msg}")]
pub struct FrameError {
    pub block: String,
    pub index: usize,
    pub msg: String,
}

/// Frames for one method: per instruction point and per block end.
#[derive(Debug, Clone, Default)]
pub struct FrameMap {
    pub at: BTreeMap<(String, usize), Frame>,
    pub end: BTreeMap<String, Frame>,
}

impl FrameMap {
    pub fn entry_frame(&self, block: &str) -> Option<&Frame> {
        self.at.get(&(block.to_string(), 0))
    }
}

/// Frames for every method of a program, keyed by qualified method name.
#[derive(Debug, Clone, Default)]
pub struct ProgramFrames {
    pub per_method: BTreeMap<String, FrameMap>,
}

impl ProgramFrames {
    pub fn infer(program: &Program) -> Result<ProgramFrames, FrameError> {
        let mut per_method = BTreeMap::new();
        for m in &program.methods {
            per_method.insert(m.sig.to_string(), infer_frames(m, program)?);
        }
        Ok(ProgramFrames { per_method })
    }

    pub fn of_method(&self, m: &Method) -> &FrameMap {
        &self.per_method[&m.sig.to_string()]
    }

    /// Frame at the start of a block, searching all methods.
    pub fn block_entry(&self, block: &str) -> Option<&Frame> {
        self.per_method.values().find_map(|fm| fm.entry_frame(block))
    }
}

fn err(block: &str, index: usize, msg: impl Into<String>) -> FrameError {
    FrameError {
        block: block.to_string(),
        index,
        msg: msg.into(),
    }
}

fn pop(frame: &mut Frame, block: &str, index: usize) -> Result<SlotTy, FrameError> {
    frame
        .stack
        .pop()
        .ok_or_else(|| err(block, index, "stack underflow"))
}

fn pop_int(frame: &mut Frame, block: &str, index: usize) -> Result<(), FrameError> {
    match pop(frame, block, index)? {
        SlotTy::Int => Ok(()),
        other => Err(err(block, index, format!("expected int on stack, found {other}"))),
    }
}

/// Type-level effect of a non-call instruction, for synthetic frames.
pub fn instruction_effect(frame: &Frame, ins: &Instruction) -> Result<Frame, FrameError> {
    assert!(!ins.is_call(), "instruction_effect does not handle call");
    apply(frame, ins, &Program::default(), "<synthetic>", 0)
}

/// Apply one instruction's type-level effect.
fn apply(
    frame: &Frame,
    ins: &Instruction,
    program: &Program,
    block: &str,
    index: usize,
) -> Result<Frame, FrameError> {
    let mut f = frame.clone();
    match ins {
        Instruction::Const(super::ConstVal::Int(_)) => f.stack.push(SlotTy::Int),
        Instruction::Const(super::ConstVal::Null) => f.stack.push(SlotTy::Null),
        Instruction::Dup => {
            let top = f
                .stack
                .last()
                .cloned()
                .ok_or_else(|| err(block, index, "stack underflow"))?;
            f.stack.push(top);
        }
        Instruction::New(c) => f.stack.push(SlotTy::Class(c.clone())),
        Instruction::Load(i) => {
            let t = f
                .locals
                .get(*i)
                .cloned()
                .ok_or_else(|| err(block, index, format!("load index {i} out of range")))?;
            f.stack.push(t);
        }
        Instruction::Store(i) => {
            let v = pop(&mut f, block, index)?;
            if *i >= f.locals.len() {
                return Err(err(block, index, format!("store index {i} out of range")));
            }
            f.locals[*i] = v;
        }
        Instruction::Add => {
            pop_int(&mut f, block, index)?;
            pop_int(&mut f, block, index)?;
            f.stack.push(SlotTy::Int);
        }
        Instruction::PutfieldInt(fr) => {
            pop_int(&mut f, block, index)?;
            match pop(&mut f, block, index)? {
                SlotTy::Class(c) if c == fr.class => {}
                SlotTy::Null => {}
                other => {
                    return Err(err(
                        block,
                        index,
                        format!("putfield receiver must be {}, found {other}", fr.class),
                    ))
                }
            }
        }
        Instruction::IfEq(t) | Instruction::IfNe(t) => {
            let top = pop(&mut f, block, index)?;
            if !top.matches(t) {
                return Err(err(
                    block,
                    index,
                    format!("guard of type {t} applied to {top} slot"),
                ));
            }
        }
        Instruction::IfLt | Instruction::IfLe | Instruction::IfGt | Instruction::IfGe => {
            pop_int(&mut f, block, index)?;
        }
        Instruction::Pop => {
            pop(&mut f, block, index)?;
        }
        Instruction::Call { sig, is_static } => {
            let callee = program.resolve(sig).ok_or_else(|| {
                err(block, index, format!("call target {sig} does not resolve"))
            })?;
            debug_assert_eq!(callee.is_static, *is_static);
            let total = sig.params.len() + usize::from(!is_static);
            if f.stack.len() < total {
                return Err(err(block, index, "stack underflow at call"));
            }
            // Topmost actual is the last explicit parameter; the receiver
            // (non-static) sits deepest.
            for k in (0..sig.params.len()).rev() {
                let got = pop(&mut f, block, index)?;
                if !got.matches(&sig.params[k]) {
                    return Err(err(
                        block,
                        index,
                        format!("argument {k} of {sig} expects {}, found {got}", sig.params[k]),
                    ));
                }
            }
            if !is_static {
                let recv = pop(&mut f, block, index)?;
                if !recv.matches(&Ty::Class(sig.class.clone())) {
                    return Err(err(
                        block,
                        index,
                        format!("receiver of {sig} must be {}, found {recv}", sig.class),
                    ));
                }
            }
            if let Some(ret) = &sig.ret {
                f.stack.push(SlotTy::from(ret));
            }
        }
    }
    Ok(f)
}

/// Forward dataflow from the entry frame. The result is independent of
/// block iteration order because joins demand exact frame equality.
pub fn infer_frames(method: &Method, program: &Program) -> Result<FrameMap, FrameError> {
    let mut map = FrameMap::default();
    let entry_frame = Frame {
        locals: method.entry_locals(),
        stack: Vec::new(),
    };
    let mut in_frames: BTreeMap<String, Frame> = BTreeMap::new();
    in_frames.insert(method.entry.clone(), entry_frame);
    let mut queue: VecDeque<String> = VecDeque::new();
    queue.push_back(method.entry.clone());
    let mut done: BTreeMap<String, bool> = BTreeMap::new();

    while let Some(bid) = queue.pop_front() {
        if done.get(&bid).copied().unwrap_or(false) {
            continue;
        }
        done.insert(bid.clone(), true);
        let block = method
            .block(&bid)
            .ok_or_else(|| err(&bid, 0, "successor does not resolve in this method"))?;
        let mut frame = in_frames[&bid].clone();
        for (i, ins) in block.instructions.iter().enumerate() {
            map.at.insert((bid.clone(), i), frame.clone());
            frame = apply(&frame, ins, program, &bid, i)?;
        }
        map.end.insert(bid.clone(), frame.clone());
        for succ in &block.successors {
            match in_frames.get(succ) {
                None => {
                    in_frames.insert(succ.clone(), frame.clone());
                    queue.push_back(succ.clone());
                }
                Some(existing) => {
                    if existing != &frame {
                        return Err(err(
                            succ,
                            0,
                            format!(
                                "frame mismatch at join: one predecessor gives {existing}, another {frame}"
                            ),
                        ));
                    }
                }
            }
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::parse_program;

    #[test]
    fn minimal_int_method_is_accepted() {
        let p = parse_program(
            "method static A.one():int entry e { block e { const 1 } -> }",
        )
        .unwrap();
        let fm = infer_frames(&p.methods[0], &p).unwrap();
        assert_eq!(fm.end["e"].stack.len(), 1);
    }

    #[test]
    fn join_height_mismatch_is_rejected() {
        // Two predecessors reach j with stack heights 1 and 2.
        let p = parse_program(
            r#"
method static A.f(int):int entry e {
  block e  { load 0 } -> a b
  block a  { ifeq int ; const 1 } -> j
  block b  { ifgt ; const 1 ; const 2 } -> j
  block j  { pop } ->
}
"#,
        )
        .unwrap();
        let e = infer_frames(&p.methods[0], &p).unwrap_err();
        assert!(e.msg.contains("frame mismatch"), "{e}");
    }

    #[test]
    fn add_on_reference_slot_is_a_type_error() {
        let p = parse_program(
            "method static A.f(A):int entry e { block e { load 0 ; load 0 ; add } -> }",
        )
        .unwrap();
        let e = infer_frames(&p.methods[0], &p).unwrap_err();
        assert!(e.msg.contains("expected int"), "{e}");
    }

    #[test]
    fn inference_is_independent_of_block_declaration_order() {
        let src_a = r#"
method static A.f(int):int entry e {
  block e { load 0 } -> x y
  block x { ifeq int ; const 0 } ->
  block y { ifgt ; const 1 } ->
}
"#;
        let src_b = r#"
method static A.f(int):int entry e {
  block y { ifgt ; const 1 } ->
  block x { ifeq int ; const 0 } ->
  block e { load 0 } -> x y
}
"#;
        let pa = parse_program(src_a).unwrap();
        let pb = parse_program(src_b).unwrap();
        let fa = infer_frames(&pa.methods[0], &pa).unwrap();
        let fb = infer_frames(&pb.methods[0], &pb).unwrap();
        assert_eq!(fa.at, fb.at);
        assert_eq!(fa.end, fb.end);
    }
}
