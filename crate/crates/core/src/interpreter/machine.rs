//! Instruction execution and the bounded interpreter.
//!
//! A block's successors are guarded alternatives; the interpreter explores
//! all of them depth-first under a shared step budget. Calls run the callee
//! to completion and fork on its exit states; infinite recursion therefore
//! burns budget instead of the machine stack.

use super::{Object, State, Value};
use crate::bytecode::{Block, ConstVal, Instruction, Method, Program, Ty};
use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

/// Internal bug guard: a validated program can only trip these through a
/// frame-inference defect.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum StepError {
    #[error("frame mismatch at {block}:{index}: {msg}")]
    FrameMismatch {
        block: String,
        index: usize,
        msg: String,
    },
    #[error("block `{0}` does not resolve")]
    UnknownBlock(String),
}

/// Result of executing one non-call instruction.
#[derive(Debug, PartialEq, Eq)]
pub enum ExecResult {
    Next(State),
    /// A failed guard or a null dereference: the computation stops.
    Stuck,
}

/// Execute a single non-call instruction. Guards pop and test; `putfield`
/// on a null receiver is stuck.
pub fn exec_instruction(ins: &Instruction, state: &State) -> Result<ExecResult, StepError> {
    let bug = |msg: &str| StepError::FrameMismatch {
        block: String::new(),
        index: 0,
        msg: msg.to_string(),
    };
    let mut st = state.clone();
    let pop = |st: &mut State| st.stack.pop().ok_or_else(|| bug("stack underflow"));
    match ins {
        Instruction::Const(ConstVal::Int(c)) => st.stack.push(Value::Int(BigInt::from(*c))),
        Instruction::Const(ConstVal::Null) => st.stack.push(Value::Null),
        Instruction::Dup => {
            let top = st.stack.last().cloned().ok_or_else(|| bug("stack underflow"))?;
            st.stack.push(top);
        }
        Instruction::New(class) => {
            let obj = Object {
                class: class.clone(),
                fields: Default::default(),
            };
            let loc = st.heap.alloc(obj);
            st.stack.push(Value::Loc(loc));
        }
        Instruction::Load(i) => {
            let v = st.locals.get(*i).cloned().ok_or_else(|| bug("load out of range"))?;
            st.stack.push(v);
        }
        Instruction::Store(i) => {
            let v = pop(&mut st)?;
            if *i >= st.locals.len() {
                return Err(bug("store out of range"));
            }
            st.locals[*i] = v;
        }
        Instruction::Add => {
            let x = pop(&mut st)?;
            let y = pop(&mut st)?;
            match (x, y) {
                (Value::Int(a), Value::Int(b)) => st.stack.push(Value::Int(a + b)),
                _ => return Err(bug("add on non-int slots")),
            }
        }
        Instruction::PutfieldInt(fr) => {
            let v = pop(&mut st)?;
            let recv = pop(&mut st)?;
            match recv {
                Value::Null => return Ok(ExecResult::Stuck),
                Value::Loc(l) => {
                    let obj = st.heap.get_mut(l).ok_or_else(|| bug("dangling receiver"))?;
                    obj.fields.insert(fr.field.clone(), v);
                }
                Value::Int(_) => return Err(bug("putfield on int receiver")),
            }
        }
        Instruction::IfEq(t) => {
            let top = pop(&mut st)?;
            let pass = match (t, top) {
                (Ty::Int, Value::Int(n)) => n.is_zero(),
                (Ty::Class(_), Value::Null) => true,
                (Ty::Class(_), Value::Loc(_)) => false,
                _ => return Err(bug("ifeq type mismatch")),
            };
            if !pass {
                return Ok(ExecResult::Stuck);
            }
        }
        Instruction::IfNe(t) => {
            let top = pop(&mut st)?;
            let pass = match (t, top) {
                (Ty::Int, Value::Int(n)) => !n.is_zero(),
                (Ty::Class(_), Value::Null) => false,
                (Ty::Class(_), Value::Loc(_)) => true,
                _ => return Err(bug("ifne type mismatch")),
            };
            if !pass {
                return Ok(ExecResult::Stuck);
            }
        }
        Instruction::IfLt | Instruction::IfLe | Instruction::IfGt | Instruction::IfGe => {
            let Value::Int(n) = pop(&mut st)? else {
                return Err(bug("int guard on non-int slot"));
            };
            let pass = match ins {
                Instruction::IfLt => n < BigInt::zero(),
                Instruction::IfLe => n <= BigInt::zero(),
                Instruction::IfGt => n > BigInt::zero(),
                Instruction::IfGe => n >= BigInt::zero(),
                _ => unreachable!(),
            };
            if !pass {
                return Ok(ExecResult::Stuck);
            }
        }
        Instruction::Pop => {
            pop(&mut st)?;
        }
        Instruction::Call { .. } => {
            return Err(bug("exec_instruction does not handle call"));
        }
    }
    Ok(ExecResult::Next(st))
}

/// Outcome of a bounded run.
#[derive(Debug, PartialEq, Eq)]
pub enum RunOutcome {
    /// Every surviving path reached a no-successor block end in budget.
    Halted(Vec<State>),
    /// All paths died on failed guards or null dereferences.
    Stuck,
    /// Some path exceeded the step budget; reports the steps consumed.
    BudgetExceeded(u64),
}

enum Flow {
    Finals(Vec<State>),
    AllStuck,
    Exceeded,
}

pub struct Machine<'p> {
    program: &'p Program,
    fuel: u64,
    used: u64,
    pub trace: Option<Vec<String>>,
}

impl<'p> Machine<'p> {
    pub fn new(program: &'p Program, budget: u64, with_trace: bool) -> Machine<'p> {
        Machine {
            program,
            fuel: budget,
            used: 0,
            trace: if with_trace { Some(Vec::new()) } else { None },
        }
    }

    pub fn steps_used(&self) -> u64 {
        self.used
    }

    fn spend(&mut self) -> bool {
        if self.fuel == 0 {
            return false;
        }
        self.fuel -= 1;
        self.used += 1;
        true
    }

    fn run_from(
        &mut self,
        method: &Method,
        block: &Block,
        start: usize,
        state: State,
    ) -> Result<Flow, StepError> {
        let mut state = state;
        // Straight-line stepping is iterative; only calls (which fork on
        // the callee's exit states) and block successors recurse.
        for index in start..block.instructions.len() {
            if !self.spend() {
                return Ok(Flow::Exceeded);
            }
            let ins = &block.instructions[index];
            if let Some(trace) = &mut self.trace {
                trace.push(format!("{}:{} {} | {}", block.id, index, ins, state));
            }
            if let Instruction::Call { sig, is_static } = ins {
                let callee =
                    self.program
                        .resolve(sig)
                        .ok_or_else(|| StepError::FrameMismatch {
                            block: block.id.clone(),
                            index,
                            msg: format!("unresolved call {sig}"),
                        })?;
                let total = sig.params.len() + usize::from(!is_static);
                if state.stack.len() < total {
                    return Err(StepError::FrameMismatch {
                        block: block.id.clone(),
                        index,
                        msg: "stack underflow at call".into(),
                    });
                }
                let mut caller = state;
                let args = caller.stack.split_off(caller.stack.len() - total);
                if !is_static && args[0] == Value::Null {
                    return Ok(Flow::AllStuck);
                }
                let callee_entry = callee
                    .block(&callee.entry)
                    .ok_or_else(|| StepError::UnknownBlock(callee.entry.clone()))?;
                let callee_state = State::new(args, Vec::new(), caller.heap.clone());
                return match self.run_from(callee, callee_entry, 0, callee_state)? {
                    Flow::Exceeded => Ok(Flow::Exceeded),
                    Flow::AllStuck => Ok(Flow::AllStuck),
                    Flow::Finals(exits) => {
                        let mut finals = Vec::new();
                        for mut exit in exits {
                            let mut post = caller.clone();
                            post.heap = exit.heap;
                            if sig.ret.is_some() {
                                let ret =
                                    exit.stack.pop().ok_or_else(|| StepError::FrameMismatch {
                                        block: block.id.clone(),
                                        index,
                                        msg: "callee exit stack empty".into(),
                                    })?;
                                post.stack.push(ret);
                            }
                            match self.run_from(method, block, index + 1, post)? {
                                Flow::Exceeded => return Ok(Flow::Exceeded),
                                Flow::AllStuck => {}
                                Flow::Finals(fs) => finals.extend(fs),
                            }
                        }
                        Ok(if finals.is_empty() {
                            Flow::AllStuck
                        } else {
                            Flow::Finals(finals)
                        })
                    }
                };
            }
            match exec_instruction(ins, &state).map_err(|e| match e {
                StepError::FrameMismatch { msg, .. } => StepError::FrameMismatch {
                    block: block.id.clone(),
                    index,
                    msg,
                },
                other => other,
            })? {
                ExecResult::Stuck => return Ok(Flow::AllStuck),
                ExecResult::Next(next) => state = next,
            }
        }
        // Block end: return, or fan out over successor alternatives.
        if block.successors.is_empty() {
            return Ok(Flow::Finals(vec![state]));
        }
        let mut finals = Vec::new();
        for succ in &block.successors {
            let sb = method
                .block(succ)
                .ok_or_else(|| StepError::UnknownBlock(succ.clone()))?;
            match self.run_from(method, sb, 0, state.clone())? {
                Flow::Exceeded => return Ok(Flow::Exceeded),
                Flow::AllStuck => {}
                Flow::Finals(fs) => finals.extend(fs),
            }
        }
        Ok(if finals.is_empty() {
            Flow::AllStuck
        } else {
            Flow::Finals(finals)
        })
    }

    pub fn run(&mut self, entry_block: &str, state: State) -> Result<RunOutcome, StepError> {
        let method = self
            .program
            .method_of_block(entry_block)
            .ok_or_else(|| StepError::UnknownBlock(entry_block.to_string()))?;
        let block = method.block(entry_block).unwrap();
        Ok(match self.run_from(method, block, 0, state)? {
            Flow::Finals(fs) => RunOutcome::Halted(fs),
            Flow::AllStuck => RunOutcome::Stuck,
            Flow::Exceeded => RunOutcome::BudgetExceeded(self.used),
        })
    }
}

/// Depth-first exploration of all guard-compatible paths from a block.
///
/// Recursion depth grows with the interpreted call and branch depth, so
/// the exploration runs on a dedicated thread with a stack sized to the
/// budget.
pub fn run_bounded(
    program: &Program,
    entry_block: &str,
    state: State,
    budget: u64,
) -> Result<RunOutcome, StepError> {
    let stack_size = budget.saturating_mul(2_048).clamp(8 << 20, 1 << 30) as usize;
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(stack_size)
            .spawn_scoped(scope, move || {
                Machine::new(program, budget, false).run(entry_block, state)
            })
            .expect("spawn interpreter thread")
            .join()
            .expect("interpreter thread panicked")
    })
}

/// Program points paired with the states that reach them.
pub type Successors = Vec<((String, usize), State)>;

/// Single-step successor relation at instruction granularity. Executing the
/// final instruction of a block yields one pair per successor block; a
/// no-successor block end yields the empty set (method return).
pub fn step(
    program: &Program,
    point: (&str, usize),
    state: &State,
) -> Result<Option<Successors>, StepError> {
    let (block_id, index) = point;
    let method = program
        .method_of_block(block_id)
        .ok_or_else(|| StepError::UnknownBlock(block_id.to_string()))?;
    let block = method.block(block_id).unwrap();
    assert!(
        !block.instructions[index].is_call(),
        "step does not expand calls; use run_bounded"
    );
    match exec_instruction(&block.instructions[index], state)? {
        ExecResult::Stuck => Ok(None),
        ExecResult::Next(next) => {
            if index + 1 < block.instructions.len() {
                Ok(Some(vec![((block_id.to_string(), index + 1), next)]))
            } else {
                Ok(Some(
                    block
                        .successors
                        .iter()
                        .map(|s| ((s.clone(), 0), next.clone()))
                        .collect(),
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpreter::Heap;

    fn int(n: i64) -> Value {
        Value::Int(BigInt::from(n))
    }

    #[test]
    fn dup_duplicates_the_top() {
        let st = State::new(vec![], vec![int(1), int(7)], Heap::default());
        let ExecResult::Next(next) = exec_instruction(&Instruction::Dup, &st).unwrap() else {
            panic!("dup is total");
        };
        assert_eq!(next.stack, vec![int(1), int(7), int(7)]);
    }

    #[test]
    fn ifeq_passes_on_zero_and_sticks_otherwise() {
        let pass = State::new(vec![], vec![int(0)], Heap::default());
        assert!(matches!(
            exec_instruction(&Instruction::IfEq(Ty::Int), &pass).unwrap(),
            ExecResult::Next(_)
        ));
        let fail = State::new(vec![], vec![int(7)], Heap::default());
        assert_eq!(
            exec_instruction(&Instruction::IfEq(Ty::Int), &fail).unwrap(),
            ExecResult::Stuck
        );
    }

    #[test]
    fn putfield_on_null_receiver_is_stuck() {
        let st = State::new(vec![], vec![Value::Null, int(3)], Heap::default());
        let ins = Instruction::PutfieldInt(crate::bytecode::FieldRef {
            class: "C".into(),
            field: "f".into(),
        });
        assert_eq!(exec_instruction(&ins, &st).unwrap(), ExecResult::Stuck);
    }

    #[test]
    fn straight_line_block_halts_in_one_step() {
        let p = crate::bytecode::parse_program(
            "method static A.f():int entry e { block e { const 0 } -> }",
        )
        .unwrap();
        let out = run_bounded(&p, "e", State::new(vec![], vec![], Heap::default()), 10).unwrap();
        match out {
            RunOutcome::Halted(fs) => {
                assert_eq!(fs.len(), 1);
                assert_eq!(fs[0].stack, vec![int(0)]);
            }
            other => panic!("expected halt, got {other:?}"),
        }
    }
}

#[cfg(test)]
mod step_tests {
    use super::*;
    use crate::interpreter::Heap;
    use num_bigint::BigInt;

    #[test]
    fn final_instruction_fans_out_over_successors() {
        let p = crate::bytecode::parse_program(
            r#"
method static A.f(int):int entry e {
  block e { load 0 } -> x y
  block x { ifeq int ; const 0 } ->
  block y { ifgt ; const 1 } ->
}
"#,
        )
        .unwrap();
        let st = State::new(vec![Value::Int(BigInt::from(3))], vec![], Heap::default());
        let succ = step(&p, ("e", 0), &st).unwrap().unwrap();
        assert_eq!(succ.len(), 2);
        assert_eq!(succ[0].0, ("x".to_string(), 0));
        assert_eq!(succ[1].0, ("y".to_string(), 0));
        // a failed guard yields no successor
        let stuck = State::new(vec![], vec![Value::Int(BigInt::from(7))], Heap::default());
        assert_eq!(step(&p, ("x", 0), &stuck).unwrap(), None);
        // a method exit yields the empty successor set
        let fin = State::new(vec![], vec![], Heap::default());
        let out = step(&p, ("x", 1), &fin).unwrap().unwrap();
        assert!(out.is_empty());
    }
}
