//! Construction of a concrete state realizing a path-length assignment,
//! and the input/output path-length assignments of a state.
//!
//! Integer slots take the assigned value directly. A class-typed slot with
//! value 0 becomes null; with value n >= 1 it becomes a fresh acyclic chain
//! of n objects linked through a dummy field of the slot's own class, so
//! the slot's path length is exactly n.

use super::{len, DanglingLocation, Heap, Len, Object, State, Value};
use crate::bytecode::{Frame, SlotTy, Ty};
use crate::polyhedra::{Assignment, VarId};
use num_bigint::BigInt;
use num_traits::Signed;
use std::collections::BTreeMap;
use thiserror::Error;

/// Name of the synthetic chain field added to realize reference lengths.
pub const CHAIN_FIELD: &str = "__next";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildStateError {
    #[error("no value assigned to {0}")]
    MissingAssignment(VarId),
    #[error("reference slot {0} assigned negative length {1}")]
    NegativeReference(VarId, BigInt),
    #[error("null-typed slot {0} must have length 0, got {1}")]
    NullSlot(VarId, BigInt),
    #[error("reference slot {0} assigned non-representable length {1}")]
    LengthTooLarge(VarId, BigInt),
}

fn chain(heap: &mut Heap, class: &str, n: u64, classes: &BTreeMap<String, Vec<(String, Ty)>>) -> Value {
    let declared = classes.get(class).cloned().unwrap_or_default();
    let mut next = Value::Null;
    for _ in 0..n {
        let mut fields: BTreeMap<String, Value> = declared
            .iter()
            .map(|(f, t)| {
                let v = match t {
                    Ty::Int => Value::Int(BigInt::from(0)),
                    Ty::Class(_) => Value::Null,
                };
                (f.clone(), v)
            })
            .collect();
        fields.insert(CHAIN_FIELD.to_string(), next.clone());
        let loc = heap.alloc(Object {
            class: class.to_string(),
            fields,
        });
        next = Value::Loc(loc);
    }
    next
}

/// Build a state compatible with `frame` whose input path-length assignment
/// equals `rho` on the frame's `il`/`is` variables.
pub fn build_state(
    rho: &Assignment,
    frame: &Frame,
    classes: &BTreeMap<String, Vec<(String, Ty)>>,
) -> Result<State, BuildStateError> {
    let mut heap = Heap::default();
    let slot = |var: VarId, ty: &SlotTy, heap: &mut Heap| -> Result<Value, BuildStateError> {
        let n = rho
            .get(&var)
            .cloned()
            .ok_or_else(|| BuildStateError::MissingAssignment(var.clone()))?;
        match ty {
            SlotTy::Int => Ok(Value::Int(n)),
            SlotTy::Null => {
                if n.is_negative() || n.is_positive() {
                    Err(BuildStateError::NullSlot(var, n))
                } else {
                    Ok(Value::Null)
                }
            }
            SlotTy::Class(c) => {
                if n.is_negative() {
                    return Err(BuildStateError::NegativeReference(var, n));
                }
                let k = u64::try_from(&n).map_err(|_| BuildStateError::LengthTooLarge(var, n))?;
                Ok(chain(heap, c, k, classes))
            }
        }
    };
    let mut locals = Vec::new();
    for (k, ty) in frame.locals.iter().enumerate() {
        locals.push(slot(VarId::InL(k as u32), ty, &mut heap)?);
    }
    let mut stack = Vec::new();
    for (k, ty) in frame.stack.iter().enumerate() {
        stack.push(slot(VarId::InS(k as u32), ty, &mut heap)?);
    }
    Ok(State::new(locals, stack, heap))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssignmentError {
    #[error(transparent)]
    Dangling(#[from] DanglingLocation),
    #[error("slot has infinite path length")]
    Infinite,
}

fn lengths(
    state: &State,
    mk_local: impl Fn(u32) -> VarId,
    mk_stack: impl Fn(u32) -> VarId,
) -> Result<Assignment, AssignmentError> {
    let mut asg = Assignment::new();
    for (k, v) in state.locals.iter().enumerate() {
        match len(v, &state.heap)? {
            Len::Fin(n) => {
                asg.insert(mk_local(k as u32), n);
            }
            Len::Inf => return Err(AssignmentError::Infinite),
        }
    }
    for (k, v) in state.stack.iter().enumerate() {
        match len(v, &state.heap)? {
            Len::Fin(n) => {
                asg.insert(mk_stack(k as u32), n);
            }
            Len::Inf => return Err(AssignmentError::Infinite),
        }
    }
    Ok(asg)
}

/// Path lengths of a state read as a denotation input (`il`/`is` variables).
pub fn input_assignment(state: &State) -> Result<Assignment, AssignmentError> {
    lengths(state, VarId::InL, VarId::InS)
}

/// Path lengths of a state read as a denotation output (`ol`/`os` variables).
pub fn output_assignment(state: &State) -> Result<Assignment, AssignmentError> {
    lengths(state, VarId::OutL, VarId::OutS)
}
