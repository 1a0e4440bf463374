//! Concrete operational semantics: machine states, the path-length
//! function, a bounded interpreter over the nondeterministic successor
//! relation, and construction of states realizing a given path-length
//! assignment.
//!
//! Integer arithmetic is unbounded; overflow-induced behavior is out of
//! scope by design.

use num_bigint::BigInt;
use std::collections::BTreeMap;
use std::fmt;

mod build;
mod machine;

pub use build::{build_state, input_assignment, output_assignment, AssignmentError, BuildStateError, CHAIN_FIELD};
pub use machine::{exec_instruction, run_bounded, step, ExecResult, Machine, RunOutcome, StepError, Successors};

/// A machine value: integer, heap location or null.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(BigInt),
    Loc(usize),
    Null,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Loc(l) => write!(f, "loc{l}"),
            Value::Null => write!(f, "null"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Object {
    pub class: String,
    pub fields: BTreeMap<String, Value>,
}

/// Maps locations to objects; allocation hands out consecutive ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Heap {
    objects: BTreeMap<usize, Object>,
    next: usize,
}

impl Heap {
    pub fn alloc(&mut self, object: Object) -> usize {
        let id = self.next;
        self.next += 1;
        self.objects.insert(id, object);
        id
    }

    pub fn get(&self, loc: usize) -> Option<&Object> {
        self.objects.get(&loc)
    }

    pub fn get_mut(&mut self, loc: usize) -> Option<&mut Object> {
        self.objects.get_mut(&loc)
    }

    pub fn locations(&self) -> impl Iterator<Item = usize> + '_ {
        self.objects.keys().copied()
    }
}

/// `<locals || stack || heap>`; `stack[0]` is the base of the operand stack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub locals: Vec<Value>,
    pub stack: Vec<Value>,
    pub heap: Heap,
}

impl State {
    pub fn new(locals: Vec<Value>, stack: Vec<Value>, heap: Heap) -> State {
        State {
            locals,
            stack,
            heap,
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |vs: &[Value]| {
            vs.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "[{}] | [{}]", join(&self.locals), join(&self.stack))
    }
}

/// A path length: a finite integer or infinity (cyclic heap chains).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Len {
    Fin(BigInt),
    Inf,
}

impl Len {
    pub fn finite(&self) -> Option<&BigInt> {
        match self {
            Len::Fin(n) => Some(n),
            Len::Inf => None,
        }
    }
}

impl fmt::Display for Len {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Len::Fin(n) => write!(f, "{n}"),
            Len::Inf => write!(f, "inf"),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("dangling location loc{0}")]
pub struct DanglingLocation(pub usize);

/// The path length of a value: the integer itself for ints, 0 for null,
/// and the maximal number of locations on any reference chain from a
/// location (the location itself counts as 1; cycles give infinity).
pub fn len(v: &Value, heap: &Heap) -> Result<Len, DanglingLocation> {
    match v {
        Value::Int(n) => Ok(Len::Fin(n.clone())),
        Value::Null => Ok(Len::Fin(BigInt::from(0))),
        Value::Loc(l) => {
            let mut memo: BTreeMap<usize, Option<BigInt>> = BTreeMap::new();
            fn go(
                loc: usize,
                heap: &Heap,
                memo: &mut BTreeMap<usize, Option<BigInt>>,
            ) -> Result<Len, DanglingLocation> {
                match memo.get(&loc) {
                    Some(Some(n)) => return Ok(Len::Fin(n.clone())),
                    Some(None) => return Ok(Len::Inf), // back edge: cycle
                    None => {}
                }
                let obj = heap.get(loc).ok_or(DanglingLocation(loc))?;
                memo.insert(loc, None);
                let mut best = BigInt::from(0);
                for v in obj.fields.values() {
                    if let Value::Loc(next) = v {
                        match go(*next, heap, memo)? {
                            Len::Inf => {
                                return Ok(Len::Inf);
                            }
                            Len::Fin(n) => best = best.max(n),
                        }
                    }
                }
                let total: BigInt = best + 1;
                memo.insert(loc, Some(total.clone()));
                Ok(Len::Fin(total))
            }
            go(*l, heap, &mut memo)
        }
    }
}
