//! Constrained-clause generation: every block becomes a predicate, control
//! flow becomes clauses with at most two body atoms, and the block-local
//! instruction effects become the clause constraint. Calls are not
//! abstracted; they turn into an atom for the callee's entry predicate.

use crate::polyhedra::Polyhedron;
use std::collections::BTreeMap;
use std::fmt;

mod canon;
mod compile;
mod json;
mod text;

pub use canon::{alpha_equivalent, canonical_key, CanonClause};
pub use compile::{compile_block, compile_program, CompileError, CompileOptions};
pub use json::{clp_from_json, clp_to_json};
pub use text::{emit_clause, emit_clp, parse_clause, parse_clp, ClpParseError};

use crate::polyhedra::VarId;

/// A predicate applied to variables, e.g. `b1(ol0, os0, rout_sum)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<VarId>,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// `head :- constraint, body.` with 0, 1 or 2 body atoms. The constraint
/// may mention variables outside head and body; they are internal
/// connectives, read existentially.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub head: Atom,
    pub constraint: Polyhedron,
    pub body: Vec<Atom>,
}

impl Clause {
    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    /// Recursive binary clause: exactly one body atom with the head's
    /// predicate.
    pub fn is_recursive(&self) -> bool {
        self.body.len() == 1 && self.body[0].pred == self.head.pred
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&emit_clause(self))
    }
}

/// The clause image of a program plus the entry predicate of each method.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClpProgram {
    pub clauses: Vec<Clause>,
    /// Qualified method name (`Class.method`) to entry predicate.
    pub entries: BTreeMap<String, String>,
}

impl ClpProgram {
    pub fn clauses_for(&self, pred: &str) -> impl Iterator<Item = &Clause> {
        let p = pred.to_string();
        self.clauses.iter().filter(move |c| c.head.pred == p)
    }
}

impl fmt::Display for ClpProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&emit_clp(self))
    }
}
