//! Non-termination analysis for a small stack-based bytecode.
//!
//! The pipeline: parse a textual bytecode program, verify its block/frame
//! structure, compile every block into constrained Horn clauses over
//! path-length variables, compress derivations with binary unfolding, and
//! search the resulting binary clauses for reachable recurrent loops. A
//! bounded concrete interpreter doubles as ground truth for the constraint
//! abstraction and for corroborating non-termination witnesses.

pub mod abstraction;
pub mod binunf;
pub mod bytecode;
pub mod clpexec;
pub mod clpgen;
pub mod interpreter;
pub mod nonterm;
pub mod polyhedra;

pub use bytecode::{Block, Instruction, Method, MethodSig, Program, Ty};
pub use clpgen::{Atom, Clause, ClpProgram};
pub use interpreter::{Heap, RunOutcome, State, Value};
pub use nonterm::{Verdict, Witness};
pub use polyhedra::{Assignment, LinearConstraint, Polyhedron, VarId};
