//! The bytecode IR: programs are graphs of blocks of instructions, one
//! subgraph per method. Values are integers, object references or null;
//! the instruction set is the nine-instruction fragment plus `pop` and the
//! front-end-only `ifne` (desugared into an `iflt`/`ifgt` disjunction).

use std::collections::BTreeMap;
use std::fmt;

mod desugar;
mod emit;
mod frames;
mod parse;
mod validate;

pub use desugar::{desugar_ifne, DesugarError};
pub use emit::emit_program;
pub use frames::{infer_frames, instruction_effect, Frame, FrameError, FrameMap, ProgramFrames};
pub use parse::{parse_program, ParseError};
pub use validate::{validate, ValidationReport, Violation};

/// A declared type: `int` or a class.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ty {
    Int,
    Class(String),
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Int => f.write_str("int"),
            Ty::Class(c) => f.write_str(c),
        }
    }
}

/// The type of a frame slot. `Null` is the type of a freshly pushed `null`
/// constant; it is compatible with every class type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotTy {
    Int,
    Class(String),
    Null,
}

impl SlotTy {
    pub fn is_reference(&self) -> bool {
        !matches!(self, SlotTy::Int)
    }

    pub fn matches(&self, ty: &Ty) -> bool {
        match (self, ty) {
            (SlotTy::Int, Ty::Int) => true,
            (SlotTy::Class(a), Ty::Class(b)) => a == b,
            (SlotTy::Null, Ty::Class(_)) => true,
            _ => false,
        }
    }
}

impl From<&Ty> for SlotTy {
    fn from(t: &Ty) -> SlotTy {
        match t {
            Ty::Int => SlotTy::Int,
            Ty::Class(c) => SlotTy::Class(c.clone()),
        }
    }
}

impl fmt::Display for SlotTy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotTy::Int => f.write_str("int"),
            SlotTy::Class(c) => f.write_str(c),
            SlotTy::Null => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstVal {
    Int(i64),
    Null,
}

/// `putfield Class.field:int` target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldRef {
    pub class: String,
    pub field: String,
}

/// A method signature `Class.name(params):ret`; `ret == None` means void.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSig {
    pub class: String,
    pub name: String,
    pub params: Vec<Ty>,
    pub ret: Option<Ty>,
}

impl MethodSig {
    /// `Class.name` without the parameter list.
    pub fn qualified_name(&self) -> String {
        format!("{}.{}", self.class, self.name)
    }
}

impl fmt::Display for MethodSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}(", self.class, self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "):")?;
        match &self.ret {
            Some(t) => write!(f, "{t}"),
            None => write!(f, "void"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instruction {
    Const(ConstVal),
    Dup,
    New(String),
    Load(usize),
    Store(usize),
    Add,
    PutfieldInt(FieldRef),
    IfEq(Ty),
    IfLt,
    IfLe,
    IfGt,
    IfGe,
    /// Front-end only; replaced by an `iflt`/`ifgt` block disjunction.
    IfNe(Ty),
    Pop,
    Call {
        sig: MethodSig,
        is_static: bool,
    },
}

impl Instruction {
    pub fn is_call(&self) -> bool {
        matches!(self, Instruction::Call { .. })
    }

    pub fn mnemonic(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Const(ConstVal::Int(c)) => write!(f, "const {c}"),
            Instruction::Const(ConstVal::Null) => write!(f, "const null"),
            Instruction::Dup => write!(f, "dup"),
            Instruction::New(c) => write!(f, "new {c}"),
            Instruction::Load(i) => write!(f, "load {i}"),
            Instruction::Store(i) => write!(f, "store {i}"),
            Instruction::Add => write!(f, "add"),
            Instruction::PutfieldInt(fr) => write!(f, "putfield {}.{}:int", fr.class, fr.field),
            Instruction::IfEq(t) => write!(f, "ifeq {t}"),
            Instruction::IfLt => write!(f, "iflt"),
            Instruction::IfLe => write!(f, "ifle"),
            Instruction::IfGt => write!(f, "ifgt"),
            Instruction::IfGe => write!(f, "ifge"),
            Instruction::IfNe(t) => write!(f, "ifne {t}"),
            Instruction::Pop => write!(f, "pop"),
            Instruction::Call { sig, is_static } => {
                if *is_static {
                    write!(f, "call static {sig}")
                } else {
                    write!(f, "call {sig}")
                }
            }
        }
    }
}

/// A basic block: a non-empty instruction list plus an ordered successor
/// list. A block with no successors is a method exit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub id: String,
    pub instructions: Vec<Instruction>,
    pub successors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Method {
    pub sig: MethodSig,
    pub is_static: bool,
    pub entry: String,
    pub blocks: Vec<Block>,
}

impl Method {
    pub fn block(&self, id: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    /// Number of parameters including the implicit receiver.
    pub fn param_count(&self) -> usize {
        self.sig.params.len() + usize::from(!self.is_static)
    }

    /// Entry local types: receiver first for non-static methods.
    pub fn entry_locals(&self) -> Vec<SlotTy> {
        let mut locals = Vec::new();
        if !self.is_static {
            locals.push(SlotTy::Class(self.sig.class.clone()));
        }
        locals.extend(self.sig.params.iter().map(SlotTy::from));
        locals
    }
}

/// A whole program: methods plus the class table mapping each class to its
/// ordered field list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub methods: Vec<Method>,
    pub classes: BTreeMap<String, Vec<(String, Ty)>>,
}

impl Program {
    /// Resolve a call target by full signature.
    pub fn resolve(&self, sig: &MethodSig) -> Option<&Method> {
        self.methods.iter().find(|m| &m.sig == sig)
    }

    /// Resolve a method by `Class.name`; `None` if missing or ambiguous.
    pub fn resolve_by_name(&self, qualified: &str) -> Option<&Method> {
        let mut hits = self
            .methods
            .iter()
            .filter(|m| m.sig.qualified_name() == qualified);
        let first = hits.next()?;
        if hits.next().is_some() {
            return None;
        }
        Some(first)
    }

    /// Find the method owning a block.
    pub fn method_of_block(&self, block_id: &str) -> Option<&Method> {
        self.methods.iter().find(|m| m.block(block_id).is_some())
    }
}
