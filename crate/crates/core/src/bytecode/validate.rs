//! Structural and frame well-formedness checks. Violations are data, not
//! errors: the report collects everything it finds.

use super::{infer_frames, Instruction, Program, Ty};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub method: Option<String>,
    pub block: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(m) = &self.method {
            write!(f, "[{m}] ")?;
        }
        if let Some(b) = &self.block {
            write!(f, "block {b}: ")?;
        }
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate(program: &Program) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |method: Option<String>, block: Option<String>, message: String| {
        report.violations.push(Violation {
            method,
            block,
            message,
        });
    };

    // Global block-name uniqueness (block names become clause predicates).
    let mut seen_blocks: BTreeSet<&str> = BTreeSet::new();
    for m in &program.methods {
        for b in &m.blocks {
            if !seen_blocks.insert(&b.id) {
                push(
                    Some(m.sig.to_string()),
                    Some(b.id.clone()),
                    "duplicate block name".into(),
                );
            }
        }
    }

    let class_ok = |t: &Ty| match t {
        Ty::Int => true,
        Ty::Class(c) => program.classes.contains_key(c),
    };

    for m in &program.methods {
        let meth = Some(m.sig.to_string());
        for t in m.sig.params.iter().chain(m.sig.ret.iter()) {
            if !class_ok(t) {
                push(meth.clone(), None, format!("undeclared class `{t}` in signature"));
            }
        }
        if m.block(&m.entry).is_none() {
            push(meth.clone(), None, format!("entry block `{}` missing", m.entry));
        }
        if m.blocks.iter().any(|b| b.instructions.is_empty()) {
            push(meth.clone(), None, "empty block".into());
        }
        let block_ids: BTreeSet<&str> = m.blocks.iter().map(|b| b.id.as_str()).collect();
        for b in &m.blocks {
            for s in &b.successors {
                if !block_ids.contains(s.as_str()) {
                    push(
                        meth.clone(),
                        Some(b.id.clone()),
                        format!("successor `{s}` does not resolve in this method"),
                    );
                }
            }
            for (i, ins) in b.instructions.iter().enumerate() {
                match ins {
                    Instruction::Call { sig, is_static } => {
                        if i != 0 {
                            push(
                                meth.clone(),
                                Some(b.id.clone()),
                                "call not at block start".into(),
                            );
                        }
                        match program.resolve(sig) {
                            None => push(
                                meth.clone(),
                                Some(b.id.clone()),
                                format!("unresolved call target {sig}"),
                            ),
                            Some(callee) => {
                                if callee.is_static != *is_static {
                                    push(
                                        meth.clone(),
                                        Some(b.id.clone()),
                                        format!("static flag mismatch on call to {sig}"),
                                    );
                                }
                            }
                        }
                    }
                    Instruction::New(c) => {
                        if !program.classes.contains_key(c) {
                            push(
                                meth.clone(),
                                Some(b.id.clone()),
                                format!("new of undeclared class `{c}`"),
                            );
                        }
                    }
                    Instruction::PutfieldInt(fr) => {
                        match program.classes.get(&fr.class) {
                            None => push(
                                meth.clone(),
                                Some(b.id.clone()),
                                format!("putfield on undeclared class `{}`", fr.class),
                            ),
                            Some(fields) => {
                                if !fields.iter().any(|(f, t)| f == &fr.field && t == &Ty::Int) {
                                    push(
                                        meth.clone(),
                                        Some(b.id.clone()),
                                        format!(
                                            "field `{}.{}` is not a declared int field",
                                            fr.class, fr.field
                                        ),
                                    );
                                }
                            }
                        }
                    }
                    Instruction::IfEq(Ty::Class(c)) => {
                        if !program.classes.contains_key(c) {
                            push(
                                meth.clone(),
                                Some(b.id.clone()),
                                format!("ifeq on undeclared class `{c}`"),
                            );
                        }
                    }
                    Instruction::IfNe(_) => {
                        push(
                            meth.clone(),
                            Some(b.id.clone()),
                            "ifne must be desugared before analysis".into(),
                        );
                    }
                    _ => {}
                }
            }
        }

        // Frames, then exit arity against the return type.
        match infer_frames(m, program) {
            Err(e) => push(meth.clone(), Some(e.block.clone()), e.msg.clone()),
            Ok(frames) => {
                let want = usize::from(m.sig.ret.is_some());
                for b in &m.blocks {
                    if !b.successors.is_empty() {
                        continue;
                    }
                    let Some(end) = frames.end.get(&b.id) else {
                        continue; // unreachable block, no frame
                    };
                    if end.stack.len() != want {
                        push(
                            meth.clone(),
                            Some(b.id.clone()),
                            format!(
                                "exit stack arity: method returns {}, block leaves {} stack element(s)",
                                m.sig.ret.as_ref().map(|t| t.to_string()).unwrap_or_else(|| "void".into()),
                                end.stack.len()
                            ),
                        );
                    } else if let (Some(rt), Some(top)) = (&m.sig.ret, end.stack.last()) {
                        if !top.matches(rt) {
                            push(
                                meth.clone(),
                                Some(b.id.clone()),
                                format!("exit stack holds {top}, method returns {rt}"),
                            );
                        }
                    }
                }
            }
        }
    }
    report
}
