//! Block-to-clause translation, covering all call shapes: static and
//! non-static callees, void and non-void callees, void and non-void
//! enclosing methods, lone calls and calls followed by more instructions.

use super::{Atom, Clause, ClpProgram};
use crate::abstraction::{block_constraint_from, AbstractionError, PathLengthOptions};
use crate::bytecode::{
    validate, Block, Frame, FrameMap, Instruction, Method, Program, ProgramFrames,
    ValidationReport,
};
use crate::polyhedra::{LinearConstraint, Polyhedron, ProjectionMode, VarId};
use thiserror::Error;

#[derive(Debug, Clone, Default)]
pub struct CompileOptions {
    pub mode: ProjectionMode,
    pub pl: PathLengthOptions,
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("program fails validation:\n{0}")]
    Validation(ValidationReport),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
}

fn in_vars(frame: &Frame) -> Vec<VarId> {
    let (l, s) = frame.arity();
    (0..l)
        .map(|k| VarId::InL(k as u32))
        .chain((0..s).map(|k| VarId::InS(k as u32)))
        .collect()
}

fn out_vars(frame: &Frame) -> Vec<VarId> {
    let (l, s) = frame.arity();
    (0..l)
        .map(|k| VarId::OutL(k as u32))
        .chain((0..s).map(|k| VarId::OutS(k as u32)))
        .collect()
}

/// Local/stack equalities preserved across a call: everything below the
/// actual parameters.
fn call_frame_eqs(entry: &Frame, surviving_stack: usize) -> Vec<LinearConstraint> {
    let mut cs = Vec::new();
    for k in 0..entry.locals.len() {
        cs.push(LinearConstraint::var_eq(
            VarId::InL(k as u32),
            VarId::OutL(k as u32),
        ));
    }
    for k in 0..surviving_stack {
        cs.push(LinearConstraint::var_eq(
            VarId::InS(k as u32),
            VarId::OutS(k as u32),
        ));
    }
    cs
}

struct BlockCx<'a> {
    block: &'a Block,
    method: &'a Method,
    frames: &'a FrameMap,
}

impl<'a> BlockCx<'a> {
    fn ret_active(&self) -> bool {
        self.method.sig.ret.is_some()
    }

    fn ret_in(&self) -> VarId {
        VarId::RetIn(self.block.id.clone())
    }

    fn ret_out(&self) -> VarId {
        VarId::RetOut(self.block.id.clone())
    }

    fn head(&self, pred: &str, frame: &Frame) -> Atom {
        let mut args = in_vars(frame);
        if self.ret_active() {
            args.push(self.ret_in());
        }
        Atom {
            pred: pred.to_string(),
            args,
        }
    }

    fn successor_atom(&self, succ: &str, frame: &Frame) -> Atom {
        let mut args = out_vars(frame);
        if self.ret_active() {
            args.push(self.ret_out());
        }
        Atom {
            pred: succ.to_string(),
            args,
        }
    }

    fn scope_of(&self, head: &Atom, body: &[Atom]) -> Vec<VarId> {
        head.args
            .iter()
            .chain(body.iter().flat_map(|a| a.args.iter()))
            .cloned()
            .collect()
    }

    fn finish(&self, head: Atom, mut constraint: Polyhedron, body: Vec<Atom>) -> Clause {
        constraint.scope = self.scope_of(&head, &body).into_iter().collect();
        Clause {
            head,
            constraint: constraint.canonicalize(),
            body,
        }
    }

    /// Clauses for a (sub-)block with no leading call: one clause per
    /// successor, or a single fact-shaped clause at a method exit.
    fn no_call_clauses(
        &self,
        pred: &str,
        entry_frame: &Frame,
        constraints: Vec<Polyhedron>,
        out: &mut Vec<Clause>,
    ) {
        let end_frame = &self.frames.end[&self.block.id];
        if self.block.successors.is_empty() {
            for c in constraints {
                let mut c = c;
                if self.ret_active() {
                    c.push(LinearConstraint::var_eq(self.ret_in(), VarId::OutS(0)));
                }
                out.push(self.finish(self.head(pred, entry_frame), c, vec![]));
            }
        } else {
            for succ in &self.block.successors {
                for c in &constraints {
                    let mut c = c.clone();
                    if self.ret_active() {
                        c.push(LinearConstraint::var_eq(self.ret_in(), self.ret_out()));
                    }
                    out.push(self.finish(
                        self.head(pred, entry_frame),
                        c,
                        vec![self.successor_atom(succ, end_frame)],
                    ));
                }
            }
        }
    }
}

/// Translate one block into its clause set.
pub fn compile_block(
    block: &Block,
    method: &Method,
    frames: &FrameMap,
    program: &Program,
    opts: &CompileOptions,
) -> Result<Vec<Clause>, CompileError> {
    let Some(entry_frame) = frames.entry_frame(&block.id) else {
        // Unreachable block: no frame, no clauses.
        log::debug!("skipping unreachable block {}", block.id);
        return Ok(vec![]);
    };
    let cx = BlockCx {
        block,
        method,
        frames,
    };
    let mut out = Vec::new();

    let Instruction::Call { sig, is_static } = &block.instructions[0] else {
        // No leading call: the whole block composes into one constraint.
        let point_frames: Vec<Frame> = (0..block.instructions.len())
            .map(|i| frames.at[&(block.id.clone(), i)].clone())
            .collect();
        let constraints =
            block_constraint_from(&block.instructions, &point_frames, &opts.pl, opts.mode)?;
        cx.no_call_clauses(&block.id, entry_frame, constraints, &mut out);
        return Ok(out);
    };

    // Leading call.
    let callee = program.resolve(sig).expect("validated call target");
    let callee_ret = sig.ret.is_some();
    let total = sig.params.len() + usize::from(!is_static);
    let s_in = entry_frame.stack.len();
    let surviving = s_in - total;
    let post_frame = if block.instructions.len() >= 2 {
        frames.at[&(block.id.clone(), 1)].clone()
    } else {
        frames.end[&block.id].clone()
    };
    let s_after = post_frame.stack.len();

    let receiver = (!is_static)
        .then(|| LinearConstraint::var_ge_const(VarId::InS(surviving as u32), 1));
    // Deepest actual first, matching the callee's local ordering; the call
    // result, when any, lands where the actuals were.
    let mut callee_args: Vec<VarId> = (surviving..s_in).map(|k| VarId::InS(k as u32)).collect();
    if callee_ret {
        callee_args.push(VarId::OutS((s_after - 1) as u32));
    }
    let callee_atom = Atom {
        pred: callee.entry.clone(),
        args: callee_args,
    };

    if block.instructions.len() >= 2 {
        // Bridge through a fresh continuation predicate.
        let cont = format!("{}__cont", block.id);
        let mut c = Polyhedron::from_constraints(call_frame_eqs(entry_frame, surviving), []);
        if let Some(r) = receiver {
            c.push(r);
        }
        if cx.ret_active() {
            c.push(LinearConstraint::var_eq(cx.ret_in(), cx.ret_out()));
        }
        let mut cont_args = out_vars(&post_frame);
        if cx.ret_active() {
            cont_args.push(cx.ret_out());
        }
        let bridge_body = vec![
            callee_atom,
            Atom {
                pred: cont.clone(),
                args: cont_args,
            },
        ];
        out.push(cx.finish(cx.head(&block.id, entry_frame), c, bridge_body));

        let point_frames: Vec<Frame> = (1..block.instructions.len())
            .map(|i| frames.at[&(block.id.clone(), i)].clone())
            .collect();
        let constraints = block_constraint_from(
            &block.instructions[1..],
            &point_frames,
            &opts.pl,
            opts.mode,
        )?;
        cx.no_call_clauses(&cont, &post_frame, constraints, &mut out);
    } else if block.successors.is_empty() {
        // Lone call at a method exit. With a value-returning callee the
        // result is the whole exit stack and no frame equalities are
        // needed; a void callee still needs them to tie the surviving
        // slot to the return-length link.
        let mut c = Polyhedron::from_constraints(vec![], []);
        if let Some(r) = receiver {
            c.push(r);
        }
        if cx.ret_active() {
            c.push(LinearConstraint::var_eq(cx.ret_in(), VarId::OutS(0)));
            if !callee_ret {
                for eq in call_frame_eqs(entry_frame, surviving) {
                    c.push(eq);
                }
            }
        }
        out.push(cx.finish(cx.head(&block.id, entry_frame), c, vec![callee_atom]));
    } else {
        // Lone call, control continues at the successors.
        for succ in &block.successors {
            let mut c = Polyhedron::from_constraints(call_frame_eqs(entry_frame, surviving), []);
            if let Some(r) = receiver.clone() {
                c.push(r);
            }
            if cx.ret_active() {
                c.push(LinearConstraint::var_eq(cx.ret_in(), cx.ret_out()));
            }
            let body = vec![
                callee_atom.clone(),
                cx.successor_atom(succ, &post_frame),
            ];
            out.push(cx.finish(cx.head(&block.id, entry_frame), c, body));
        }
    }
    Ok(out)
}

/// Translate a validated program; clause order follows method, block and
/// successor order, so output is deterministic.
pub fn compile_program(program: &Program, opts: CompileOptions) -> Result<ClpProgram, CompileError> {
    let report = validate(program);
    if !report.is_clean() {
        return Err(CompileError::Validation(report));
    }
    let frames = ProgramFrames::infer(program).expect("validation covers frame inference");
    let mut clp = ClpProgram::default();
    for m in &program.methods {
        clp.entries
            .insert(m.sig.qualified_name(), m.entry.clone());
        let fm = frames.of_method(m);
        for b in &m.blocks {
            clp.clauses
                .extend(compile_block(b, m, fm, program, &opts)?);
        }
    }
    Ok(clp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::parse_program;

    #[test]
    fn straight_line_void_method_compiles_to_one_fact() {
        let p = parse_program(
            "method static A.f(int):void entry e { block e { load 0 ; pop } -> }",
        )
        .unwrap();
        let clp = compile_program(&p, CompileOptions::default()).unwrap();
        assert_eq!(clp.clauses.len(), 1);
        assert!(clp.clauses[0].is_fact());
        assert_eq!(clp.clauses[0].head.pred, "e");
        assert_eq!(clp.clauses[0].head.args.len(), 1);
        assert_eq!(clp.entries["A.f"], "e");
    }

    #[test]
    fn predicate_arity_is_frame_arity_plus_return_slot() {
        let p = parse_program(
            r#"
method static A.f(int):int entry e {
  block e { load 0 } -> x
  block x { ifge ; const 1 } ->
}
"#,
        )
        .unwrap();
        let clp = compile_program(&p, CompileOptions::default()).unwrap();
        // e at (1,0) + ret, x at (1,1) + ret
        let e = clp.clauses_for("e").next().unwrap();
        assert_eq!(e.head.args.len(), 2);
        let x = clp.clauses_for("x").next().unwrap();
        assert_eq!(x.head.args.len(), 3);
    }

    #[test]
    fn non_static_non_void_mid_block_call_builds_a_bridge() {
        let p = parse_program(
            r#"
class A { }
method A.get(int):int entry g {
  block g { load 1 } ->
}
method static A.main(A):void entry m {
  block m { load 0 ; const 7 } -> c
  block c { call A.get(int):int ; pop } ->
}
"#,
        )
        .unwrap();
        let clp = compile_program(&p, CompileOptions::default()).unwrap();
        let c_clauses: Vec<_> = clp.clauses_for("c").collect();
        assert_eq!(c_clauses.len(), 1);
        let bridge = c_clauses[0];
        assert_eq!(bridge.body.len(), 2);
        assert_eq!(bridge.body[0].pred, "g");
        // receiver then explicit parameter then result
        assert_eq!(
            bridge.body[0].args,
            vec![VarId::InS(0), VarId::InS(1), VarId::OutS(0)]
        );
        assert_eq!(bridge.body[1].pred, "c__cont");
        // receiver >= 1 present
        let has_recv = bridge
            .constraint
            .constraints
            .iter()
            .any(|k| k.to_string() == "-is0 <= -1");
        assert!(has_recv, "{}", bridge.constraint);
        let cont: Vec<_> = clp.clauses_for("c__cont").collect();
        assert_eq!(cont.len(), 1);
        assert!(cont[0].is_fact());
    }

    #[test]
    fn static_call_has_no_receiver_constraint() {
        let p = parse_program(
            r#"
method static A.id(int):int entry i { block i { load 0 } -> }
method static A.go(int):int entry g {
  block g { load 0 } -> c
  block c { call static A.id(int):int } -> r
  block r { load 0 ; pop } ->
}
"#,
        )
        .unwrap();
        let clp = compile_program(&p, CompileOptions::default()).unwrap();
        let c = clp.clauses_for("c").next().unwrap();
        assert_eq!(c.body.len(), 2);
        assert_eq!(c.body[0].pred, "i");
        assert!(
            !c.constraint.constraints.iter().any(|k| k.to_string().contains("<=")),
            "unexpected inequality in {}",
            c.constraint
        );
    }
}
