//! `ifne` desugaring: a block guarded by `ifne int` is replaced by two
//! copies guarded by `iflt` and `ifgt`, and every predecessor gains both
//! copies as successors in place of the original.

use super::{Instruction, Program, Ty};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DesugarError {
    #[error("block `{0}`: ifne on a class type is not supported")]
    ClassTypedIfne(String),
    #[error("block `{0}`: ifne in a method entry block is not supported")]
    IfneAtEntry(String),
}

fn unique_name(base: &str, taken: &BTreeSet<String>) -> String {
    let mut name = base.to_string();
    while taken.contains(&name) {
        name.push('_');
    }
    name
}

/// Rewrites every `ifne`-guarded block; programs without `ifne` come back
/// structurally identical.
pub fn desugar_ifne(program: &Program) -> Result<Program, DesugarError> {
    let mut out = program.clone();
    let mut taken: BTreeSet<String> = out
        .methods
        .iter()
        .flat_map(|m| m.blocks.iter().map(|b| b.id.clone()))
        .collect();

    for m in &mut out.methods {
        while let Some(pos) = m
            .blocks
            .iter()
            .position(|b| matches!(b.instructions.first(), Some(Instruction::IfNe(_))))
        {
            let original = m.blocks[pos].clone();
            let Some(Instruction::IfNe(ty)) = original.instructions.first() else {
                unreachable!()
            };
            if *ty != Ty::Int {
                return Err(DesugarError::ClassTypedIfne(original.id.clone()));
            }
            if m.entry == original.id {
                return Err(DesugarError::IfneAtEntry(original.id.clone()));
            }
            let lt_name = unique_name(&format!("{}_lt", original.id), &taken);
            taken.insert(lt_name.clone());
            let gt_name = unique_name(&format!("{}_gt", original.id), &taken);
            taken.insert(gt_name.clone());

            let mut lt = original.clone();
            lt.id = lt_name.clone();
            lt.instructions[0] = Instruction::IfLt;
            let mut gt = original.clone();
            gt.id = gt_name.clone();
            gt.instructions[0] = Instruction::IfGt;
            m.blocks.splice(pos..=pos, [lt, gt]);

            for b in &mut m.blocks {
                let mut i = 0;
                while i < b.successors.len() {
                    if b.successors[i] == original.id {
                        b.successors
                            .splice(i..=i, [lt_name.clone(), gt_name.clone()]);
                        i += 2;
                    } else {
                        i += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}
