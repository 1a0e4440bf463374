//! Canonical textual emitter; `parse(emit(parse(x))) == parse(x)`.

use super::Program;
use std::fmt::Write;

pub fn emit_program(program: &Program) -> String {
    let mut out = String::new();
    for (class, fields) in &program.classes {
        if fields.is_empty() {
            let _ = writeln!(out, "class {class} {{ }}");
        } else {
            let body: Vec<String> = fields.iter().map(|(f, t)| format!("{f}: {t}")).collect();
            let _ = writeln!(out, "class {class} {{ {} }}", body.join(" ; "));
        }
    }
    for m in &program.methods {
        let stat = if m.is_static { "static " } else { "" };
        let _ = writeln!(out, "method {stat}{} entry {} {{", m.sig, m.entry);
        let width = m.blocks.iter().map(|b| b.id.len()).max().unwrap_or(0);
        for b in &m.blocks {
            let body: Vec<String> = b.instructions.iter().map(|i| i.to_string()).collect();
            let succ = if b.successors.is_empty() {
                String::new()
            } else {
                format!(" {}", b.successors.join(" "))
            };
            let _ = writeln!(
                out,
                "  block {:width$} {{ {} }} ->{}",
                b.id,
                body.join(" ; "),
                succ,
                width = width
            );
        }
        let _ = writeln!(out, "}}");
    }
    out
}

#[cfg(test)]
mod tests {
    use crate::bytecode::{emit_program, parse_program};

    #[test]
    fn parse_emit_parse_is_parse() {
        let src = r#"
class Pair { left: int ; right: int }
method static A.f(int,Pair):int entry e {
  block e { load 0 } -> a b
  block a { ifeq int ; new Pair ; dup ; const 3 ; putfield Pair.left:int ; pop ; const 0 } ->
  block b { ifgt ; load 0 ; const -1 ; add } ->
}
"#;
        let once = parse_program(src).unwrap();
        let twice = parse_program(&emit_program(&once)).unwrap();
        assert_eq!(once, twice);
    }
}
