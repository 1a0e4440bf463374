//! Parser for the textual program format.
//!
//! ```text
//! class Sum { }
//! class Node { next: Node ; val: int }
//! method static Sum.sum(int):int entry sum {
//!   block sum { load 0 }             -> b1 b2 b3
//!   block b1  { ifeq int ; const 0 } ->
//! }
//! ```
//! Comments run from `#` to end of line. Block names are globally unique;
//! they become clause predicate names later.

use super::{Block, ConstVal, FieldRef, Instruction, Method, MethodSig, Program, Ty};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

const RESERVED: &[&str] = &["class", "method", "static", "entry", "block"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Arrow,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Semi,
    Comma,
    Dot,
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        };
        let bytes: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let col = i + 1;
            let lno = lineno + 1;
            match c {
                ' ' | '\t' | '\r' => {
                    i += 1;
                }
                '{' => {
                    out.push((Tok::LBrace, lno, col));
                    i += 1;
                }
                '}' => {
                    out.push((Tok::RBrace, lno, col));
                    i += 1;
                }
                '(' => {
                    out.push((Tok::LParen, lno, col));
                    i += 1;
                }
                ')' => {
                    out.push((Tok::RParen, lno, col));
                    i += 1;
                }
                ':' => {
                    out.push((Tok::Colon, lno, col));
                    i += 1;
                }
                ';' => {
                    out.push((Tok::Semi, lno, col));
                    i += 1;
                }
                ',' => {
                    out.push((Tok::Comma, lno, col));
                    i += 1;
                }
                '.' => {
                    out.push((Tok::Dot, lno, col));
                    i += 1;
                }
                '-' => {
                    if bytes.get(i + 1) == Some(&'>') {
                        out.push((Tok::Arrow, lno, col));
                        i += 2;
                    } else if bytes.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                        let start = i;
                        i += 1;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                        let s: String = bytes[start..i].iter().collect();
                        let n = s.parse().map_err(|_| ParseError {
                            line: lno,
                            col,
                            msg: format!("integer literal out of range: {s}"),
                        })?;
                        out.push((Tok::Int(n), lno, col));
                    } else {
                        return Err(ParseError {
                            line: lno,
                            col,
                            msg: "stray `-` (expected `->` or negative literal)".into(),
                        });
                    }
                }
                d if d.is_ascii_digit() => {
                    let start = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    let s: String = bytes[start..i].iter().collect();
                    let n = s.parse().map_err(|_| ParseError {
                        line: lno,
                        col,
                        msg: format!("integer literal out of range: {s}"),
                    })?;
                    out.push((Tok::Int(n), lno, col));
                }
                a if a.is_ascii_alphabetic() || a == '_' => {
                    let start = i;
                    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                        i += 1;
                    }
                    out.push((Tok::Ident(bytes[start..i].iter().collect()), lno, col));
                }
                other => {
                    return Err(ParseError {
                        line: lno,
                        col,
                        msg: format!("unexpected character `{other}`"),
                    });
                }
            }
        }
    }
    out.push((Tok::Eof, text.lines().count() + 1, 1));
    Ok(out)
}

impl Lexer {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn here(&self) -> (usize, usize) {
        let (_, l, c) = &self.toks[self.pos];
        (*l, *c)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok) -> Result<(), ParseError> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected {want}, found {}", self.peek())))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.err(format!("expected {what}, found {other}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            other => Err(self.err(format!("expected `{kw}`, found {other}"))),
        }
    }

    fn name(&mut self, what: &str) -> Result<String, ParseError> {
        let s = self.ident(what)?;
        if RESERVED.contains(&s.as_str()) {
            return Err(self.err(format!("reserved word `{s}` cannot be used as {what}")));
        }
        Ok(s)
    }
}

fn parse_ty(lx: &mut Lexer) -> Result<Ty, ParseError> {
    let s = lx.ident("type")?;
    if s == "int" {
        Ok(Ty::Int)
    } else if s == "void" {
        Err(lx.err("`void` is only valid as a return type"))
    } else {
        Ok(Ty::Class(s))
    }
}

fn parse_sig(lx: &mut Lexer) -> Result<MethodSig, ParseError> {
    let class = lx.name("class name")?;
    lx.expect(&Tok::Dot)?;
    let name = lx.name("method name")?;
    lx.expect(&Tok::LParen)?;
    let mut params = Vec::new();
    if lx.peek() != &Tok::RParen {
        loop {
            params.push(parse_ty(lx)?);
            if lx.peek() == &Tok::Comma {
                lx.bump();
            } else {
                break;
            }
        }
    }
    lx.expect(&Tok::RParen)?;
    lx.expect(&Tok::Colon)?;
    let ret = match lx.peek().clone() {
        Tok::Ident(s) if s == "void" => {
            lx.bump();
            None
        }
        _ => Some(parse_ty(lx)?),
    };
    Ok(MethodSig {
        class,
        name,
        params,
        ret,
    })
}

fn parse_instruction(lx: &mut Lexer) -> Result<Instruction, ParseError> {
    let m = lx.ident("instruction mnemonic")?;
    let ins = match m.as_str() {
        "const" => match lx.peek().clone() {
            Tok::Int(n) => {
                lx.bump();
                Instruction::Const(ConstVal::Int(n))
            }
            Tok::Ident(s) if s == "null" => {
                lx.bump();
                Instruction::Const(ConstVal::Null)
            }
            other => return Err(lx.err(format!("expected integer or `null`, found {other}"))),
        },
        "dup" => Instruction::Dup,
        "new" => Instruction::New(lx.name("class name")?),
        "load" => Instruction::Load(parse_index(lx)?),
        "store" => Instruction::Store(parse_index(lx)?),
        "add" => Instruction::Add,
        "pop" => Instruction::Pop,
        "putfield" => {
            let class = lx.name("class name")?;
            lx.expect(&Tok::Dot)?;
            let field = lx.name("field name")?;
            lx.expect(&Tok::Colon)?;
            let ty = parse_ty(lx)?;
            if ty != Ty::Int {
                return Err(lx.err("putfield of a class-typed field is not supported"));
            }
            Instruction::PutfieldInt(FieldRef { class, field })
        }
        "ifeq" => Instruction::IfEq(parse_ty(lx)?),
        "ifne" => Instruction::IfNe(parse_ty(lx)?),
        "iflt" => maybe_int_suffix(lx, Instruction::IfLt)?,
        "ifle" => maybe_int_suffix(lx, Instruction::IfLe)?,
        "ifgt" => maybe_int_suffix(lx, Instruction::IfGt)?,
        "ifge" => maybe_int_suffix(lx, Instruction::IfGe)?,
        "call" => {
            let is_static = matches!(lx.peek(), Tok::Ident(s) if s == "static");
            if is_static {
                lx.bump();
            }
            Instruction::Call {
                sig: parse_sig(lx)?,
                is_static,
            }
        }
        other => return Err(lx.err(format!("unknown instruction mnemonic `{other}`"))),
    };
    Ok(ins)
}

/// The int-only guards allow an optional `int` annotation in source.
fn maybe_int_suffix(lx: &mut Lexer, ins: Instruction) -> Result<Instruction, ParseError> {
    if matches!(lx.peek(), Tok::Ident(s) if s == "int") {
        lx.bump();
    }
    Ok(ins)
}

fn parse_index(lx: &mut Lexer) -> Result<usize, ParseError> {
    match lx.peek().clone() {
        Tok::Int(n) if n >= 0 => {
            lx.bump();
            Ok(n as usize)
        }
        other => Err(lx.err(format!("expected non-negative index, found {other}"))),
    }
}

fn parse_block(lx: &mut Lexer, seen_blocks: &mut BTreeSet<String>) -> Result<Block, ParseError> {
    lx.keyword("block")?;
    let (line, col) = lx.here();
    let id = lx.name("block name")?;
    if !seen_blocks.insert(id.clone()) {
        return Err(ParseError {
            line,
            col,
            msg: format!("duplicate block name `{id}`"),
        });
    }
    lx.expect(&Tok::LBrace)?;
    let mut instructions = Vec::new();
    loop {
        let (iline, icol) = lx.here();
        let ins = parse_instruction(lx)?;
        if ins.is_call() && !instructions.is_empty() {
            return Err(ParseError {
                line: iline,
                col: icol,
                msg: "call not at block start".into(),
            });
        }
        instructions.push(ins);
        match lx.peek() {
            Tok::Semi => {
                lx.bump();
            }
            Tok::RBrace => break,
            other => return Err(lx.err(format!("expected `;` or `}}`, found {other}"))),
        }
    }
    lx.expect(&Tok::RBrace)?;
    lx.expect(&Tok::Arrow)?;
    let mut successors = Vec::new();
    while let Tok::Ident(s) = lx.peek() {
        if RESERVED.contains(&s.as_str()) {
            break;
        }
        successors.push(s.clone());
        lx.bump();
    }
    Ok(Block {
        id,
        instructions,
        successors,
    })
}

fn parse_method(lx: &mut Lexer, seen_blocks: &mut BTreeSet<String>) -> Result<Method, ParseError> {
    lx.keyword("method")?;
    let is_static = matches!(lx.peek(), Tok::Ident(s) if s == "static");
    if is_static {
        lx.bump();
    }
    let sig = parse_sig(lx)?;
    lx.keyword("entry")?;
    let entry = lx.name("entry block name")?;
    lx.expect(&Tok::LBrace)?;
    let mut blocks = Vec::new();
    while matches!(lx.peek(), Tok::Ident(s) if s == "block") {
        blocks.push(parse_block(lx, seen_blocks)?);
    }
    lx.expect(&Tok::RBrace)?;
    Ok(Method {
        sig,
        is_static,
        entry,
        blocks,
    })
}

/// Parse a whole program. Instruction and successor order are preserved
/// exactly as written; name resolution is left to `validate`.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = lex(text)?;
    let mut lx = Lexer { toks, pos: 0 };
    let mut program = Program::default();
    let mut seen_blocks = BTreeSet::new();
    let mut seen_methods = BTreeSet::new();
    loop {
        match lx.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(s) if s == "class" => {
                lx.bump();
                let (line, col) = lx.here();
                let name = lx.name("class name")?;
                if program.classes.contains_key(&name) {
                    return Err(ParseError {
                        line,
                        col,
                        msg: format!("duplicate class name `{name}`"),
                    });
                }
                lx.expect(&Tok::LBrace)?;
                let mut fields = Vec::new();
                while !matches!(lx.peek(), Tok::RBrace) {
                    let fname = lx.name("field name")?;
                    lx.expect(&Tok::Colon)?;
                    let fty = parse_ty(&mut lx)?;
                    fields.push((fname, fty));
                    if lx.peek() == &Tok::Semi {
                        lx.bump();
                    }
                }
                lx.expect(&Tok::RBrace)?;
                program.classes.insert(name, fields);
            }
            Tok::Ident(s) if s == "method" => {
                let (line, col) = lx.here();
                let m = parse_method(&mut lx, &mut seen_blocks)?;
                if !seen_methods.insert(m.sig.to_string()) {
                    return Err(ParseError {
                        line,
                        col,
                        msg: format!("duplicate method `{}`", m.sig),
                    });
                }
                program.methods.push(m);
            }
            other => return Err(lx.err(format!("expected `class` or `method`, found {other}"))),
        }
    }
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_empty_program() {
        let p = parse_program("# nothing here\n").unwrap();
        assert!(p.methods.is_empty());
        assert!(p.classes.is_empty());
    }

    #[test]
    fn rejects_call_in_second_position() {
        let src = r#"
class A { }
method static A.f():void entry e {
  block e { const 0 ; call static A.f():void } ->
}
"#;
        let err = parse_program(src).unwrap_err();
        assert!(err.msg.contains("call not at block start"), "{err}");
    }

    #[test]
    fn rejects_duplicate_block_names_across_methods() {
        let src = r#"
method static A.f():void entry e { block e { pop } -> }
method static A.g():void entry e { block e { pop } -> }
"#;
        let err = parse_program(src).unwrap_err();
        assert!(err.msg.contains("duplicate block name"), "{err}");
    }

    #[test]
    fn rejects_unknown_mnemonics_with_position() {
        let err = parse_program("method static A.f():void entry e { block e { frobnicate } -> }")
            .unwrap_err();
        assert!(err.msg.contains("unknown instruction mnemonic"), "{err}");
        assert_eq!(err.line, 1);
    }

    #[test]
    fn preserves_instruction_and_successor_order() {
        let src = r#"
method static A.f(int):int entry e {
  block e  { load 0 } -> b2 b1
  block b1 { ifeq int ; const 0 } ->
  block b2 { ifgt ; load 0 } ->
}
"#;
        let p = parse_program(src).unwrap();
        let e = p.methods[0].block("e").unwrap();
        assert_eq!(e.successors, vec!["b2".to_string(), "b1".to_string()]);
        let b1 = p.methods[0].block("b1").unwrap();
        assert_eq!(b1.instructions.len(), 2);
    }
}
