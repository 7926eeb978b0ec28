//! Pretty printer producing text that parses back to the same syntax tree.

use std::fmt::Write;

use super::ast::{Expr, SourceComponent, SourceProgram};
use crate::model::ComponentId;
use crate::value::BinOp;

struct Printer<'a> {
    prog: &'a SourceProgram,
    param: &'a str,
}

const SEQ: u8 = 0;
const ASSIGN: u8 = 1;
const CMP: u8 = 2;
const ADD: u8 = 3;
const MUL: u8 = 4;
const UNARY: u8 = 5;
const POSTFIX: u8 = 6;

fn pad(indent: usize) -> String {
    "  ".repeat(indent)
}

fn uses_arg(e: &Expr) -> bool {
    matches!(e, Expr::Arg) || e.children().into_iter().any(uses_arg)
}

fn is_bump(p: &Expr, v: &Expr) -> bool {
    match v {
        Expr::BinOp(BinOp::Add, d, one) => {
            matches!(&**one, Expr::Int(1)) && matches!(&**d, Expr::Deref(q) if **q == *p)
        }
        _ => false,
    }
}

impl Printer<'_> {
    fn comp_name(&self, c: ComponentId) -> String {
        self.prog.name_of(c)
    }

    fn block(&self, e: &Expr, indent: usize) -> String {
        let mut items = Vec::new();
        let mut cur = e;
        while let Expr::Seq(a, b) = cur {
            items.push(&**a);
            cur = b;
        }
        items.push(cur);
        let mut out = String::from("{\n");
        for it in items {
            let _ = writeln!(out, "{}{};", pad(indent + 1), self.expr(it, ASSIGN, indent + 1));
        }
        out.push_str(&pad(indent));
        out.push('}');
        out
    }

    fn lvalue(&self, p: &Expr, indent: usize) -> String {
        match p {
            Expr::BinOp(BinOp::Add, a, b) => {
                format!("{}[{}]", self.expr(a, POSTFIX, indent), self.expr(b, SEQ, indent))
            }
            _ => format!("(!{})", self.expr(p, UNARY, indent)),
        }
    }

    fn expr(&self, e: &Expr, need: u8, indent: usize) -> String {
        let (s, level) = match e {
            Expr::Int(n) if *n < 0 => (n.to_string(), UNARY),
            Expr::Int(n) => (n.to_string(), POSTFIX),
            Expr::Local => ("local".into(), POSTFIX),
            Expr::Arg => (self.param.to_string(), POSTFIX),
            Expr::Exit => ("exit()".into(), POSTFIX),
            Expr::BinOp(op, a, b) => {
                let (level, l, r) = match op {
                    BinOp::Eq | BinOp::Lt | BinOp::Le => (CMP, ADD, ADD),
                    BinOp::Add | BinOp::Sub => (ADD, ADD, MUL),
                    BinOp::Mul => (MUL, MUL, UNARY),
                };
                (
                    format!(
                        "{} {} {}",
                        self.expr(a, l, indent),
                        op.symbol(),
                        self.expr(b, r, indent)
                    ),
                    level,
                )
            }
            Expr::Seq(..) => (self.block(e, indent), POSTFIX),
            Expr::If(c, t, f) => {
                let mut s = format!("if ({}) {}", self.expr(c, SEQ, indent), self.block(t, indent));
                match &**f {
                    Expr::Int(0) => {}
                    Expr::If(..) => {
                        let _ = write!(s, " else {}", self.expr(f, POSTFIX, indent));
                    }
                    _ => {
                        let _ = write!(s, " else {}", self.block(f, indent));
                    }
                }
                (s, POSTFIX)
            }
            Expr::Alloc(a) => (format!("alloc {}", self.expr(a, UNARY, indent)), UNARY),
            Expr::Deref(p) => match &**p {
                Expr::BinOp(BinOp::Add, a, b) => (
                    format!("{}[{}]", self.expr(a, POSTFIX, indent), self.expr(b, SEQ, indent)),
                    POSTFIX,
                ),
                _ => (format!("!{}", self.expr(p, UNARY, indent)), UNARY),
            },
            Expr::Assign(p, v) if is_bump(p, v) => {
                (format!("{}++", self.lvalue(p, indent)), POSTFIX)
            }
            Expr::Assign(p, v) => {
                let lhs = match &**p {
                    Expr::BinOp(BinOp::Add, ..) => self.lvalue(p, indent),
                    _ => format!("!{}", self.expr(p, UNARY, indent)),
                };
                (format!("{lhs} := {}", self.expr(v, ASSIGN, indent)), ASSIGN)
            }
            Expr::Call(c, p, a) => (
                format!("{}.{}({})", self.comp_name(*c), p, self.expr(a, ASSIGN, indent)),
                POSTFIX,
            ),
        };
        if level < need {
            format!("({s})")
        } else {
            s
        }
    }
}

fn needs_explicit_ids(prog: &SourceProgram) -> bool {
    prog.components
        .keys()
        .enumerate()
        .any(|(i, c)| c.0 as usize != i + 1)
}

fn component_text(prog: &SourceProgram, c: &SourceComponent, explicit: bool, out: &mut String) {
    let _ = write!(out, "component {}", c.name);
    if explicit {
        let _ = write!(out, " @ {}", c.id());
    }
    out.push_str(" {\n");
    if !c.interface.imports.is_empty() {
        let imports: Vec<String> = c
            .interface
            .imports
            .iter()
            .map(|p| format!("{}.{}", prog.name_of(p.component), p.name))
            .collect();
        let _ = writeln!(out, "  import {};", imports.join(", "));
    }
    if !c.interface.exports.is_empty() {
        let exports: Vec<&str> = c.interface.exports.iter().map(String::as_str).collect();
        let _ = writeln!(out, "  export {};", exports.join(", "));
    }
    if c.buffers != [1] {
        let sizes: Vec<String> = c.buffers.iter().map(i64::to_string).collect();
        let _ = writeln!(out, "  buffer {};", sizes.join(", "));
    }
    for (name, body) in &c.procedures {
        let param = if uses_arg(body) { "x" } else { "_" };
        let p = Printer { prog, param };
        let _ = writeln!(out, "  {name}({param}) {}", p.block(body, 1));
    }
    out.push_str("}\n");
}

/// Renders a whole program, including its `main` and `input` declarations.
pub fn print_source(prog: &SourceProgram) -> String {
    let explicit = needs_explicit_ids(prog);
    let mut out = String::new();
    for c in prog.components.values() {
        component_text(prog, c, explicit, &mut out);
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "main {}.{};",
        prog.name_of(prog.main.component),
        prog.main.name
    );
    if !prog.env_tape.is_empty() {
        let tape: Vec<String> = prog.env_tape.iter().map(i64::to_string).collect();
        let _ = writeln!(out, "input {};", tape.join(", "));
    }
    out
}

/// One expression on one logical line (blocks still break lines).
pub fn print_expr(prog: &SourceProgram, e: &Expr) -> String {
    Printer { prog, param: "x" }.expr(e, SEQ, 0)
}
