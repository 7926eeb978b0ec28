//! Abstract syntax of the source language.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{ComponentId, Interface, ProcedureId, ProgramInterface};
use crate::value::BinOp;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Int(i64),
    /// Pointer to the start of the component's static block 0.
    Local,
    /// The current procedure's argument.
    Arg,
    BinOp(BinOp, Box<Expr>, Box<Expr>),
    Seq(Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Alloc(Box<Expr>),
    Deref(Box<Expr>),
    /// Store the value of the second expression at the pointer computed by
    /// the first; evaluates to the stored value.
    Assign(Box<Expr>, Box<Expr>),
    Call(ComponentId, String, Box<Expr>),
    Exit,
}

impl Expr {
    pub fn binop(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::BinOp(op, Box::new(a), Box::new(b))
    }

    pub fn seq(a: Expr, b: Expr) -> Expr {
        Expr::Seq(Box::new(a), Box::new(b))
    }

    /// Right-nested sequence; an empty list is `0`.
    pub fn seq_all(mut items: Vec<Expr>) -> Expr {
        let mut acc = match items.pop() {
            Some(e) => e,
            None => return Expr::Int(0),
        };
        while let Some(e) = items.pop() {
            acc = Expr::seq(e, acc);
        }
        acc
    }

    pub fn if_(c: Expr, t: Expr, e: Expr) -> Expr {
        Expr::If(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn alloc(e: Expr) -> Expr {
        Expr::Alloc(Box::new(e))
    }

    pub fn deref(e: Expr) -> Expr {
        Expr::Deref(Box::new(e))
    }

    pub fn assign(p: Expr, v: Expr) -> Expr {
        Expr::Assign(Box::new(p), Box::new(v))
    }

    pub fn call(c: ComponentId, p: impl Into<String>, arg: Expr) -> Expr {
        Expr::Call(c, p.into(), Box::new(arg))
    }

    /// `local[i]`
    pub fn local_at(i: i64) -> Expr {
        Expr::deref(Expr::binop(BinOp::Add, Expr::Local, Expr::Int(i)))
    }

    /// `local[i]++`
    pub fn bump_local(i: i64) -> Expr {
        let cell = Expr::binop(BinOp::Add, Expr::Local, Expr::Int(i));
        Expr::assign(
            cell.clone(),
            Expr::binop(BinOp::Add, Expr::deref(cell), Expr::Int(1)),
        )
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Int(_) | Expr::Local | Expr::Arg | Expr::Exit => vec![],
            Expr::Alloc(a) | Expr::Deref(a) | Expr::Call(_, _, a) => vec![a],
            Expr::BinOp(_, a, b) | Expr::Seq(a, b) | Expr::Assign(a, b) => vec![a, b],
            Expr::If(a, b, c) => vec![a, b, c],
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Every call target mentioned in the expression.
    pub fn calls(&self, out: &mut Vec<(ComponentId, String)>) {
        if let Expr::Call(c, p, _) = self {
            out.push((*c, p.clone()));
        }
        for ch in self.children() {
            ch.calls(out);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceComponent {
    pub name: String,
    pub interface: Interface,
    pub procedures: BTreeMap<String, Expr>,
    /// Sizes of the static buffers; buffer 0 is the one `local` points to.
    pub buffers: Vec<i64>,
}

impl SourceComponent {
    pub fn id(&self) -> ComponentId {
        self.interface.component
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceProgram {
    pub components: BTreeMap<ComponentId, SourceComponent>,
    pub main: ProcedureId,
    /// Values successive `E.read()` calls return.
    pub env_tape: Vec<i64>,
}

impl SourceProgram {
    pub fn interface(&self) -> ProgramInterface {
        ProgramInterface::new(
            self.main.clone(),
            self.components.values().map(|c| c.interface.clone()),
        )
    }

    pub fn component(&self, c: ComponentId) -> Option<&SourceComponent> {
        self.components.get(&c)
    }

    pub fn body(&self, c: ComponentId, proc: &str) -> Option<&Expr> {
        self.components.get(&c)?.procedures.get(proc)
    }

    /// Display name of a component id.
    pub fn name_of(&self, c: ComponentId) -> String {
        if c.is_env() {
            return "E".into();
        }
        self.components
            .get(&c)
            .map_or_else(|| format!("C{}", c.0), |k| k.name.clone())
    }

    pub fn size(&self) -> usize {
        self.components
            .values()
            .flat_map(|c| c.procedures.values())
            .map(Expr::size)
            .sum()
    }
}
