//! Instruction set of the compartmentalized machine.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::ComponentId;
use crate::value::BinOp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Reg {
    One,
    Com,
    Sp,
    Ra,
    Aux1,
    Aux2,
}

impl Reg {
    pub const ALL: [Reg; 6] = [Reg::One, Reg::Com, Reg::Sp, Reg::Ra, Reg::Aux1, Reg::Aux2];
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Reg> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reg::One => "R_ONE",
            Reg::Com => "R_COM",
            Reg::Sp => "R_SP",
            Reg::Ra => "R_RA",
            Reg::Aux1 => "R_AUX1",
            Reg::Aux2 => "R_AUX2",
        })
    }
}

/// A code location inside the owning component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label {
    pub block: u32,
    pub offset: i64,
}

impl Label {
    pub fn new(block: u32, offset: i64) -> Self {
        Label { block, offset }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{}:{}", self.block, self.offset)
    }
}

/// Constant operand: an integer, or a pointer into one of the component's
/// own data blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Imm {
    Int(i64),
    Data { block: u32, offset: i64 },
}

impl fmt::Display for Imm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Imm::Int(n) => write!(f, "{n}"),
            Imm::Data { block, offset } => write!(f, "&{block}[{offset}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Instr {
    Nop,
    Halt,
    Const(Imm, Reg),
    /// `Mov(rs, rd)`
    Mov(Reg, Reg),
    /// `BinOp(op, r1, r2, rd)`
    BinOp(BinOp, Reg, Reg, Reg),
    /// `Load(rp, rd)`: `rd := mem[rp]`
    Load(Reg, Reg),
    /// `Store(rp, rs)`: `mem[rp] := rs`
    Store(Reg, Reg),
    Jal(Label),
    Jump(Reg),
    Call(ComponentId, String),
    Return,
    Bnz(Reg, Label),
    /// `Alloc(rd, rsize)`
    Alloc(Reg, Reg),
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instr::Nop => write!(f, "Nop"),
            Instr::Halt => write!(f, "Halt"),
            Instr::Const(i, rd) => write!(f, "Const {i} -> {rd}"),
            Instr::Mov(rs, rd) => write!(f, "Mov {rs} -> {rd}"),
            Instr::BinOp(op, a, b, rd) => write!(f, "BinOp {a} {op} {b} -> {rd}"),
            Instr::Load(rp, rd) => write!(f, "Load *{rp} -> {rd}"),
            Instr::Store(rp, rs) => write!(f, "Store *{rp} <- {rs}"),
            Instr::Jal(l) => write!(f, "Jal {l}"),
            Instr::Jump(r) => write!(f, "Jump {r}"),
            Instr::Call(c, p) => write!(f, "Call {c}.{p}"),
            Instr::Return => write!(f, "Return"),
            Instr::Bnz(r, l) => write!(f, "Bnz {r} {l}"),
            Instr::Alloc(rd, rs) => write!(f, "Alloc {rs} -> {rd}"),
        }
    }
}
