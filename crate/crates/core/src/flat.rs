//! Instruction set and word encoding shared by the two low-level targets.
//!
//! Memory is a flat array of 64-bit words; instructions are stored in memory
//! as words:
//!
//! ```text
//! bits  0..6   opcode (0 is Halt, so unmapped memory halts)
//! bits  6..10  rd
//! bits 10..14  r1
//! bits 14..18  r2
//! bits 18..64  signed 46-bit immediate
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::value::BinOp;

/// Register number. 0..6 mirror the compartmentalized machine's registers;
/// the SFI target adds seven more.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct R(pub u8);

impl R {
    pub const ONE: R = R(0);
    pub const COM: R = R(1);
    pub const SP: R = R(2);
    pub const RA: R = R(3);
    pub const AUX1: R = R(4);
    pub const AUX2: R = R(5);
    /// Store mask: clears the component field.
    pub const SAND: R = R(6);
    /// Store mask: sets the component field and data parity.
    pub const SOR: R = R(7);
    pub const JAND: R = R(8);
    pub const JOR: R = R(9);
    /// Shadow stack pointer.
    pub const SSP: R = R(10);
    pub const T1: R = R(11);
    pub const T2: R = R(12);

    pub const COUNT: usize = 13;

    pub fn from_machine(r: crate::machine::Reg) -> R {
        R(r.index() as u8)
    }
}

impl fmt::Display for R {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; R::COUNT] = [
            "one", "com", "sp", "ra", "aux1", "aux2", "sand", "sor", "jand", "jor", "ssp", "t1",
            "t2",
        ];
        match NAMES.get(self.0 as usize) {
            Some(n) => f.write_str(n),
            None => write!(f, "r{}", self.0),
        }
    }
}

pub const IMM_BITS: u32 = 46;
pub const IMM_MIN: i64 = -(1 << (IMM_BITS - 1));
pub const IMM_MAX: i64 = (1 << (IMM_BITS - 1)) - 1;

pub fn fits_imm(n: i64) -> bool {
    (IMM_MIN..=IMM_MAX).contains(&n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FInstr {
    Halt,
    Nop,
    Const(i64, R),
    /// `Mov(rs, rd)`
    Mov(R, R),
    Bin(BinOp, R, R, R),
    And(R, R, R),
    Or(R, R, R),
    /// `rd := rd << imm`
    ShlI(R, i64),
    /// `rd := rd | imm`
    OrI(R, i64),
    /// `Load(rp, rd)`
    Load(R, R),
    /// `Store(rp, rs)`
    Store(R, R),
    /// Direct jump that links the next address into `ra`.
    Jal(i64),
    /// Direct jump without link.
    Jmp(i64),
    Jump(R),
    Bnz(R, i64),
}

const OP_BIN: u8 = 4;

impl FInstr {
    fn opcode(&self) -> u8 {
        match self {
            FInstr::Halt => 0,
            FInstr::Nop => 1,
            FInstr::Const(..) => 2,
            FInstr::Mov(..) => 3,
            FInstr::Bin(op, ..) => OP_BIN + op.code(),
            FInstr::And(..) => 10,
            FInstr::Or(..) => 11,
            FInstr::ShlI(..) => 12,
            FInstr::OrI(..) => 13,
            FInstr::Load(..) => 14,
            FInstr::Store(..) => 15,
            FInstr::Jal(..) => 16,
            FInstr::Jmp(..) => 17,
            FInstr::Jump(..) => 18,
            FInstr::Bnz(..) => 19,
        }
    }

    /// Encodes the instruction; `None` if the immediate does not fit.
    pub fn encode(&self) -> Option<i64> {
        let (rd, r1, r2, imm) = match *self {
            FInstr::Halt | FInstr::Nop => (0, 0, 0, 0),
            FInstr::Const(n, rd) => (rd.0, 0, 0, n),
            FInstr::Mov(rs, rd) => (rd.0, rs.0, 0, 0),
            FInstr::Bin(_, a, b, d) | FInstr::And(a, b, d) | FInstr::Or(a, b, d) => (d.0, a.0, b.0, 0),
            FInstr::ShlI(rd, n) | FInstr::OrI(rd, n) => (rd.0, 0, 0, n),
            FInstr::Load(rp, rd) => (rd.0, rp.0, 0, 0),
            FInstr::Store(rp, rs) => (0, rp.0, rs.0, 0),
            FInstr::Jal(a) | FInstr::Jmp(a) => (0, 0, 0, a),
            FInstr::Jump(r) => (0, r.0, 0, 0),
            FInstr::Bnz(r, a) => (0, r.0, 0, a),
        };
        if !fits_imm(imm) {
            return None;
        }
        let w = self.opcode() as u64
            | (rd as u64) << 6
            | (r1 as u64) << 10
            | (r2 as u64) << 14
            | ((imm as u64) & ((1 << IMM_BITS) - 1)) << 18;
        Some(w as i64)
    }

    /// Decodes a word; `None` for words that are not instructions.
    pub fn decode(w: i64) -> Option<FInstr> {
        let w = w as u64;
        let op = (w & 63) as u8;
        let reg = |shift: u32| {
            let r = ((w >> shift) & 15) as u8;
            (r < R::COUNT as u8).then_some(R(r))
        };
        let imm = ((w as i64) >> 18) as i64;
        let (rd, r1, r2) = (reg(6)?, reg(10)?, reg(14)?);
        Some(match op {
            0 => FInstr::Halt,
            1 => FInstr::Nop,
            2 => FInstr::Const(imm, rd),
            3 => FInstr::Mov(r1, rd),
            4..=9 => FInstr::Bin(BinOp::from_code(op - OP_BIN)?, r1, r2, rd),
            10 => FInstr::And(r1, r2, rd),
            11 => FInstr::Or(r1, r2, rd),
            12 => FInstr::ShlI(rd, imm),
            13 => FInstr::OrI(rd, imm),
            14 => FInstr::Load(r1, rd),
            15 => FInstr::Store(r1, r2),
            16 => FInstr::Jal(imm),
            17 => FInstr::Jmp(imm),
            18 => FInstr::Jump(r1),
            19 => FInstr::Bnz(r1, imm),
            _ => return None,
        })
    }

    /// Instructions loading an arbitrary 64-bit constant into `rd`.
    pub fn load_const(n: i64, rd: R) -> Vec<FInstr> {
        if fits_imm(n) {
            vec![FInstr::Const(n, rd)]
        } else {
            vec![
                FInstr::Const(n >> 32, rd),
                FInstr::ShlI(rd, 32),
                FInstr::OrI(rd, n & 0xffff_ffff),
            ]
        }
    }
}

impl fmt::Display for FInstr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FInstr::Halt => write!(f, "halt"),
            FInstr::Nop => write!(f, "nop"),
            FInstr::Const(n, rd) => write!(f, "const {n} -> {rd}"),
            FInstr::Mov(rs, rd) => write!(f, "mov {rs} -> {rd}"),
            FInstr::Bin(op, a, b, d) => write!(f, "{a} {op} {b} -> {d}"),
            FInstr::And(a, b, d) => write!(f, "{a} & {b} -> {d}"),
            FInstr::Or(a, b, d) => write!(f, "{a} | {b} -> {d}"),
            FInstr::ShlI(rd, n) => write!(f, "{rd} <<= {n}"),
            FInstr::OrI(rd, n) => write!(f, "{rd} |= {n:#x}"),
            FInstr::Load(rp, rd) => write!(f, "load *{rp} -> {rd}"),
            FInstr::Store(rp, rs) => write!(f, "store *{rp} <- {rs}"),
            FInstr::Jal(a) => write!(f, "jal {a:#x}"),
            FInstr::Jmp(a) => write!(f, "jmp {a:#x}"),
            FInstr::Jump(r) => write!(f, "jump {r}"),
            FInstr::Bnz(r, a) => write!(f, "bnz {r} {a:#x}"),
        }
    }
}

/// Integer semantics of the arithmetic operators on raw words.
pub fn alu(op: BinOp, a: i64, b: i64) -> i64 {
    match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Eq => (a == b) as i64,
        BinOp::Lt => (a < b) as i64,
        BinOp::Le => (a <= b) as i64,
    }
}

/// Disassembles a word, or shows it as data.
pub fn show_word(w: i64) -> String {
    match FInstr::decode(w) {
        Some(i) if w != 0 => i.to_string(),
        _ => format!(".word {w}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_word_is_halt() {
        assert_eq!(FInstr::decode(0), Some(FInstr::Halt));
        assert_eq!(FInstr::Halt.encode(), Some(0));
    }

    #[test]
    fn wide_constants_expand() {
        assert_eq!(FInstr::load_const(5, R::COM).len(), 1);
        let seq = FInstr::load_const(i64::MIN + 7, R::COM);
        assert_eq!(seq.len(), 3);
        let mut v = 0i64;
        for i in seq {
            match i {
                FInstr::Const(n, _) => v = n,
                FInstr::ShlI(_, n) => v <<= n,
                FInstr::OrI(_, n) => v |= n,
                _ => unreachable!(),
            }
        }
        assert_eq!(v, i64::MIN + 7);
    }

    fn arb_reg() -> impl Strategy<Value = R> {
        (0u8..R::COUNT as u8).prop_map(R)
    }

    fn arb_instr() -> impl Strategy<Value = FInstr> {
        let imm = IMM_MIN..=IMM_MAX;
        prop_oneof![
            Just(FInstr::Halt),
            Just(FInstr::Nop),
            (imm.clone(), arb_reg()).prop_map(|(n, r)| FInstr::Const(n, r)),
            (arb_reg(), arb_reg()).prop_map(|(a, b)| FInstr::Mov(a, b)),
            (0usize..6, arb_reg(), arb_reg(), arb_reg())
                .prop_map(|(o, a, b, c)| FInstr::Bin(BinOp::ALL[o], a, b, c)),
            (arb_reg(), arb_reg(), arb_reg()).prop_map(|(a, b, c)| FInstr::And(a, b, c)),
            (arb_reg(), arb_reg(), arb_reg()).prop_map(|(a, b, c)| FInstr::Or(a, b, c)),
            (arb_reg(), 0i64..64).prop_map(|(r, n)| FInstr::ShlI(r, n)),
            (arb_reg(), imm.clone()).prop_map(|(r, n)| FInstr::OrI(r, n)),
            (arb_reg(), arb_reg()).prop_map(|(a, b)| FInstr::Load(a, b)),
            (arb_reg(), arb_reg()).prop_map(|(a, b)| FInstr::Store(a, b)),
            imm.clone().prop_map(FInstr::Jal),
            imm.clone().prop_map(FInstr::Jmp),
            arb_reg().prop_map(FInstr::Jump),
            (arb_reg(), imm).prop_map(|(r, n)| FInstr::Bnz(r, n)),
        ]
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(i in arb_instr()) {
            let w = i.encode().unwrap();
            prop_assert_eq!(FInstr::decode(w), Some(i));
        }
    }
}
