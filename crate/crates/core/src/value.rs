//! Values shared by the source language and the compartmentalized machine.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::ComponentId;

/// A pointer into a component's block memory. Code and data blocks share one
/// numbering per component, so a code pointer has the same shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pointer {
    pub component: ComponentId,
    pub block: u32,
    pub offset: i64,
}

impl Pointer {
    pub fn new(component: ComponentId, block: u32, offset: i64) -> Self {
        Pointer {
            component,
            block,
            offset,
        }
    }

    pub fn shift(self, by: i64) -> Self {
        Pointer {
            offset: self.offset.wrapping_add(by),
            ..self
        }
    }
}

impl fmt::Display for Pointer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.component, self.block, self.offset)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Ptr(Pointer),
    /// The undefined value.
    Top,
}

impl Value {
    pub fn as_int(self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_ptr(self) -> Option<Pointer> {
        match self {
            Value::Ptr(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_top(self) -> bool {
        self == Value::Top
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Ptr(p) => write!(f, "{p}"),
            Value::Top => write!(f, "⊤"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Lt,
    Le,
}

impl BinOp {
    pub const ALL: [BinOp; 6] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Eq,
        BinOp::Lt,
        BinOp::Le,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<BinOp> {
        Self::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

fn bool_val(b: bool) -> Value {
    Value::Int(b as i64)
}

/// Applies a binary operator. Integers wrap at 64 bits; pointers support
/// offset shifts, equality, and ordering within one block; anything else,
/// including any `Top` operand, yields `Top`.
pub fn eval_binop(op: BinOp, v1: Value, v2: Value) -> Value {
    use Value::*;
    match (op, v1, v2) {
        (_, Top, _) | (_, _, Top) => Top,
        (BinOp::Add, Int(a), Int(b)) => Int(a.wrapping_add(b)),
        (BinOp::Sub, Int(a), Int(b)) => Int(a.wrapping_sub(b)),
        (BinOp::Mul, Int(a), Int(b)) => Int(a.wrapping_mul(b)),
        (BinOp::Eq, Int(a), Int(b)) => bool_val(a == b),
        (BinOp::Lt, Int(a), Int(b)) => bool_val(a < b),
        (BinOp::Le, Int(a), Int(b)) => bool_val(a <= b),
        (BinOp::Add, Ptr(p), Int(n)) | (BinOp::Add, Int(n), Ptr(p)) => Ptr(p.shift(n)),
        (BinOp::Sub, Ptr(p), Int(n)) => Ptr(p.shift(n.wrapping_neg())),
        (BinOp::Eq, Ptr(p), Ptr(q)) => bool_val(p == q),
        (BinOp::Lt | BinOp::Le, Ptr(p), Ptr(q))
            if p.component == q.component && p.block == q.block =>
        {
            if op == BinOp::Lt {
                bool_val(p.offset < q.offset)
            } else {
                bool_val(p.offset <= q.offset)
            }
        }
        _ => Top,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(b: u32, o: i64) -> Value {
        Value::Ptr(Pointer::new(ComponentId(1), b, o))
    }

    #[test]
    fn integer_arithmetic() {
        assert_eq!(eval_binop(BinOp::Add, 2.into(), 3.into()), Value::Int(5));
        assert_eq!(eval_binop(BinOp::Mul, i64::MAX.into(), 2.into()), Value::Int(-2));
        assert_eq!(eval_binop(BinOp::Le, 3.into(), 3.into()), Value::Int(1));
        assert_eq!(eval_binop(BinOp::Lt, 3.into(), 3.into()), Value::Int(0));
    }

    #[test]
    fn pointer_arithmetic() {
        assert_eq!(eval_binop(BinOp::Add, p(0, 2), 3.into()), p(0, 5));
        assert_eq!(eval_binop(BinOp::Sub, p(0, 2), 3.into()), p(0, -1));
        assert_eq!(eval_binop(BinOp::Eq, p(0, 2), p(0, 2)), Value::Int(1));
        assert_eq!(eval_binop(BinOp::Eq, p(0, 2), p(1, 2)), Value::Int(0));
        assert_eq!(eval_binop(BinOp::Le, p(0, 1), p(1, 1)), Value::Top);
        assert_eq!(eval_binop(BinOp::Lt, p(0, 1), p(0, 4)), Value::Int(1));
        assert_eq!(eval_binop(BinOp::Mul, p(0, 1), 2.into()), Value::Top);
        assert_eq!(eval_binop(BinOp::Sub, p(0, 1), p(0, 0)), Value::Top);
        assert_eq!(eval_binop(BinOp::Eq, p(0, 1), 0.into()), Value::Top);
    }

    #[test]
    fn top_absorbs() {
        for op in BinOp::ALL {
            assert_eq!(eval_binop(op, Value::Top, 1.into()), Value::Top);
            assert_eq!(eval_binop(op, p(0, 0), Value::Top), Value::Top);
        }
    }
}
