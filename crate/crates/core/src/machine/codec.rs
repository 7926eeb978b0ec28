//! Versioned binary format for machine programs.
//!
//! Layout after the `CMPM` magic and `u16` version: the main procedure
//! (component `u32`, name), then each component as its interface, data
//! blocks, code blocks and entry table. Strings and collections are
//! length-prefixed with a `u32`; integers are little-endian.

use std::collections::BTreeMap;

use super::isa::{Imm, Instr, Label, Reg};
use super::program::{DataBlock, MachineComponent, MachineProgram, ProcEntries};
use crate::codec::{FormatError, Reader, Writer};
use crate::model::{ComponentId, Interface, ProcedureId};
use crate::value::{BinOp, Pointer, Value};

pub const MAGIC: [u8; 4] = *b"CMPM";
pub const VERSION: u16 = 1;

fn put_value(w: &mut Writer, v: Value) {
    match v {
        Value::Int(n) => {
            w.u8(0);
            w.i64(n);
        }
        Value::Ptr(p) => {
            w.u8(1);
            w.u32(p.component.0);
            w.u32(p.block);
            w.i64(p.offset);
        }
        Value::Top => w.u8(2),
    }
}

fn get_value(r: &mut Reader) -> Result<Value, FormatError> {
    Ok(match r.u8()? {
        0 => Value::Int(r.i64()?),
        1 => Value::Ptr(Pointer::new(ComponentId(r.u32()?), r.u32()?, r.i64()?)),
        2 => Value::Top,
        t => return Err(FormatError::Invalid(format!("value tag {t}"))),
    })
}

pub(crate) fn put_interface(w: &mut Writer, i: &Interface) {
    w.u32(i.component.0);
    w.len(i.exports.len());
    for e in &i.exports {
        w.str(e);
    }
    w.len(i.imports.len());
    for p in &i.imports {
        w.u32(p.component.0);
        w.str(&p.name);
    }
}

pub(crate) fn get_interface(r: &mut Reader) -> Result<Interface, FormatError> {
    let mut i = Interface::new(ComponentId(r.u32()?));
    for _ in 0..r.len()? {
        i.exports.insert(r.str()?);
    }
    for _ in 0..r.len()? {
        let c = ComponentId(r.u32()?);
        i.imports.insert(ProcedureId::new(c, r.str()?));
    }
    Ok(i)
}

fn put_label(w: &mut Writer, l: Label) {
    w.u32(l.block);
    w.i64(l.offset);
}

fn get_label(r: &mut Reader) -> Result<Label, FormatError> {
    Ok(Label::new(r.u32()?, r.i64()?))
}

fn get_reg(r: &mut Reader) -> Result<Reg, FormatError> {
    let i = r.u8()?;
    Reg::from_index(i as usize).ok_or_else(|| FormatError::Invalid(format!("register {i}")))
}

fn put_instr(w: &mut Writer, i: &Instr) {
    let reg = |w: &mut Writer, r: &Reg| w.u8(r.index() as u8);
    match i {
        Instr::Nop => w.u8(0),
        Instr::Halt => w.u8(1),
        Instr::Const(imm, rd) => {
            w.u8(2);
            match imm {
                Imm::Int(n) => {
                    w.u8(0);
                    w.i64(*n);
                }
                Imm::Data { block, offset } => {
                    w.u8(1);
                    w.u32(*block);
                    w.i64(*offset);
                }
            }
            reg(w, rd);
        }
        Instr::Mov(a, b) => {
            w.u8(3);
            reg(w, a);
            reg(w, b);
        }
        Instr::BinOp(op, a, b, d) => {
            w.u8(4);
            w.u8(op.code());
            reg(w, a);
            reg(w, b);
            reg(w, d);
        }
        Instr::Load(a, b) => {
            w.u8(5);
            reg(w, a);
            reg(w, b);
        }
        Instr::Store(a, b) => {
            w.u8(6);
            reg(w, a);
            reg(w, b);
        }
        Instr::Jal(l) => {
            w.u8(7);
            put_label(w, *l);
        }
        Instr::Jump(r) => {
            w.u8(8);
            reg(w, r);
        }
        Instr::Call(c, p) => {
            w.u8(9);
            w.u32(c.0);
            w.str(p);
        }
        Instr::Return => w.u8(10),
        Instr::Bnz(r, l) => {
            w.u8(11);
            reg(w, r);
            put_label(w, *l);
        }
        Instr::Alloc(a, b) => {
            w.u8(12);
            reg(w, a);
            reg(w, b);
        }
    }
}

fn get_instr(r: &mut Reader) -> Result<Instr, FormatError> {
    Ok(match r.u8()? {
        0 => Instr::Nop,
        1 => Instr::Halt,
        2 => {
            let imm = match r.u8()? {
                0 => Imm::Int(r.i64()?),
                1 => Imm::Data {
                    block: r.u32()?,
                    offset: r.i64()?,
                },
                t => return Err(FormatError::Invalid(format!("immediate tag {t}"))),
            };
            Instr::Const(imm, get_reg(r)?)
        }
        3 => Instr::Mov(get_reg(r)?, get_reg(r)?),
        4 => {
            let code = r.u8()?;
            let op = BinOp::from_code(code)
                .ok_or_else(|| FormatError::Invalid(format!("operator {code}")))?;
            Instr::BinOp(op, get_reg(r)?, get_reg(r)?, get_reg(r)?)
        }
        5 => Instr::Load(get_reg(r)?, get_reg(r)?),
        6 => Instr::Store(get_reg(r)?, get_reg(r)?),
        7 => Instr::Jal(get_label(r)?),
        8 => Instr::Jump(get_reg(r)?),
        9 => Instr::Call(ComponentId(r.u32()?), r.str()?),
        10 => Instr::Return,
        11 => Instr::Bnz(get_reg(r)?, get_label(r)?),
        12 => Instr::Alloc(get_reg(r)?, get_reg(r)?),
        op => return Err(FormatError::Invalid(format!("opcode {op}"))),
    })
}

fn put_opt_label(w: &mut Writer, l: Option<Label>) {
    match l {
        Some(l) => {
            w.u8(1);
            put_label(w, l);
        }
        None => w.u8(0),
    }
}

fn get_opt_label(r: &mut Reader) -> Result<Option<Label>, FormatError> {
    match r.u8()? {
        0 => Ok(None),
        1 => Ok(Some(get_label(r)?)),
        t => Err(FormatError::Invalid(format!("option tag {t}"))),
    }
}

pub fn save_machine_program(p: &MachineProgram) -> Vec<u8> {
    let mut w = Writer::new(&MAGIC, VERSION);
    w.u32(p.main.component.0);
    w.str(&p.main.name);
    w.len(p.components.len());
    for c in p.components.values() {
        put_interface(&mut w, &c.interface);
        w.len(c.data.len());
        for (b, d) in &c.data {
            w.u32(*b);
            w.i64(d.len);
            put_value(&mut w, d.fill);
            w.len(d.init.len());
            for v in &d.init {
                put_value(&mut w, *v);
            }
        }
        w.len(c.code.len());
        for (b, instrs) in &c.code {
            w.u32(*b);
            w.len(instrs.len());
            for i in instrs {
                put_instr(&mut w, i);
            }
        }
        w.len(c.entries.len());
        for (name, e) in &c.entries {
            w.str(name);
            put_label(&mut w, e.internal);
            put_opt_label(&mut w, e.external);
            put_opt_label(&mut w, e.start);
        }
    }
    w.finish()
}

pub fn load_machine_program(bytes: &[u8]) -> Result<MachineProgram, FormatError> {
    let mut r = Reader::new(bytes, &MAGIC, VERSION)?;
    let main = ProcedureId::new(ComponentId(r.u32()?), r.str()?);
    let mut components = BTreeMap::new();
    for _ in 0..r.len()? {
        let interface = get_interface(&mut r)?;
        let mut c = MachineComponent {
            interface,
            ..Default::default()
        };
        for _ in 0..r.len()? {
            let b = r.u32()?;
            let len = r.i64()?;
            let fill = get_value(&mut r)?;
            let mut init = Vec::new();
            for _ in 0..r.len()? {
                init.push(get_value(&mut r)?);
            }
            c.data.insert(b, DataBlock { len, fill, init });
        }
        for _ in 0..r.len()? {
            let b = r.u32()?;
            let mut instrs = Vec::new();
            for _ in 0..r.len()? {
                instrs.push(get_instr(&mut r)?);
            }
            c.code.insert(b, instrs);
        }
        for _ in 0..r.len()? {
            let name = r.str()?;
            let internal = get_label(&mut r)?;
            let external = get_opt_label(&mut r)?;
            let start = get_opt_label(&mut r)?;
            c.entries.insert(
                name,
                ProcEntries {
                    internal,
                    external,
                    start,
                },
            );
        }
        components.insert(c.id(), c);
    }
    r.finish()?;
    let p = MachineProgram { components, main };
    p.validate()
        .map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(p)
}
