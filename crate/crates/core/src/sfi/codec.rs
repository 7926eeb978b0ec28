//! Binary format for SFI images.
//!
//! After the `CSFI` magic and `u16` version: offset bits and component bits
//! (`u32` each), the entry address, the 13 initial registers, the memory as
//! (address, word) pairs, then the metadata: the program interface, the slot
//! assignment, the entry table and the instrumentation site sets.

use std::collections::{BTreeMap, BTreeSet};

use super::compile::{SfiImage, SfiMeta, SlotAssignment};
use super::layout::LayoutConfig;
use crate::codec::{FormatError, Reader, Writer};
use crate::flat::R;
use crate::machine::{get_interface, put_interface};
use crate::model::{ComponentId, ProcedureId, ProgramInterface};

pub const MAGIC: [u8; 4] = *b"CSFI";
pub const VERSION: u16 = 1;

fn put_set(w: &mut Writer, s: &BTreeSet<i64>) {
    w.len(s.len());
    for a in s {
        w.i64(*a);
    }
}

fn get_set(r: &mut Reader) -> Result<BTreeSet<i64>, FormatError> {
    (0..r.len()?).map(|_| r.i64()).collect()
}

fn put_slots(w: &mut Writer, s: &[u64]) {
    w.len(s.len());
    for x in s {
        w.u64(*x);
    }
}

fn get_slots(r: &mut Reader) -> Result<Vec<u64>, FormatError> {
    (0..r.len()?).map(|_| r.u64()).collect()
}

pub fn save_sfi_image(img: &SfiImage) -> Vec<u8> {
    let mut w = Writer::new(&MAGIC, VERSION);
    w.u32(img.cfg.offset_bits);
    w.u32(img.cfg.component_bits);
    w.i64(img.entry);
    for v in img.init_regs {
        w.i64(v);
    }
    w.len(img.memory.len());
    for (a, v) in &img.memory {
        w.i64(*a);
        w.i64(*v);
    }
    let m = &img.meta;
    match &m.interface {
        Some(i) => {
            w.u8(1);
            w.u32(i.main.component.0);
            w.str(&i.main.name);
            w.len(i.components.len());
            for c in i.components.values() {
                put_interface(&mut w, c);
            }
        }
        None => w.u8(0),
    }
    w.len(m.slots.len());
    for (c, s) in &m.slots {
        w.u32(c.0);
        put_slots(&mut w, &s.code_slots);
        put_slots(&mut w, &s.data_slots);
        w.i64(s.bump_cell.unwrap_or(-1));
    }
    w.len(m.entries.len());
    for (a, p) in &m.entries {
        w.i64(*a);
        w.u32(p.component.0);
        w.str(&p.name);
    }
    for s in [
        &m.store_sites,
        &m.jump_sites,
        &m.push_sites,
        &m.pop_sites,
        &m.return_sites,
        &m.mmio_sites,
        &m.alloc_halts,
    ] {
        put_set(&mut w, s);
    }
    for v in [m.read_port, m.write_port, m.shadow_base, m.shadow_limit] {
        w.i64(v);
    }
    w.finish()
}

pub fn load_sfi_image(bytes: &[u8]) -> Result<SfiImage, FormatError> {
    let mut r = Reader::new(bytes, &MAGIC, VERSION)?;
    let cfg = LayoutConfig {
        offset_bits: r.u32()?,
        component_bits: r.u32()?,
    };
    cfg.validate()
        .map_err(|e| FormatError::Invalid(e.to_string()))?;
    let entry = r.i64()?;
    let mut init_regs = [0; R::COUNT];
    for v in init_regs.iter_mut() {
        *v = r.i64()?;
    }
    let mut memory = BTreeMap::new();
    for _ in 0..r.len()? {
        let a = r.i64()?;
        memory.insert(a, r.i64()?);
    }
    let interface = match r.u8()? {
        0 => None,
        1 => {
            let main = ProcedureId::new(ComponentId(r.u32()?), r.str()?);
            let mut ifaces = Vec::new();
            for _ in 0..r.len()? {
                ifaces.push(get_interface(&mut r)?);
            }
            Some(ProgramInterface::new(main, ifaces))
        }
        t => return Err(FormatError::Invalid(format!("interface tag {t}"))),
    };
    let mut slots = BTreeMap::new();
    for _ in 0..r.len()? {
        let c = ComponentId(r.u32()?);
        let code_slots = get_slots(&mut r)?;
        let data_slots = get_slots(&mut r)?;
        let bump = r.i64()?;
        slots.insert(
            c,
            SlotAssignment {
                code_slots,
                data_slots,
                bump_cell: (bump >= 0).then_some(bump),
            },
        );
    }
    let mut entries = BTreeMap::new();
    for _ in 0..r.len()? {
        let a = r.i64()?;
        let c = ComponentId(r.u32()?);
        entries.insert(a, ProcedureId::new(c, r.str()?));
    }
    let mut sets = Vec::new();
    for _ in 0..7 {
        sets.push(get_set(&mut r)?);
    }
    let mut sets = sets.into_iter();
    let mut next = || sets.next().unwrap_or_default();
    let meta = SfiMeta {
        interface,
        slots,
        entries,
        store_sites: next(),
        jump_sites: next(),
        push_sites: next(),
        pop_sites: next(),
        return_sites: next(),
        mmio_sites: next(),
        alloc_halts: next(),
        read_port: r.i64()?,
        write_port: r.i64()?,
        shadow_base: r.i64()?,
        shadow_limit: r.i64()?,
    };
    r.finish()?;
    Ok(SfiImage {
        cfg,
        memory,
        init_regs,
        entry,
        meta,
    })
}
