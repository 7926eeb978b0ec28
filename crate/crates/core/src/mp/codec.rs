//! Binary format for tagged-machine images.
//!
//! After the `CMPI` magic and `u16` version: the entry address, memory as
//! (address, word) pairs, non-`⊥` value tags as (address, level) pairs, the
//! color regions as (start, end, color), the entry table as (address,
//! component, name, callers), and the program interface.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::compile::{MpImage, Region};
use super::monitor::ValTag;
use crate::codec::{FormatError, Reader, Writer};
use crate::machine::{get_interface, put_interface};
use crate::model::{ComponentId, ProcedureId, ProgramInterface};

pub const MAGIC: [u8; 4] = *b"CMPI";
pub const VERSION: u16 = 1;

pub fn save_mp_image(img: &MpImage) -> Vec<u8> {
    let mut w = Writer::new(&MAGIC, VERSION);
    w.i64(img.entry);
    w.len(img.memory.len());
    for (a, v) in &img.memory {
        w.i64(*a);
        w.i64(*v);
    }
    let rets: Vec<(i64, u32)> = img
        .vtags
        .iter()
        .filter_map(|(a, t)| match t {
            ValTag::Ret(n) => Some((*a, *n)),
            ValTag::Bot => None,
        })
        .collect();
    w.len(rets.len());
    for (a, n) in rets {
        w.i64(a);
        w.u32(n);
    }
    w.len(img.regions.len());
    for r in &img.regions {
        w.i64(r.start);
        w.i64(r.end);
        w.u32(r.color.0);
    }
    w.len(img.entries.len());
    for (a, p) in &img.entries {
        w.i64(*a);
        w.u32(p.component.0);
        w.str(&p.name);
        let cs = img.callers.get(a).map(|s| s.as_ref().clone()).unwrap_or_default();
        w.len(cs.len());
        for c in cs {
            w.u32(c.0);
        }
    }
    w.u32(img.interface.main.component.0);
    w.str(&img.interface.main.name);
    w.len(img.interface.components.len());
    for i in img.interface.components.values() {
        put_interface(&mut w, i);
    }
    w.finish()
}

pub fn load_mp_image(bytes: &[u8]) -> Result<MpImage, FormatError> {
    let mut r = Reader::new(bytes, &MAGIC, VERSION)?;
    let entry = r.i64()?;
    let mut memory = BTreeMap::new();
    for _ in 0..r.len()? {
        let a = r.i64()?;
        memory.insert(a, r.i64()?);
    }
    let mut vtags = BTreeMap::new();
    for _ in 0..r.len()? {
        let a = r.i64()?;
        vtags.insert(a, ValTag::Ret(r.u32()?));
    }
    let mut regions: Vec<Region> = Vec::new();
    for _ in 0..r.len()? {
        let region = Region {
            start: r.i64()?,
            end: r.i64()?,
            color: ComponentId(r.u32()?),
        };
        if region.start > region.end || regions.last().is_some_and(|p| p.end > region.start) {
            return Err(FormatError::Invalid("color regions overlap or are unsorted".into()));
        }
        regions.push(region);
    }
    let mut entries = BTreeMap::new();
    let mut callers = BTreeMap::new();
    for _ in 0..r.len()? {
        let a = r.i64()?;
        let p = ProcedureId::new(ComponentId(r.u32()?), r.str()?);
        let mut cs = BTreeSet::new();
        for _ in 0..r.len()? {
            cs.insert(ComponentId(r.u32()?));
        }
        entries.insert(a, p);
        callers.insert(a, Arc::new(cs));
    }
    let main = ProcedureId::new(ComponentId(r.u32()?), r.str()?);
    let mut ifaces = Vec::new();
    for _ in 0..r.len()? {
        ifaces.push(get_interface(&mut r)?);
    }
    r.finish()?;
    Ok(MpImage {
        memory,
        vtags,
        regions,
        callers,
        entries,
        interface: ProgramInterface::new(main, ifaces),
        entry,
    })
}
