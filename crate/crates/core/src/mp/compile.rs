//! Code generation and tagging loader for the tagged machine.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::monitor::{MemTag, ValTag, NO_COLOR};
use crate::flat::{FInstr, R};
use crate::machine::{Imm, Instr, Label, MachineProgram};
use crate::model::{ComponentId, Interface, ProcedureId, ProgramInterface, ENV_READ};
use crate::value::Value;

/// `Jal` targets that invoke the allocation service, one per `(rd, rs)`.
pub const SERVICE_BASE: i64 = 16;
pub const SERVICE_LEN: i64 = 36;
pub const READ_PORT: i64 = 64;
pub const WRITE_PORT: i64 = 65;
const ENV_CODE: i64 = 128;
const FIRST_COMPONENT: i64 = 0x1000;
pub const HEAP_BASE: i64 = 1 << 40;

/// A half-open address range owned by one component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Region {
    pub start: i64,
    pub end: i64,
    pub color: ComponentId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MpImage {
    pub memory: BTreeMap<i64, i64>,
    /// Value tags other than `⊥`.
    pub vtags: BTreeMap<i64, ValTag>,
    /// Sorted, disjoint.
    pub regions: Vec<Region>,
    /// Callers allowed at each entry point.
    pub callers: BTreeMap<i64, Arc<BTreeSet<ComponentId>>>,
    pub entries: BTreeMap<i64, ProcedureId>,
    pub interface: ProgramInterface,
    pub entry: i64,
}

pub fn service_addr(rd: R, rs: R) -> i64 {
    SERVICE_BASE + rd.0 as i64 * 6 + rs.0 as i64
}

/// The `(rd, rs)` pair of an allocation service address.
pub fn service_regs(addr: i64) -> Option<(R, R)> {
    let k = addr - SERVICE_BASE;
    (0..SERVICE_LEN)
        .contains(&k)
        .then(|| (R((k / 6) as u8), R((k % 6) as u8)))
}

impl MpImage {
    pub fn color_of(&self, addr: i64) -> ComponentId {
        let i = self.regions.partition_point(|r| r.end <= addr);
        match self.regions.get(i) {
            Some(r) if r.start <= addr => r.color,
            _ => NO_COLOR,
        }
    }

    /// Tag of a word as loaded.
    pub fn tag_of(&self, addr: i64) -> MemTag {
        MemTag {
            vtag: self.vtags.get(&addr).copied().unwrap_or_default(),
            color: self.color_of(addr),
            callers: self.callers.get(&addr).cloned(),
        }
    }

    pub fn disassemble(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "entry {:#x}", self.entry);
        for r in &self.regions {
            let _ = writeln!(out, "\nregion {:#x}..{:#x} color {}", r.start, r.end, r.color);
            for (a, w) in self.memory.range(r.start..r.end) {
                let mut mark = String::new();
                if let Some(p) = self.entries.get(a) {
                    let cs: Vec<String> = self.callers[a].iter().map(|c| c.to_string()).collect();
                    mark = format!("  <entry {p}, callers {{{}}}>", cs.join(", "));
                }
                let _ = writeln!(out, "  {a:#08x}  {}{mark}", crate::flat::show_word(*w));
            }
        }
        out
    }
}

fn put(memory: &mut BTreeMap<i64, i64>, addr: i64, i: FInstr) {
    // every immediate produced here is an address below 2^41 or comes from
    // load_const
    memory.insert(addr, i.encode().unwrap_or(0));
}

/// Compiles and tags a machine program.
pub fn mp_compile(p: &MachineProgram) -> MpImage {
    let iface = p.interface();
    let mut memory = BTreeMap::new();
    let mut regions = Vec::new();
    let mut callers = BTreeMap::new();
    let mut entries = BTreeMap::new();
    let callers_of = |proc: ProcedureId| Arc::new(iface.importers_of(&proc));

    regions.push(Region {
        start: READ_PORT,
        end: WRITE_PORT + 1,
        color: ComponentId::ENV,
    });
    let mut at = ENV_CODE;
    for proc in &Interface::environment().exports {
        entries.insert(at, ProcedureId::new(ComponentId::ENV, proc.clone()));
        callers.insert(at, callers_of(ProcedureId::new(ComponentId::ENV, proc.clone())));
        let stub = if proc == ENV_READ {
            vec![
                FInstr::Const(READ_PORT, R::AUX1),
                FInstr::Load(R::AUX1, R::COM),
            ]
        } else {
            vec![
                FInstr::Const(WRITE_PORT, R::AUX1),
                FInstr::Store(R::AUX1, R::COM),
                FInstr::Const(0, R::COM),
            ]
        };
        for i in stub.into_iter().chain([FInstr::Jump(R::RA)]) {
            put(&mut memory, at, i);
            at += 1;
        }
    }
    regions.push(Region {
        start: ENV_CODE,
        end: at,
        color: ComponentId::ENV,
    });

    // addresses
    let mut start = FIRST_COMPONENT;
    let mut labels: BTreeMap<(ComponentId, Label), i64> = BTreeMap::new();
    let mut data_base: BTreeMap<ComponentId, BTreeMap<u32, i64>> = BTreeMap::new();
    let mut bounds = BTreeMap::new();
    for (id, c) in &p.components {
        let mut a = start;
        for (b, instrs) in &c.code {
            for (i, instr) in instrs.iter().enumerate() {
                labels.insert((*id, Label::new(*b, i as i64)), a);
                a += width(instr);
            }
        }
        let mut bases = BTreeMap::new();
        for (b, d) in &c.data {
            bases.insert(*b, a);
            a += d.len.max(0);
        }
        data_base.insert(*id, bases);
        bounds.insert(*id, (start, a));
        start = (a + 0x1000) & !0xfff;
    }
    let entry_addr: BTreeMap<ProcedureId, i64> = entries
        .iter()
        .map(|(a, p)| (p.clone(), *a))
        .chain(p.components.iter().flat_map(|(id, c)| {
            let labels = &labels;
            c.entries.iter().filter_map(move |(name, e)| {
                Some((ProcedureId::new(*id, name.clone()), labels[&(*id, e.external?)]))
            })
        }))
        .collect();

    for (id, c) in &p.components {
        let bases = &data_base[id];
        let word = |v: Value| match v {
            Value::Int(n) => n,
            Value::Ptr(q) => bases.get(&q.block).copied().unwrap_or(0).wrapping_add(q.offset),
            Value::Top => 0,
        };
        for (b, instrs) in &c.code {
            for (i, instr) in instrs.iter().enumerate() {
                let mut a = labels[&(*id, Label::new(*b, i as i64))];
                let label = |l: &Label| labels.get(&(*id, *l)).copied().unwrap_or(0);
                let r = R::from_machine;
                let out = match instr {
                    Instr::Nop => vec![FInstr::Nop],
                    Instr::Halt => vec![FInstr::Halt],
                    Instr::Const(Imm::Int(n), rd) => FInstr::load_const(*n, r(*rd)),
                    Instr::Const(Imm::Data { block, offset }, rd) => FInstr::load_const(
                        bases.get(block).copied().unwrap_or(0).wrapping_add(*offset),
                        r(*rd),
                    ),
                    Instr::Mov(s, d) => vec![FInstr::Mov(r(*s), r(*d))],
                    Instr::BinOp(op, x, y, d) => vec![FInstr::Bin(*op, r(*x), r(*y), r(*d))],
                    Instr::Load(rp, rd) => vec![FInstr::Load(r(*rp), r(*rd))],
                    Instr::Store(rp, rs) => vec![FInstr::Store(r(*rp), r(*rs))],
                    Instr::Jal(l) => vec![FInstr::Jal(label(l))],
                    Instr::Jump(x) => vec![FInstr::Jump(r(*x))],
                    Instr::Bnz(x, l) => vec![FInstr::Bnz(r(*x), label(l))],
                    Instr::Alloc(rd, rs) => vec![FInstr::Jal(service_addr(r(*rd), r(*rs)))],
                    Instr::Call(t, proc) => {
                        let target = ProcedureId::new(*t, proc.clone());
                        vec![FInstr::Jal(entry_addr.get(&target).copied().unwrap_or(0))]
                    }
                    Instr::Return => vec![FInstr::Jump(R::RA)],
                };
                for i in out {
                    put(&mut memory, a, i);
                    a += 1;
                }
            }
        }
        for (b, d) in &c.data {
            let base = bases[b];
            for i in 0..d.len.max(0) {
                let w = if (i as usize) < d.init.len() {
                    word(d.init[i as usize])
                } else if word(d.fill) == 0 {
                    break;
                } else {
                    word(d.fill)
                };
                if w != 0 {
                    memory.insert(base + i, w);
                }
            }
        }
        for (name, e) in &c.entries {
            if let Some(x) = e.external {
                let a = labels[&(*id, x)];
                entries.insert(a, ProcedureId::new(*id, name.clone()));
                callers.insert(a, callers_of(ProcedureId::new(*id, name.clone())));
            }
        }
        let (s, e) = bounds[id];
        regions.push(Region {
            start: s,
            end: e,
            color: *id,
        });
    }

    let entry = p
        .start_label()
        .and_then(|l| labels.get(&(p.main.component, l)).copied())
        .unwrap_or(0);
    MpImage {
        memory,
        vtags: BTreeMap::new(),
        regions,
        callers,
        entries,
        interface: iface,
        entry,
    }
}

fn width(i: &Instr) -> i64 {
    match i {
        Instr::Const(Imm::Int(n), _) => FInstr::load_const(*n, R::COM).len() as i64,
        _ => 1,
    }
}
