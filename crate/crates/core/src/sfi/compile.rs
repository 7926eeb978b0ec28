//! Instrumenting compiler from machine programs to SFI images.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::layout::{LayoutConfig, LayoutError};
use crate::flat::{FInstr, R};
use crate::machine::{Imm, Instr, Label, MachineComponent, MachineError, MachineProgram};
use crate::model::{ComponentId, Interface, ProcedureId, ProgramInterface};
use crate::value::{BinOp, Value};

/// Offsets of the runtime's data slot.
pub const READ_PORT: i64 = 0;
pub const WRITE_PORT: i64 = 1;
pub const SHADOW_START: i64 = 16;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SfiError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error(transparent)]
    Invalid(#[from] MachineError),
}

/// Slots given to one component.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotAssignment {
    pub code_slots: Vec<u64>,
    pub data_slots: Vec<u64>,
    /// Cell holding the next free data slot for `Alloc`; absent for the runtime.
    pub bump_cell: Option<i64>,
}

/// Addresses of instrumentation, used by the simulator, the invariant
/// checkers and the mutation operators.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SfiMeta {
    pub interface: Option<ProgramInterface>,
    pub slots: BTreeMap<ComponentId, SlotAssignment>,
    /// Entry address of every exported procedure, the environment's included.
    pub entries: BTreeMap<i64, ProcedureId>,
    /// Masked stores (address of the `Store`).
    pub store_sites: BTreeSet<i64>,
    /// Masked indirect jumps (address of the `Jump`).
    pub jump_sites: BTreeSet<i64>,
    /// Shadow-stack pushes in entry sequences.
    pub push_sites: BTreeSet<i64>,
    /// Shadow-stack pointer decrements in return sequences.
    pub pop_sites: BTreeSet<i64>,
    /// The `Jump` that ends each return sequence.
    pub return_sites: BTreeSet<i64>,
    /// Writes to the output port.
    pub mmio_sites: BTreeSet<i64>,
    /// `Halt`s reached when an allocation cannot be served.
    pub alloc_halts: BTreeSet<i64>,
    pub read_port: i64,
    pub write_port: i64,
    pub shadow_base: i64,
    pub shadow_limit: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SfiImage {
    pub cfg: LayoutConfig,
    pub memory: BTreeMap<i64, i64>,
    pub init_regs: [i64; R::COUNT],
    pub entry: i64,
    pub meta: SfiMeta,
}

impl SfiImage {
    pub fn interface(&self) -> ProgramInterface {
        self.meta.interface.clone().unwrap_or_else(|| {
            ProgramInterface::new(ProcedureId::new(ComponentId(1), "main"), [])
        })
    }

    pub fn word(&self, addr: i64) -> i64 {
        self.memory.get(&addr).copied().unwrap_or(0)
    }

    /// Listing of every code slot.
    pub fn disassemble(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "entry {:#x}", self.entry);
        for (c, a) in &self.meta.slots {
            for slot in &a.code_slots {
                let _ = writeln!(out, "\ncomponent {c} code slot {slot}");
                let lo = self.cfg.encode(c.0, *slot, 0).unwrap_or(0);
                let hi = lo + self.cfg.slot_words();
                let mut skipped = false;
                for (addr, w) in self.memory.range(lo..hi) {
                    if *w == FInstr::Nop.encode().unwrap_or(1) {
                        skipped = true;
                        continue;
                    }
                    if skipped {
                        let _ = writeln!(out, "  ...");
                        skipped = false;
                    }
                    let mut mark = String::new();
                    if let Some(p) = self.meta.entries.get(&(addr)) {
                        mark = format!("  <entry {p}>");
                    }
                    let _ = writeln!(out, "  {addr:#010x}  {}{mark}", crate::flat::show_word(*w));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
enum Tgt {
    Label(Label),
    Entry(ProcedureId),
    Local(usize),
}

#[derive(Clone, Debug)]
enum Sym {
    I(FInstr),
    Jal(Tgt),
    Bnz(R, Tgt),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Align {
    Free,
    Start,
    /// The instruction at this index must sit at offset 15 of a block, so the
    /// next address is aligned.
    JalAt(usize),
}

#[derive(Clone, Copy, Debug)]
enum Site {
    Store,
    Jump,
    Push,
    Pop,
    Return,
    Mmio,
    AllocHalt,
}

struct Unit {
    code: Vec<Sym>,
    align: Align,
    sites: Vec<(usize, Site)>,
    label: Option<Label>,
    entry: Option<(String, usize)>,
}

impl Unit {
    fn new(code: Vec<Sym>) -> Unit {
        Unit {
            code,
            align: Align::Free,
            sites: Vec::new(),
            label: None,
            entry: None,
        }
    }

    fn plain(code: Vec<FInstr>) -> Unit {
        Unit::new(code.into_iter().map(Sym::I).collect())
    }

    fn align(mut self, a: Align) -> Unit {
        self.align = a;
        self
    }

    fn site(mut self, i: usize, s: Site) -> Unit {
        self.sites.push((i, s));
        self
    }
}

/// Per-component constants the translation needs.
struct Ctx<'a> {
    cfg: LayoutConfig,
    id: u32,
    data_base: &'a BTreeMap<u32, i64>,
    bump_cell: i64,
    shadow_base: i64,
    shadow_limit: i64,
}

fn entry_unit(ctx: &Ctx, proc: &str) -> Unit {
    use FInstr::*;
    let c = ctx.id;
    let code = vec![
        Sym::I(Halt),
        Sym::I(Const(ctx.shadow_limit, R::T1)),
        Sym::I(Bin(BinOp::Lt, R::SSP, R::T1, R::T2)),
        Sym::Bnz(R::T2, Tgt::Local(5)),
        Sym::I(Halt),
        Sym::I(Store(R::SSP, R::RA)),
        Sym::I(Const(1, R::T2)),
        Sym::I(Bin(BinOp::Add, R::SSP, R::T2, R::SSP)),
        Sym::I(Const(ctx.cfg.store_or_mask(c), R::SOR)),
        Sym::I(Const(ctx.cfg.jump_or_mask(c), R::JOR)),
        Sym::I(Const(0, R::AUX1)),
        Sym::I(Const(0, R::AUX2)),
        Sym::I(Const(0, R::SP)),
        Sym::I(Const(0, R::ONE)),
        Sym::I(Const(0, R::T1)),
        Sym::I(Const(0, R::T2)),
    ];
    let mut u = Unit::new(code).align(Align::Start).site(5, Site::Push);
    u.entry = Some((proc.to_string(), 1));
    u
}

fn return_unit(ctx: &Ctx) -> Unit {
    use FInstr::*;
    Unit::new(vec![
        Sym::I(Const(ctx.shadow_base, R::T1)),
        Sym::I(Bin(BinOp::Lt, R::T1, R::SSP, R::T2)),
        Sym::Bnz(R::T2, Tgt::Local(4)),
        Sym::I(Halt),
        Sym::I(Const(1, R::T2)),
        Sym::I(Bin(BinOp::Sub, R::SSP, R::T2, R::SSP)),
        Sym::I(Load(R::SSP, R::T1)),
        Sym::I(Jump(R::T1)),
    ])
    .align(Align::Start)
    .site(5, Site::Pop)
    .site(7, Site::Return)
}

fn store_unit(rp: R, rs: R) -> Unit {
    Unit::plain(vec![
        FInstr::And(rp, R::SAND, R::T1),
        FInstr::Or(R::T1, R::SOR, R::T1),
        FInstr::Store(R::T1, rs),
    ])
    .site(2, Site::Store)
}

fn alloc_units(ctx: &Ctx, rd: R, rs: R) -> Vec<Unit> {
    use FInstr::*;
    let check = Unit::new(vec![
        Sym::I(Const(0, R::T1)),
        Sym::I(Bin(BinOp::Lt, R::T1, rs, R::T1)),
        Sym::Bnz(R::T1, Tgt::Local(4)),
        Sym::I(Halt),
        Sym::I(Const(ctx.cfg.slot_words(), R::T2)),
        Sym::I(Bin(BinOp::Le, rs, R::T2, R::T1)),
        Sym::Bnz(R::T1, Tgt::Local(8)),
        Sym::I(Halt),
        Sym::I(Const(ctx.bump_cell, R::T1)),
        Sym::I(Load(R::T1, R::T2)),
        Sym::I(Const(ctx.cfg.max_slots() as i64, rd)),
        Sym::I(Bin(BinOp::Lt, R::T2, rd, rd)),
        Sym::Bnz(rd, Tgt::Local(14)),
        Sym::I(Halt),
        Sym::I(Const(2, rd)),
        Sym::I(Bin(BinOp::Add, R::T2, rd, rd)),
    ])
    .site(3, Site::AllocHalt)
    .site(7, Site::AllocHalt)
    .site(13, Site::AllocHalt);
    let base = Unit::plain(vec![
        ShlI(R::T2, ctx.cfg.slot_shift() as i64),
        Const((ctx.id as i64) << ctx.cfg.offset_bits, rd),
        Or(R::T2, rd, rd),
    ]);
    vec![check, store_unit(R::T1, rd), base]
}

fn translate(
    ctx: &Ctx,
    comp: &MachineComponent,
    iface: &ProgramInterface,
    exported: &BTreeMap<Label, String>,
    l: Label,
    instr: &Instr,
) -> Vec<Unit> {
    use FInstr as F;
    let r = R::from_machine;
    let mut units = Vec::new();
    if let Some(p) = exported.get(&l) {
        units.push(entry_unit(ctx, p));
    }
    let mut body = match instr {
        Instr::Nop => vec![Unit::plain(vec![F::Nop])],
        Instr::Halt => vec![Unit::plain(vec![F::Halt])],
        Instr::Const(Imm::Int(n), rd) => vec![Unit::plain(FInstr::load_const(*n, r(*rd)))],
        Instr::Const(Imm::Data { block, offset }, rd) => {
            let a = ctx.data_base.get(block).copied().unwrap_or(0).wrapping_add(*offset);
            vec![Unit::plain(FInstr::load_const(a, r(*rd)))]
        }
        Instr::Mov(rs, rd) => vec![Unit::plain(vec![F::Mov(r(*rs), r(*rd))])],
        Instr::BinOp(op, a, b, d) => vec![Unit::plain(vec![F::Bin(*op, r(*a), r(*b), r(*d))])],
        Instr::Load(rp, rd) => vec![Unit::plain(vec![F::Load(r(*rp), r(*rd))])],
        Instr::Store(rp, rs) => vec![store_unit(r(*rp), r(*rs))],
        Instr::Jal(t) => vec![Unit::new(vec![Sym::Jal(Tgt::Label(*t))]).align(Align::JalAt(0))],
        Instr::Jump(rt) => vec![Unit::plain(vec![
            F::And(r(*rt), R::JAND, R::T1),
            F::Or(R::T1, R::JOR, R::T1),
            F::Jump(R::T1),
        ])
        .site(2, Site::Jump)],
        Instr::Bnz(rc, t) => vec![Unit::new(vec![Sym::Bnz(r(*rc), Tgt::Label(*t))])],
        Instr::Alloc(rd, rs) => alloc_units(ctx, r(*rd), r(*rs)),
        Instr::Call(target, proc) => {
            let callee = ProcedureId::new(*target, proc.clone());
            if iface.allows_call(comp.id(), *target, proc) {
                vec![Unit::new(vec![
                    Sym::Jal(Tgt::Entry(callee)),
                    Sym::I(F::Const(ctx.cfg.store_or_mask(ctx.id), R::SOR)),
                    Sym::I(F::Const(ctx.cfg.jump_or_mask(ctx.id), R::JOR)),
                ])
                .align(Align::JalAt(0))]
            } else {
                vec![Unit::plain(vec![F::Halt])]
            }
        }
        Instr::Return => vec![return_unit(ctx)],
    };
    body[0].label = Some(l);
    units.extend(body);
    units
}

/// Places units into code slots, inserting padding and slot-to-slot jumps.
struct Placer {
    cfg: LayoutConfig,
    id: u32,
    slots: Vec<u64>,
    offset: i64,
    /// Padding and the jumps chaining one slot to the next.
    filler: Vec<(i64, FInstr)>,
    placed: Vec<(i64, Unit)>,
}

impl Placer {
    fn new(cfg: LayoutConfig, id: u32, first_slot: u64) -> Placer {
        Placer {
            cfg,
            id,
            slots: vec![first_slot],
            offset: 0,
            filler: Vec::new(),
            placed: Vec::new(),
        }
    }

    fn addr(&self, offset: i64) -> Result<i64, SfiError> {
        Ok(self.cfg.encode(self.id, *self.slots.last().unwrap(), offset)?)
    }

    fn place(&mut self, u: Unit) -> Result<(), SfiError> {
        let sw = self.cfg.slot_words();
        let limit = sw - 16;
        let len = u.code.len() as i64;
        loop {
            let off = self.offset;
            let p = match u.align {
                Align::Start => (off + 15) & !15,
                Align::JalAt(k) => {
                    let k = k as i64;
                    let mut p = off;
                    while (p + k) % 16 != 15 {
                        p += 1;
                    }
                    p
                }
                Align::Free if off % 16 + len > 16 => (off + 15) & !15,
                Align::Free => off,
            };
            if p + len <= limit {
                for o in off..p {
                    self.filler.push((self.addr(o)?, FInstr::Nop));
                }
                let start = self.addr(p)?;
                self.offset = p + len;
                self.placed.push((start, u));
                return Ok(());
            }
            let next = self.slots.last().unwrap() + 2;
            if next >= self.cfg.max_slots() {
                return Err(SfiError::Capacity(format!(
                    "component {} needs more code slots",
                    self.id
                )));
            }
            let here = self.addr(off)?;
            self.slots.push(next);
            self.offset = 0;
            let target = self.addr(0)?;
            self.filler.push((here, FInstr::Jmp(target)));
        }
    }
}

fn value_word(v: Value, data_base: &BTreeMap<u32, i64>) -> i64 {
    match v {
        Value::Int(n) => n,
        Value::Ptr(p) => data_base.get(&p.block).copied().unwrap_or(0).wrapping_add(p.offset),
        Value::Top => 0,
    }
}

/// Compiles a machine program for the SFI target.
pub fn sfi_compile(p: &MachineProgram, cfg: LayoutConfig) -> Result<SfiImage, SfiError> {
    cfg.validate()?;
    p.validate()?;
    let iface = p.interface();
    let sw = cfg.slot_words();
    if let Some(c) = iface.components.keys().find(|c| c.0 as u64 >= cfg.max_components()) {
        return Err(SfiError::Capacity(format!(
            "component {c} does not fit {} component bits",
            cfg.component_bits
        )));
    }

    let mut memory = BTreeMap::new();
    let mut meta = SfiMeta {
        interface: Some(iface.clone()),
        read_port: cfg.encode(0, 1, READ_PORT)?,
        write_port: cfg.encode(0, 1, WRITE_PORT)?,
        shadow_base: cfg.encode(0, 1, SHADOW_START)?,
        shadow_limit: cfg.encode(0, 1, 0)? + sw,
        ..SfiMeta::default()
    };

    // data
    let mut bases: BTreeMap<ComponentId, BTreeMap<u32, i64>> = BTreeMap::new();
    for (id, c) in &p.components {
        let mut slot = 1u64;
        let mut off = 1i64;
        let mut assignment = SlotAssignment {
            data_slots: vec![1],
            ..SlotAssignment::default()
        };
        let mut base = BTreeMap::new();
        for (b, d) in &c.data {
            let len = d.len.max(0);
            if len > sw {
                return Err(SfiError::Capacity(format!(
                    "component {id}: block {b} has {len} words, slots have {sw}"
                )));
            }
            if off + len > sw {
                slot += 2;
                off = 0;
                if slot >= cfg.max_slots() {
                    return Err(SfiError::Capacity(format!("component {id}: out of data slots")));
                }
                assignment.data_slots.push(slot);
            }
            base.insert(*b, cfg.encode(id.0, slot, off)?);
            off += len;
        }
        let bump = cfg.encode(id.0, 1, 0)?;
        memory.insert(bump, slot as i64 + 2);
        assignment.bump_cell = Some(bump);
        meta.slots.insert(*id, assignment);
        bases.insert(*id, base);
    }
    for (id, c) in &p.components {
        let base = &bases[id];
        for (b, d) in &c.data {
            let start = base[b];
            let fill = value_word(d.fill, base);
            for i in 0..d.len.max(0) {
                let w = if (i as usize) < d.init.len() {
                    value_word(d.init[i as usize], base)
                } else if fill == 0 {
                    break;
                } else {
                    fill
                };
                if w != 0 {
                    memory.insert(start + i, w);
                }
            }
        }
    }

    // code
    let empty = BTreeMap::new();
    let mut placers = Vec::new();
    {
        let env = Interface::environment();
        let ctx = Ctx {
            cfg,
            id: 0,
            data_base: &empty,
            bump_cell: 0,
            shadow_base: meta.shadow_base,
            shadow_limit: meta.shadow_limit,
        };
        let mut pl = Placer::new(cfg, 0, 0);
        for proc in &env.exports {
            pl.place(entry_unit(&ctx, proc))?;
            let body = if proc == crate::model::ENV_READ {
                Unit::plain(vec![
                    FInstr::Const(meta.read_port, R::T1),
                    FInstr::Load(R::T1, R::COM),
                ])
            } else {
                Unit::plain(vec![
                    FInstr::Const(meta.write_port, R::T1),
                    FInstr::Store(R::T1, R::COM),
                    FInstr::Const(0, R::COM),
                ])
                .site(1, Site::Mmio)
            };
            pl.place(body)?;
            pl.place(return_unit(&ctx))?;
        }
        meta.slots.insert(
            ComponentId::ENV,
            SlotAssignment {
                code_slots: vec![],
                data_slots: vec![1],
                bump_cell: None,
            },
        );
        placers.push((ComponentId::ENV, pl));
    }
    for (id, c) in &p.components {
        let ctx = Ctx {
            cfg,
            id: id.0,
            data_base: &bases[id],
            bump_cell: meta.slots[id].bump_cell.unwrap_or(0),
            shadow_base: meta.shadow_base,
            shadow_limit: meta.shadow_limit,
        };
        let exported: BTreeMap<Label, String> = c
            .entries
            .iter()
            .filter_map(|(n, e)| Some((e.external?, n.clone())))
            .collect();
        let mut pl = Placer::new(cfg, id.0, 2);
        for (b, instrs) in &c.code {
            for (i, instr) in instrs.iter().enumerate() {
                let l = Label::new(*b, i as i64);
                for u in translate(&ctx, c, &iface, &exported, l, instr) {
                    pl.place(u)?;
                }
            }
        }
        placers.push((*id, pl));
    }

    // resolve
    let mut labels: BTreeMap<(ComponentId, Label), i64> = BTreeMap::new();
    for (id, pl) in &placers {
        for (start, u) in &pl.placed {
            if let Some(l) = u.label {
                labels.insert((*id, l), *start);
            }
            if let Some((proc, k)) = &u.entry {
                meta.entries.insert(start + *k as i64, ProcedureId::new(*id, proc.clone()));
            }
            for (k, s) in &u.sites {
                let a = start + *k as i64;
                match s {
                    Site::Store => meta.store_sites.insert(a),
                    Site::Jump => meta.jump_sites.insert(a),
                    Site::Push => meta.push_sites.insert(a),
                    Site::Pop => meta.pop_sites.insert(a),
                    Site::Return => meta.return_sites.insert(a),
                    Site::Mmio => meta.mmio_sites.insert(a),
                    Site::AllocHalt => meta.alloc_halts.insert(a),
                };
            }
        }
    }
    let entry_of: BTreeMap<ProcedureId, i64> =
        meta.entries.iter().map(|(a, p)| (p.clone(), *a)).collect();
    for (id, pl) in &placers {
        let mut put = |addr: i64, instr: FInstr| -> Result<(), SfiError> {
            let w = instr
                .encode()
                .ok_or_else(|| SfiError::Capacity(format!("immediate of {instr} does not fit")))?;
            memory.insert(addr, w);
            Ok(())
        };
        for (addr, instr) in &pl.filler {
            put(*addr, *instr)?;
        }
        for (start, u) in &pl.placed {
            let resolve = |t: &Tgt| -> i64 {
                match t {
                    Tgt::Label(l) => labels.get(&(*id, *l)).copied().unwrap_or(0),
                    Tgt::Entry(p) => entry_of.get(p).copied().unwrap_or(0),
                    Tgt::Local(k) => start + *k as i64,
                }
            };
            for (i, s) in u.code.iter().enumerate() {
                let instr = match s {
                    Sym::I(i) => *i,
                    Sym::Jal(t) => FInstr::Jal(resolve(t)),
                    Sym::Bnz(r, t) => FInstr::Bnz(*r, resolve(t)),
                };
                put(start + i as i64, instr)?;
            }
        }
        let a = meta.slots.entry(*id).or_default();
        a.code_slots = pl.slots.clone();
    }

    let main = p.main.component;
    let start = p.start_label().ok_or(MachineError::MissingMain(p.main.clone()))?;
    let entry = labels[&(main, start)];
    let mut init_regs = [0i64; R::COUNT];
    init_regs[R::ONE.0 as usize] = 1;
    init_regs[R::SAND.0 as usize] = cfg.store_and_mask();
    init_regs[R::SOR.0 as usize] = cfg.store_or_mask(main.0);
    init_regs[R::JAND.0 as usize] = cfg.jump_and_mask();
    init_regs[R::JOR.0 as usize] = cfg.jump_or_mask(main.0);
    init_regs[R::SSP.0 as usize] = meta.shadow_base;
    Ok(SfiImage {
        cfg,
        memory,
        init_regs,
        entry,
        meta,
    })
}
