//! Simulator for the tagged machine.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};

use super::compile::{service_regs, MpImage, HEAP_BASE, READ_PORT};
use super::monitor::{mp_monitor, MemTag, MonitorInput, MpOp, PcTag, RuleCache, ValTag};
use crate::flat::{alu, FInstr, R};
use crate::model::{ComponentId, Event, Outcome, TracePrefix, ENV_READ};
use crate::source::env_answer;

const REGS: usize = 6;

/// Largest single allocation; bigger requests are refused by the service.
pub const MAX_ALLOC: i64 = 1 << 32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MpState {
    pub regs: [(i64, ValTag); REGS],
    pub mem: HashMap<i64, i64>,
    /// Value tags other than `⊥`.
    pub vtags: HashMap<i64, ValTag>,
    /// Allocated regions: start → (end, color).
    pub heap: BTreeMap<i64, (i64, ComponentId)>,
    pub heap_next: i64,
    pub pc: i64,
    pub level: u32,
    tape_pos: usize,
}

impl MpState {
    pub fn initial(img: &MpImage) -> MpState {
        let mut regs = [(0, ValTag::Bot); REGS];
        regs[R::ONE.0 as usize].0 = 1;
        MpState {
            regs,
            mem: img.memory.iter().map(|(a, w)| (*a, *w)).collect(),
            vtags: img.vtags.iter().map(|(a, t)| (*a, *t)).collect(),
            heap: BTreeMap::new(),
            heap_next: HEAP_BASE,
            pc: img.entry,
            level: 0,
            tape_pos: 0,
        }
    }

    fn color_of(&self, img: &MpImage, addr: i64) -> ComponentId {
        if addr >= HEAP_BASE {
            if let Some((_, (end, c))) = self.heap.range(..=addr).next_back() {
                if addr < *end {
                    return *c;
                }
            }
        }
        img.color_of(addr)
    }

    pub fn tag_of(&self, img: &MpImage, addr: i64) -> MemTag {
        MemTag {
            vtag: self.vtags.get(&addr).copied().unwrap_or_default(),
            color: self.color_of(img, addr),
            callers: img.callers.get(&addr).cloned(),
        }
    }

    fn reg(&self, r: R) -> i64 {
        self.regs[r.0 as usize].0
    }

    fn tag(&self, r: R) -> ValTag {
        self.regs[r.0 as usize].1
    }

    fn set_tag(&mut self, r: R, t: ValTag) {
        self.regs[r.0 as usize].1 = t;
    }

    fn set_mem_tag(&mut self, addr: i64, t: ValTag) {
        match t {
            ValTag::Bot => self.vtags.remove(&addr),
            t => self.vtags.insert(addr, t),
        };
    }

    /// At `Level(n)`, at most one `Ret(m)` for each `m < n` across registers
    /// and memory.
    pub fn linearity_holds(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.regs
            .iter()
            .map(|(_, t)| t)
            .chain(self.vtags.values())
            .all(|t| match t {
                ValTag::Ret(m) if *m < self.level => seen.insert(*m),
                _ => true,
            })
    }
}

/// How often the linearity invariant is checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearityCheck {
    Off,
    EveryStep,
    Every(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MpOptions {
    pub cache: bool,
    pub linearity: LinearityCheck,
}

impl Default for MpOptions {
    fn default() -> Self {
        MpOptions {
            cache: true,
            linearity: LinearityCheck::Every(64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MpRun {
    pub trace: TracePrefix,
    pub outcome: Outcome,
    pub steps: u64,
    /// Step at which the linearity check first failed.
    pub linearity_failure: Option<u64>,
    /// Hash over the sequence of (pc, level, registers) of every step.
    pub digest: u64,
    pub cache_hits: u64,
}

pub fn mp_run(img: &MpImage, fuel: u64, tape: &[i64]) -> MpRun {
    mp_run_with(img, fuel, tape, MpOptions::default())
}

pub fn mp_run_with(img: &MpImage, fuel: u64, tape: &[i64], opts: MpOptions) -> MpRun {
    let mut s = MpState::initial(img);
    let mut cache = RuleCache::default();
    let mut events = Vec::new();
    let mut digest = DefaultHasher::new();
    let mut linearity_failure = None;
    let mut steps = 0;
    let outcome = loop {
        if steps >= fuel {
            break Outcome::OutOfFuel;
        }
        steps += 1;
        let check = match opts.linearity {
            LinearityCheck::Off => false,
            LinearityCheck::EveryStep => true,
            LinearityCheck::Every(k) => steps % k.max(1) == 0,
        };
        if check && linearity_failure.is_none() && !s.linearity_holds() {
            linearity_failure = Some(steps);
        }
        (s.pc, s.level, s.regs).hash(&mut digest);

        let pc = s.pc;
        let ci = s.tag_of(img, pc);
        let instr = FInstr::decode(s.mem.get(&pc).copied().unwrap_or(0)).unwrap_or(FInstr::Halt);
        let mut next = pc.wrapping_add(1);
        let mut src_reg = None;
        let mut dst_reg = None;
        let mut mem_addr = None;
        let mut alloc = None;
        let op = match instr {
            FInstr::Halt => break Outcome::Terminated,
            FInstr::Nop => MpOp::Nop,
            FInstr::Const(_, rd) => {
                dst_reg = Some(rd);
                MpOp::Const
            }
            FInstr::Mov(rs, rd) => {
                src_reg = Some(rs);
                dst_reg = Some(rd);
                MpOp::Mov
            }
            FInstr::Bin(_, _, _, rd)
            | FInstr::And(_, _, rd)
            | FInstr::Or(_, _, rd)
            | FInstr::ShlI(rd, _)
            | FInstr::OrI(rd, _) => {
                dst_reg = Some(rd);
                MpOp::BinOp
            }
            FInstr::Load(rp, rd) => {
                mem_addr = Some(s.reg(rp));
                dst_reg = Some(rd);
                MpOp::Load
            }
            FInstr::Store(rp, rs) => {
                mem_addr = Some(s.reg(rp));
                src_reg = Some(rs);
                MpOp::Store
            }
            FInstr::Bnz(r, t) => {
                if s.reg(r) != 0 {
                    next = t;
                }
                MpOp::Bnz
            }
            FInstr::Jmp(t) => {
                next = t;
                MpOp::Bnz
            }
            FInstr::Jal(t) => match service_regs(t) {
                Some((rd, rs)) => {
                    dst_reg = Some(rd);
                    alloc = Some((rd, rs));
                    MpOp::Alloc
                }
                None => {
                    next = t;
                    MpOp::Jal
                }
            },
            FInstr::Jump(r) => {
                next = s.reg(r);
                src_reg = Some(r);
                MpOp::Jump
            }
        };
        let input = MonitorInput {
            op,
            pc: PcTag { level: s.level },
            ci: ci.clone(),
            ni: s.tag_of(img, next),
            src: src_reg.map_or(ValTag::Bot, |r| s.tag(r)),
            mem: mem_addr.map(|a| s.tag_of(img, a)),
        };
        let decision = if opts.cache {
            cache.decide(&input)
        } else {
            mp_monitor(&input)
        };
        let out = match decision {
            Ok(out) => out,
            Err(v) => {
                break Outcome::Violation {
                    component: ci.color,
                    rule: v.rule.to_string(),
                }
            }
        };

        // values
        if let Some((rd, rs)) = alloc {
            let n = s.reg(rs);
            if !(1..=MAX_ALLOC).contains(&n) {
                break Outcome::Violation {
                    component: ci.color,
                    rule: MpOp::Alloc.rule().to_string(),
                };
            }
            let base = s.heap_next;
            s.heap.insert(base, (base + n, ci.color));
            s.heap_next = base + n + 1;
            s.regs[rd.0 as usize].0 = base;
        }
        match instr {
            FInstr::Const(n, rd) => s.regs[rd.0 as usize].0 = n,
            FInstr::Mov(rs, rd) => s.regs[rd.0 as usize].0 = s.reg(rs),
            FInstr::Bin(o, a, b, d) => s.regs[d.0 as usize].0 = alu(o, s.reg(a), s.reg(b)),
            FInstr::And(a, b, d) => s.regs[d.0 as usize].0 = s.reg(a) & s.reg(b),
            FInstr::Or(a, b, d) => s.regs[d.0 as usize].0 = s.reg(a) | s.reg(b),
            FInstr::ShlI(rd, n) => s.regs[rd.0 as usize].0 = s.reg(rd).wrapping_shl(n as u32),
            FInstr::OrI(rd, n) => s.regs[rd.0 as usize].0 = s.reg(rd) | n,
            FInstr::Load(rp, rd) => {
                let a = s.reg(rp);
                s.regs[rd.0 as usize].0 = if a == READ_PORT {
                    env_answer(ENV_READ, tape, &mut s.tape_pos)
                } else {
                    s.mem.get(&a).copied().unwrap_or(0)
                };
            }
            FInstr::Store(rp, rs) => {
                s.mem.insert(s.reg(rp), s.reg(rs));
            }
            FInstr::Jal(_) if alloc.is_none() => s.regs[R::RA.0 as usize].0 = pc + 1,
            _ => {}
        }

        // tags: the source is cleared before the destination is written
        if let (Some(r), Some(t)) = (src_reg, out.src) {
            s.set_tag(r, t);
        }
        if let (Some(r), Some(t)) = (dst_reg, out.dst) {
            s.set_tag(r, t);
        }
        if let (Some(a), Some(t)) = (mem_addr, out.mem) {
            s.set_mem_tag(a, t);
        }
        if let Some(t) = out.ra {
            s.set_tag(R::RA, t);
        }

        let target_color = input.ni.color;
        if target_color != ci.color {
            match op {
                MpOp::Jal => events.push(Event::Call {
                    src: ci.color,
                    dst: target_color,
                    proc: img.entries.get(&next).map_or_else(String::new, |p| p.name.clone()),
                    arg: s.reg(R::COM),
                }),
                MpOp::Jump => events.push(Event::Return {
                    src: ci.color,
                    dst: target_color,
                    arg: s.reg(R::COM),
                }),
                _ => {}
            }
        }
        s.level = out.pc.level;
        s.pc = next;
    };
    if matches!(opts.linearity, LinearityCheck::EveryStep | LinearityCheck::Every(_))
        && linearity_failure.is_none()
        && !s.linearity_holds()
    {
        linearity_failure = Some(steps);
    }
    MpRun {
        trace: TracePrefix {
            events,
            terminator: outcome.terminator(),
        },
        outcome,
        steps,
        linearity_failure,
        digest: digest.finish(),
        cache_hits: cache.hits,
    }
}
