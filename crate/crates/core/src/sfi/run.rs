//! Simulator for SFI images.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::compile::SfiImage;
use crate::flat::{alu, FInstr, R};
use crate::model::{ComponentId, Event, Outcome, TracePrefix, ENV_READ};
use crate::source::env_answer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferKind {
    Jal,
    Jmp,
    Jump,
    Branch,
    /// Sequential execution past the end of a slot.
    Fallthrough,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteRecord {
    pub pc: i64,
    /// Component field of `pc`.
    pub component: Option<u32>,
    pub addr: i64,
    pub value: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub pc: i64,
    pub target: i64,
    pub kind: TransferKind,
    /// Shadow stack pointer when the transfer happened.
    pub ssp: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SfiLog {
    pub writes: Vec<WriteRecord>,
    pub transfers: Vec<TransferRecord>,
    pub halted_at: Option<i64>,
    pub alloc_exhausted: bool,
}

impl SfiLog {
    /// One JSON object per line: writes and transfers, then the halt record.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        let mut line = |v: serde_json::Value| {
            out.push_str(&v.to_string());
            out.push('\n');
        };
        for w in &self.writes {
            line(serde_json::json!({"write": w}));
        }
        for t in &self.transfers {
            line(serde_json::json!({"transfer": t}));
        }
        line(serde_json::json!({
            "halted_at": self.halted_at,
            "alloc_exhausted": self.alloc_exhausted,
        }));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SfiState {
    pub regs: [i64; R::COUNT],
    pub mem: HashMap<i64, i64>,
    pub pc: i64,
    tape_pos: usize,
}

impl SfiState {
    pub fn initial(img: &SfiImage) -> SfiState {
        SfiState {
            regs: img.init_regs,
            mem: img.memory.iter().map(|(a, w)| (*a, *w)).collect(),
            pc: img.entry,
            tape_pos: 0,
        }
    }

    pub fn reg(&self, r: R) -> i64 {
        self.regs[r.0 as usize]
    }

    fn set(&mut self, r: R, v: i64) {
        self.regs[r.0 as usize] = v;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SfiRun {
    pub trace: TracePrefix,
    pub log: SfiLog,
    pub outcome: Outcome,
    pub steps: u64,
}

/// Runs an image. Every word decodes to some behavior: words that are not
/// instructions halt.
pub fn sfi_run(img: &SfiImage, fuel: u64, tape: &[i64]) -> SfiRun {
    let cfg = img.cfg;
    let meta = &img.meta;
    let comp = |a: i64| ComponentId(cfg.component_of(a).unwrap_or(u32::MAX));
    let mut s = SfiState::initial(img);
    let mut log = SfiLog::default();
    let mut events = Vec::new();
    let mut steps = 0;
    let outcome = loop {
        if steps >= fuel {
            break Outcome::OutOfFuel;
        }
        steps += 1;
        let pc = s.pc;
        let instr = FInstr::decode(s.mem.get(&pc).copied().unwrap_or(0)).unwrap_or(FInstr::Halt);
        let mut next = pc.wrapping_add(1);
        let mut kind = None;
        match instr {
            FInstr::Halt => {
                log.halted_at = Some(pc);
                log.alloc_exhausted = meta.alloc_halts.contains(&pc);
                break Outcome::Terminated;
            }
            FInstr::Nop => {}
            FInstr::Const(n, rd) => s.set(rd, n),
            FInstr::Mov(rs, rd) => s.set(rd, s.reg(rs)),
            FInstr::Bin(op, a, b, d) => s.set(d, alu(op, s.reg(a), s.reg(b))),
            FInstr::And(a, b, d) => s.set(d, s.reg(a) & s.reg(b)),
            FInstr::Or(a, b, d) => s.set(d, s.reg(a) | s.reg(b)),
            FInstr::ShlI(rd, n) => s.set(rd, s.reg(rd).wrapping_shl(n as u32)),
            FInstr::OrI(rd, n) => s.set(rd, s.reg(rd) | n),
            FInstr::Load(rp, rd) => {
                let a = s.reg(rp);
                let v = if a == meta.read_port {
                    env_answer(ENV_READ, tape, &mut s.tape_pos)
                } else {
                    s.mem.get(&a).copied().unwrap_or(0)
                };
                s.set(rd, v);
            }
            FInstr::Store(rp, rs) => {
                let (addr, value) = (s.reg(rp), s.reg(rs));
                log.writes.push(WriteRecord {
                    pc,
                    component: cfg.component_of(pc),
                    addr,
                    value,
                });
                s.mem.insert(addr, value);
            }
            FInstr::Jal(t) => {
                if let Some(p) = meta.entries.get(&t) {
                    events.push(Event::Call {
                        src: comp(pc),
                        dst: p.component,
                        proc: p.name.clone(),
                        arg: s.reg(R::COM),
                    });
                }
                s.set(R::RA, next);
                next = t;
                kind = Some(TransferKind::Jal);
            }
            FInstr::Jmp(t) => {
                next = t;
                kind = Some(TransferKind::Jmp);
            }
            FInstr::Jump(r) => {
                next = s.reg(r);
                if meta.return_sites.contains(&pc) {
                    events.push(Event::Return {
                        src: comp(pc),
                        dst: comp(next),
                        arg: s.reg(R::COM),
                    });
                }
                kind = Some(TransferKind::Jump);
            }
            FInstr::Bnz(r, t) => {
                if s.reg(r) != 0 {
                    next = t;
                    kind = Some(TransferKind::Branch);
                }
            }
        }
        if kind.is_none() && next % cfg.slot_words() == 0 {
            kind = Some(TransferKind::Fallthrough);
        }
        if let Some(kind) = kind {
            log.transfers.push(TransferRecord {
                pc,
                target: next,
                kind,
                ssp: s.reg(R::SSP),
            });
        }
        s.pc = next;
    };
    SfiRun {
        trace: TracePrefix {
            events,
            terminator: outcome.terminator(),
        },
        log,
        outcome,
        steps,
    }
}
