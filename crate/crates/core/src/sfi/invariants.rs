//! The three isolation invariants, evaluated over a run log.

use serde::{Deserialize, Serialize};

use super::compile::SfiImage;
use super::run::{SfiLog, TransferKind};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantReport {
    /// Every write lands in the writer's own data slots, except shadow-stack
    /// pushes and output-port writes at their instrumentation sites.
    pub writes_confined: bool,
    /// Every transfer out of the current component's code is an allowed
    /// entry call or a return to the address on top of the global stack.
    pub transfers_allowed: bool,
    /// The shadow stack pointer always matches the depth of the call stack
    /// rebuilt from the log.
    pub stack_well_formed: bool,
    pub first_violation: Option<String>,
}

impl InvariantReport {
    pub fn all_hold(&self) -> bool {
        self.writes_confined && self.transfers_allowed && self.stack_well_formed
    }
}

/// Words from an entry address to the instruction after its push.
const ENTRY_PUSH: i64 = 5;

/// Words from the base-check halt of a return sequence to its jump.
const RETURN_HALT_TO_SITE: i64 = 4;

pub fn sfi_check_invariants(log: &SfiLog, img: &SfiImage) -> InvariantReport {
    let cfg = img.cfg;
    let meta = &img.meta;
    let iface = img.interface();
    let mut r = InvariantReport {
        writes_confined: true,
        transfers_allowed: true,
        stack_well_formed: true,
        first_violation: None,
    };
    let note = |r: &mut InvariantReport, msg: String| {
        if r.first_violation.is_none() {
            r.first_violation = Some(msg);
        }
    };

    for w in &log.writes {
        let own = match (cfg.decode(w.pc), cfg.decode(w.addr)) {
            (Ok(src), Ok(dst)) => src.component == dst.component && !dst.is_code(),
            _ => false,
        };
        let push = meta.push_sites.contains(&w.pc)
            && (meta.shadow_base..meta.shadow_limit).contains(&w.addr);
        let port = meta.mmio_sites.contains(&w.pc) && w.addr == meta.write_port;
        if !(own || push || port) {
            r.writes_confined = false;
            note(&mut r, format!("write at {:#x} to {:#x}", w.pc, w.addr));
        }
    }

    let mut stack: Vec<i64> = Vec::new();
    for t in &log.transfers {
        let depth = |n: usize| meta.shadow_base + n as i64;
        if t.kind == TransferKind::Jal {
            if let (Some(p), Some(src)) = (meta.entries.get(&t.target), cfg.component_of(t.pc)) {
                if iface.allows_call(crate::model::ComponentId(src), p.component, &p.name) {
                    if t.ssp != depth(stack.len()) {
                        r.stack_well_formed = false;
                        note(&mut r, format!("call at {:#x} with shadow pointer {:#x}", t.pc, t.ssp));
                    }
                    stack.push(t.pc + 1);
                    continue;
                }
            }
        }
        if meta.return_sites.contains(&t.pc) {
            match stack.pop() {
                Some(top) => {
                    if t.target != top {
                        r.transfers_allowed = false;
                        note(&mut r, format!("return at {:#x} to {:#x}, expected {top:#x}", t.pc, t.target));
                    }
                    if t.ssp != depth(stack.len()) {
                        r.stack_well_formed = false;
                        note(&mut r, format!("return at {:#x} with shadow pointer {:#x}", t.pc, t.ssp));
                    }
                }
                None => {
                    r.transfers_allowed = false;
                    r.stack_well_formed = false;
                    note(&mut r, format!("return at {:#x} with an empty stack", t.pc));
                }
            }
            continue;
        }
        // Inside an entry sequence the push has not happened yet.
        let in_entry = meta.entries.range(t.pc - ENTRY_PUSH..=t.pc).next().is_some();
        let expected = if in_entry {
            depth(stack.len().saturating_sub(1))
        } else {
            depth(stack.len())
        };
        if t.ssp != expected {
            r.stack_well_formed = false;
            note(&mut r, format!("{:?} at {:#x} with shadow pointer {:#x}", t.kind, t.pc, t.ssp));
        }
        let internal = match (cfg.decode(t.pc), cfg.decode(t.target)) {
            (Ok(src), Ok(dst)) => src.component == dst.component && dst.is_code(),
            _ => false,
        };
        if internal {
            continue;
        }
        if t.kind == TransferKind::Jump && stack.last() == Some(&t.target) {
            stack.pop();
            continue;
        }
        r.transfers_allowed = false;
        note(&mut r, format!("{:?} at {:#x} to {:#x}", t.kind, t.pc, t.target));
    }
    // The return sequence halts when it finds the shadow stack empty; with
    // calls still pending that means the pushes went missing.
    if let Some(h) = log.halted_at {
        if meta.return_sites.contains(&(h + RETURN_HALT_TO_SITE)) && !stack.is_empty() {
            r.stack_well_formed = false;
            note(&mut r, format!("empty shadow stack at {h:#x} with {} pending calls", stack.len()));
        }
    }
    r
}
