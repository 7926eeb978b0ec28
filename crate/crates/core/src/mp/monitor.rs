//! Tags and the compartmentalization monitor.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::model::ComponentId;

/// Tag on a value, in a register or in memory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValTag {
    #[default]
    Bot,
    /// Linear capability to return to call depth `n`.
    Ret(u32),
}

impl fmt::Display for ValTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValTag::Bot => write!(f, "⊥"),
            ValTag::Ret(n) => write!(f, "Ret({n})"),
        }
    }
}

/// Tag on a memory word: value tag, owning component (its color) and the
/// components allowed to call to this location.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MemTag {
    pub vtag: ValTag,
    pub color: ComponentId,
    pub callers: Option<Arc<BTreeSet<ComponentId>>>,
}

/// Color of words that belong to no component.
pub const NO_COLOR: ComponentId = ComponentId(u32::MAX);

impl MemTag {
    pub fn plain(color: ComponentId) -> MemTag {
        MemTag {
            vtag: ValTag::Bot,
            color,
            callers: None,
        }
    }

    pub fn allows_caller(&self, c: ComponentId) -> bool {
        self.callers.as_ref().is_some_and(|s| s.contains(&c))
    }
}

/// `Level(n)`: the current cross-component call depth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PcTag {
    pub level: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MpOp {
    Nop,
    Const,
    Mov,
    BinOp,
    Load,
    Store,
    Bnz,
    Jal,
    Jump,
    Alloc,
}

impl MpOp {
    pub fn rule(self) -> &'static str {
        match self {
            MpOp::Nop => "nop",
            MpOp::Const => "const",
            MpOp::Mov => "mov",
            MpOp::BinOp => "binop",
            MpOp::Load => "load",
            MpOp::Store => "store",
            MpOp::Bnz => "bnz",
            MpOp::Jal => "jal",
            MpOp::Jump => "jump",
            MpOp::Alloc => "alloc",
        }
    }
}

/// Everything the monitor looks at for one instruction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MonitorInput {
    pub op: MpOp,
    pub pc: PcTag,
    /// Tag of the current instruction.
    pub ci: MemTag,
    /// Tag of the instruction that would execute next.
    pub ni: MemTag,
    /// Tag of the source register (`Mov`, `Store`) or jump target register.
    pub src: ValTag,
    /// Tag of the memory word accessed by `Load` or `Store`.
    pub mem: Option<MemTag>,
}

/// Tag updates produced by an allowed instruction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct MonitorOutput {
    pub pc: PcTag,
    pub dst: Option<ValTag>,
    pub src: Option<ValTag>,
    pub mem: Option<ValTag>,
    pub ra: Option<ValTag>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Violation {
    pub rule: &'static str,
}

/// The rule table. A pure function of its input.
pub fn mp_monitor(i: &MonitorInput) -> Result<MonitorOutput, Violation> {
    let c = i.ci.color;
    let same = i.ni.color == c;
    let deny = Err(Violation { rule: i.op.rule() });
    let keep = MonitorOutput {
        pc: i.pc,
        ..MonitorOutput::default()
    };
    match i.op {
        MpOp::Jal if !same => {
            if i.ni.allows_caller(c) {
                Ok(MonitorOutput {
                    pc: PcTag { level: i.pc.level + 1 },
                    ra: Some(ValTag::Ret(i.pc.level)),
                    ..keep
                })
            } else {
                deny
            }
        }
        MpOp::Jump if !same => match (i.src, i.pc.level.checked_sub(1)) {
            (ValTag::Ret(n), Some(m)) if n == m => Ok(MonitorOutput {
                pc: PcTag { level: n },
                src: Some(ValTag::Bot),
                ..keep
            }),
            _ => deny,
        },
        _ if !same => deny,
        MpOp::Nop | MpOp::Bnz => Ok(keep),
        MpOp::Const | MpOp::BinOp | MpOp::Alloc => Ok(MonitorOutput {
            dst: Some(ValTag::Bot),
            ..keep
        }),
        MpOp::Mov => Ok(MonitorOutput {
            src: Some(ValTag::Bot),
            dst: Some(i.src),
            ..keep
        }),
        MpOp::Load => match &i.mem {
            Some(m) if m.color == c => Ok(MonitorOutput {
                mem: Some(ValTag::Bot),
                dst: Some(m.vtag),
                ..keep
            }),
            Some(_) => Ok(MonitorOutput {
                dst: Some(ValTag::Bot),
                ..keep
            }),
            None => deny,
        },
        MpOp::Store => match &i.mem {
            Some(m) if m.color == c => Ok(MonitorOutput {
                mem: Some(i.src),
                src: Some(ValTag::Bot),
                ..keep
            }),
            _ => deny,
        },
        MpOp::Jal | MpOp::Jump => Ok(MonitorOutput {
            ra: Some(ValTag::Bot),
            ..keep
        }),
    }
}

/// Memo table of monitor decisions.
#[derive(Debug, Default)]
pub struct RuleCache {
    table: HashMap<MonitorInput, Result<MonitorOutput, Violation>>,
    pub hits: u64,
    pub misses: u64,
}

impl RuleCache {
    pub fn decide(&mut self, i: &MonitorInput) -> Result<MonitorOutput, Violation> {
        if let Some(d) = self.table.get(i) {
            self.hits += 1;
            return *d;
        }
        self.misses += 1;
        let d = mp_monitor(i);
        self.table.insert(i.clone(), d);
        d
    }
}
