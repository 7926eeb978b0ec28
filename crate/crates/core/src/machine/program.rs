//! Machine components and whole machine programs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::isa::{Imm, Instr, Label};
use crate::model::{ComponentId, Interface, ProcedureId, ProgramInterface};
use crate::value::Value;

/// A data block: `len` cells, the first `init.len()` with the given values
/// and the rest holding `fill`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataBlock {
    pub len: i64,
    pub fill: Value,
    pub init: Vec<Value>,
}

impl DataBlock {
    pub fn filled(len: i64, fill: Value) -> Self {
        DataBlock {
            len,
            fill,
            init: Vec::new(),
        }
    }

    pub fn get(&self, offset: i64) -> Value {
        self.init.get(offset as usize).copied().unwrap_or(self.fill)
    }
}

/// Where a procedure can be entered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcEntries {
    /// Target of same-component `Jal`s.
    pub internal: Label,
    /// Target of cross-component `Call`s; present only for exports.
    pub external: Option<Label>,
    /// Where execution begins when this procedure is the program's main.
    pub start: Option<Label>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineComponent {
    pub interface: Interface,
    pub code: BTreeMap<u32, Vec<Instr>>,
    pub data: BTreeMap<u32, DataBlock>,
    pub entries: BTreeMap<String, ProcEntries>,
}

impl MachineComponent {
    pub fn id(&self) -> ComponentId {
        self.interface.component
    }

    pub fn instr_at(&self, l: Label) -> Option<&Instr> {
        if l.offset < 0 {
            return None;
        }
        self.code.get(&l.block)?.get(l.offset as usize)
    }

    pub fn external_entry(&self, proc: &str) -> Option<Label> {
        self.entries.get(proc)?.external
    }

    /// One past the largest block id in use.
    pub fn block_bound(&self) -> u32 {
        let c = self.code.keys().next_back().map_or(0, |b| b + 1);
        let d = self.data.keys().next_back().map_or(0, |b| b + 1);
        c.max(d)
    }

    pub fn instr_count(&self) -> usize {
        self.code.values().map(Vec::len).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineProgram {
    pub components: BTreeMap<ComponentId, MachineComponent>,
    pub main: ProcedureId,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MachineError {
    #[error("component {0}: block {1} is both code and data")]
    OverlappingBlock(ComponentId, u32),
    #[error("component {0}: label {1} does not name an instruction")]
    BadLabel(ComponentId, Label),
    #[error("component {0}: constant refers to missing data block {1}")]
    BadData(ComponentId, u32),
    #[error("component {0}: external entry for `{1}`, which is not exported")]
    EntryNotExported(ComponentId, String),
    #[error("component {0}: exported `{1}` has no external entry")]
    MissingEntry(ComponentId, String),
    #[error("component {0} is keyed under a different id")]
    Mismatch(ComponentId),
    #[error("main procedure {0} has no entry")]
    MissingMain(ProcedureId),
}

impl MachineProgram {
    pub fn interface(&self) -> ProgramInterface {
        ProgramInterface::new(
            self.main.clone(),
            self.components.values().map(|c| c.interface.clone()),
        )
    }

    pub fn component(&self, c: ComponentId) -> Option<&MachineComponent> {
        self.components.get(&c)
    }

    /// Where execution starts: main's start entry, or else its internal entry.
    pub fn start_label(&self) -> Option<Label> {
        let e = self
            .components
            .get(&self.main.component)?
            .entries
            .get(&self.main.name)?;
        Some(e.start.unwrap_or(e.internal))
    }

    /// Structural checks performed when a program is loaded.
    pub fn validate(&self) -> Result<(), MachineError> {
        for (id, c) in &self.components {
            if *id != c.id() {
                return Err(MachineError::Mismatch(*id));
            }
            if let Some(b) = c.code.keys().find(|b| c.data.contains_key(b)) {
                return Err(MachineError::OverlappingBlock(*id, *b));
            }
            let label_ok = |l: Label| c.instr_at(l).is_some();
            for instrs in c.code.values() {
                for i in instrs {
                    match i {
                        Instr::Jal(l) | Instr::Bnz(_, l) if !label_ok(*l) => {
                            return Err(MachineError::BadLabel(*id, *l))
                        }
                        Instr::Const(Imm::Data { block, .. }, _) if !c.data.contains_key(block) => {
                            return Err(MachineError::BadData(*id, *block))
                        }
                        _ => {}
                    }
                }
            }
            for (name, e) in &c.entries {
                for l in [Some(e.internal), e.external, e.start].into_iter().flatten() {
                    if !label_ok(l) {
                        return Err(MachineError::BadLabel(*id, l));
                    }
                }
                if e.external.is_some() && !c.interface.exports.contains(name) {
                    return Err(MachineError::EntryNotExported(*id, name.clone()));
                }
            }
            for exp in &c.interface.exports {
                if c.external_entry(exp).is_none() {
                    return Err(MachineError::MissingEntry(*id, exp.clone()));
                }
            }
        }
        if self.start_label().is_none() {
            return Err(MachineError::MissingMain(self.main.clone()));
        }
        Ok(())
    }

    /// Components whose code refers to `target`.
    pub fn callers_of(&self, target: &ProcedureId) -> BTreeSet<ComponentId> {
        self.interface().importers_of(target)
    }

    /// Human-readable listing.
    pub fn disassemble(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "main {}", self.main);
        for (id, c) in &self.components {
            let _ = writeln!(out, "\ncomponent {id}");
            let imports: Vec<String> = c.interface.imports.iter().map(|p| p.to_string()).collect();
            let exports: Vec<&str> = c.interface.exports.iter().map(String::as_str).collect();
            let _ = writeln!(out, "  imports [{}]", imports.join(", "));
            let _ = writeln!(out, "  exports [{}]", exports.join(", "));
            for (b, d) in &c.data {
                let _ = writeln!(out, "  data {b}: {} cells, fill {}", d.len, d.fill);
            }
            for (name, e) in &c.entries {
                let _ = write!(out, "  proc {name}: internal {}", e.internal);
                if let Some(x) = e.external {
                    let _ = write!(out, ", external {x}");
                }
                if let Some(s) = e.start {
                    let _ = write!(out, ", start {s}");
                }
                out.push('\n');
            }
            for (b, instrs) in &c.code {
                let _ = writeln!(out, "  code {b}:");
                for (i, ins) in instrs.iter().enumerate() {
                    let _ = writeln!(out, "    {i:4}  {ins}");
                }
            }
        }
        out
    }
}
