use std::collections::BTreeMap;

use crate::model::{ComponentId, ProcedureId};

use super::ast::{SourceComponent, SourceProgram};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LinkError {
    #[error("component {0} is defined by more than one part")]
    DuplicateComponent(ComponentId),
    #[error("component {0} imports {1}, which no part exports")]
    UnresolvedImport(ComponentId, ProcedureId),
}

/// Links partial programs by taking the union of their components.
pub fn link_source<I>(parts: I, main: ProcedureId) -> Result<SourceProgram, LinkError>
where
    I: IntoIterator<Item = Vec<SourceComponent>>,
{
    let mut components = BTreeMap::new();
    for part in parts {
        for c in part {
            let id = c.id();
            if components.insert(id, c).is_some() {
                return Err(LinkError::DuplicateComponent(id));
            }
        }
    }
    let prog = SourceProgram {
        components,
        main,
        env_tape: Vec::new(),
    };
    let iface = prog.interface();
    for c in prog.components.values() {
        for imp in &c.interface.imports {
            if !iface.exports(imp.component, &imp.name) {
                return Err(LinkError::UnresolvedImport(c.id(), imp.clone()));
            }
        }
    }
    Ok(prog)
}

impl SourceProgram {
    /// The same program with the listed components swapped for others of the
    /// same id.
    pub fn with_replaced(&self, replacements: &[SourceComponent]) -> SourceProgram {
        let mut p = self.clone();
        for r in replacements {
            p.components.insert(r.id(), r.clone());
        }
        p
    }
}
