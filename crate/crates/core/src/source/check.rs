//! Well-formedness of source programs against their interfaces.

use crate::model::{ComponentId, InterfaceError, ProcedureId};

use super::ast::SourceProgram;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum WellFormednessError {
    #[error(transparent)]
    Interface(#[from] InterfaceError),
    #[error("component {0} exports `{1}` but does not define it")]
    ExportNotImplemented(ComponentId, String),
    #[error("{caller} calls {target}, which it does not import")]
    CallNotImported { caller: ProcedureId, target: ProcedureId },
    #[error("{caller} calls undefined internal procedure `{name}`")]
    UnknownProcedure { caller: ProcedureId, name: String },
    #[error("main procedure {0} is not defined")]
    MissingMain(ProcedureId),
    #[error("the environment (component 0) cannot have an implementation")]
    EnvironmentDefined,
    #[error("component {0} has a negative buffer size")]
    BadBuffer(ComponentId),
}

/// Checks that every component satisfies its interface and that the program
/// as a whole is linkable.
pub fn check_source(p: &SourceProgram) -> Result<(), Vec<WellFormednessError>> {
    let mut errors: Vec<WellFormednessError> = Vec::new();
    if p.components.contains_key(&ComponentId::ENV) {
        errors.push(WellFormednessError::EnvironmentDefined);
    }
    if let Err(es) = p.interface().check_compatible() {
        errors.extend(es.into_iter().map(WellFormednessError::Interface));
    }
    for (id, comp) in &p.components {
        if comp.buffers.iter().any(|&b| b < 0) {
            errors.push(WellFormednessError::BadBuffer(*id));
        }
        for exp in &comp.interface.exports {
            if !comp.procedures.contains_key(exp) {
                errors.push(WellFormednessError::ExportNotImplemented(*id, exp.clone()));
            }
        }
        for (name, body) in &comp.procedures {
            let caller = ProcedureId::new(*id, name.clone());
            let mut calls = Vec::new();
            body.calls(&mut calls);
            for (c, proc) in calls {
                if c == *id {
                    if !comp.procedures.contains_key(&proc) {
                        errors.push(WellFormednessError::UnknownProcedure {
                            caller: caller.clone(),
                            name: proc,
                        });
                    }
                } else {
                    let target = ProcedureId::new(c, proc);
                    if !comp.interface.imports(&target) {
                        errors.push(WellFormednessError::CallNotImported {
                            caller: caller.clone(),
                            target,
                        });
                    }
                }
            }
        }
    }
    if p.body(p.main.component, &p.main.name).is_none() {
        errors.push(WellFormednessError::MissingMain(p.main.clone()));
    }
    errors.dedup();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}
