//! Component identifiers and interfaces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Dense component identifier. Id 0 is the environment `E`, which is given an
/// interface but never an implementation.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ComponentId(pub u32);

impl ComponentId {
    pub const ENV: ComponentId = ComponentId(0);

    pub fn is_env(self) -> bool {
        self == Self::ENV
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Procedures exported by the environment.
pub const ENV_READ: &str = "read";
pub const ENV_WRITE: &str = "write";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProcedureId {
    pub component: ComponentId,
    pub name: String,
}

impl ProcedureId {
    pub fn new(component: ComponentId, name: impl Into<String>) -> Self {
        ProcedureId {
            component,
            name: name.into(),
        }
    }
}

impl fmt::Display for ProcedureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.component, self.name)
    }
}

/// What a component provides and what it may use. The import list is the
/// component's privilege.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interface {
    pub component: ComponentId,
    pub exports: BTreeSet<String>,
    pub imports: BTreeSet<ProcedureId>,
}

impl Interface {
    pub fn new(component: ComponentId) -> Self {
        Interface {
            component,
            ..Default::default()
        }
    }

    /// The environment's fixed interface.
    pub fn environment() -> Self {
        Interface {
            component: ComponentId::ENV,
            exports: [ENV_READ, ENV_WRITE].iter().map(|s| s.to_string()).collect(),
            imports: BTreeSet::new(),
        }
    }

    pub fn with_exports<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.exports.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn with_imports<I>(mut self, procs: I) -> Self
    where
        I: IntoIterator<Item = ProcedureId>,
    {
        self.imports.extend(procs);
        self
    }

    pub fn imports(&self, target: &ProcedureId) -> bool {
        self.imports.contains(target)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum InterfaceError {
    #[error("component {0} imports from itself ({1})")]
    SelfImport(ComponentId, ProcedureId),
    #[error("component {0} imports {1}, which is never exported")]
    UnresolvedImport(ComponentId, ProcedureId),
    #[error("interface keyed under {key} names component {found}")]
    Mismatch { key: ComponentId, found: ComponentId },
    #[error("component ids are not dense: missing {0}")]
    NotDense(ComponentId),
    #[error("main procedure {0} is not declared")]
    MissingMain(ProcedureId),
}

/// Interfaces of every component of a whole program, plus its entry point.
/// The environment's interface is always present.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramInterface {
    pub main: ProcedureId,
    pub components: BTreeMap<ComponentId, Interface>,
}

impl ProgramInterface {
    pub fn new(main: ProcedureId, interfaces: impl IntoIterator<Item = Interface>) -> Self {
        let mut components: BTreeMap<_, _> =
            interfaces.into_iter().map(|i| (i.component, i)).collect();
        components
            .entry(ComponentId::ENV)
            .or_insert_with(Interface::environment);
        ProgramInterface { main, components }
    }

    pub fn get(&self, c: ComponentId) -> Option<&Interface> {
        self.components.get(&c)
    }

    pub fn exports(&self, c: ComponentId, proc: &str) -> bool {
        self.components
            .get(&c)
            .is_some_and(|i| i.exports.contains(proc))
    }

    /// Whether `src` may call `dst.proc` under these interfaces.
    pub fn allows_call(&self, src: ComponentId, dst: ComponentId, proc: &str) -> bool {
        src != dst
            && self.exports(dst, proc)
            && self
                .components
                .get(&src)
                .is_some_and(|i| i.imports(&ProcedureId::new(dst, proc)))
    }

    /// Components other than the environment, in id order.
    pub fn user_components(&self) -> impl Iterator<Item = ComponentId> + '_ {
        self.components.keys().copied().filter(|c| !c.is_env())
    }

    /// Components whose imports include `target`.
    pub fn importers_of(&self, target: &ProcedureId) -> BTreeSet<ComponentId> {
        self.components
            .values()
            .filter(|i| i.imports.contains(target))
            .map(|i| i.component)
            .collect()
    }

    /// Linking-time compatibility: every import is exported by its owner, no
    /// component imports from itself, ids are dense.
    pub fn check_compatible(&self) -> Result<(), Vec<InterfaceError>> {
        let mut errors = Vec::new();
        for (key, iface) in &self.components {
            if *key != iface.component {
                errors.push(InterfaceError::Mismatch {
                    key: *key,
                    found: iface.component,
                });
            }
            for imp in &iface.imports {
                if imp.component == iface.component {
                    errors.push(InterfaceError::SelfImport(iface.component, imp.clone()));
                } else if !self.exports(imp.component, &imp.name) {
                    errors.push(InterfaceError::UnresolvedImport(
                        iface.component,
                        imp.clone(),
                    ));
                }
            }
        }
        let n = self.components.len() as u32;
        for id in 0..n {
            if !self.components.contains_key(&ComponentId(id)) {
                errors.push(InterfaceError::NotDense(ComponentId(id)));
            }
        }
        if self.main.component.is_env() || !self.components.contains_key(&self.main.component) {
            errors.push(InterfaceError::MissingMain(self.main.clone()));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}
