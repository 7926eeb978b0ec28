use std::fmt;

use serde::{Deserialize, Serialize};

use super::ids::ComponentId;
use super::trace::Terminator;

/// How a bounded run ended.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    /// `exit`, a return from main, or `Halt`.
    Terminated,
    /// Undefined behavior (or a stuck machine state) blamed on a component.
    Undef { component: ComponentId },
    OutOfFuel,
    /// The tag monitor refused an instruction executed by `component`.
    Violation { component: ComponentId, rule: String },
}

impl Outcome {
    pub fn undef(c: ComponentId) -> Self {
        Outcome::Undef { component: c }
    }

    /// The trace terminator this outcome contributes, if any.
    pub fn terminator(&self) -> Option<Terminator> {
        match self {
            Outcome::Terminated => Some(Terminator::End),
            Outcome::Undef { component } => Some(Terminator::Undef(*component)),
            Outcome::OutOfFuel | Outcome::Violation { .. } => None,
        }
    }

    pub fn undef_component(&self) -> Option<ComponentId> {
        match self {
            Outcome::Undef { component } => Some(*component),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Terminated => write!(f, "terminated"),
            Outcome::Undef { component } => write!(f, "undefined behavior in {component}"),
            Outcome::OutOfFuel => write!(f, "out of fuel"),
            Outcome::Violation { component, rule } => {
                write!(f, "policy violation in {component}: {rule}")
            }
        }
    }
}
