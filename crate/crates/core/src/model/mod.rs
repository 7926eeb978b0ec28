//! Identifiers, interfaces, traces and trace properties.

pub mod ids;
mod outcome;
pub mod property;
pub mod trace;

pub use ids::*;
pub use outcome::Outcome;
pub use property::{reads_before_writes, strengthen_zp, weaken_zp, TraceProperty};
pub use trace::*;
