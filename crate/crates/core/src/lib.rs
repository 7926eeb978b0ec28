//! A compartmentalizing compilation chain for an unsafe component language.
//!
//! Source programs are compiled to a compartmentalized abstract machine and
//! from there to two simulated low-level targets: a flat-memory machine
//! protected by software fault isolation, and a tagged machine whose monitor
//! enforces compartments and a linear return discipline. Back-translation of
//! trace prefixes and a property-based harness test the chain's security
//! criterion end to end.

pub mod backtranslate;
pub mod codec;
pub mod compiler;
pub mod flat;
pub mod harness;
pub mod machine;
pub mod memory;
pub mod model;
pub mod mp;
pub mod sfi;
pub mod source;
pub mod value;

pub use model::{
    prec_blame, prefix_leq, project_events, well_formed_prefix, ComponentId, Event, Interface,
    Outcome, ProcedureId, ProgramInterface, Terminator, TracePrefix,
};
pub use source::{check_source, parse_source, run_source, SourceProgram};
pub use value::{BinOp, Value};
