//! Software fault isolation back end: machine programs compiled to a flat
//! word-addressed machine, with inline address masking, aligned instruction
//! blocks and a shadow stack for cross-component returns.

mod codec;
mod compile;
mod invariants;
mod layout;
mod mutate;
mod run;

pub use codec::{load_sfi_image, save_sfi_image};
pub use compile::{sfi_compile, SfiError, SfiImage, SfiMeta, SlotAssignment};
pub use invariants::{sfi_check_invariants, InvariantReport};
pub use layout::{LayoutConfig, LayoutError, LogicalAddr, ADDR_BITS};
pub use mutate::{mutate_instrumentation, Mutation, MutationError};
pub use run::{sfi_run, SfiLog, SfiRun, SfiState, TransferKind, TransferRecord, WriteRecord};

#[cfg(test)]
mod tests;
