//! The compartmentalized abstract machine: per-component block memory, a
//! protected cross-component call stack, and `Call`/`Return` as the only way
//! to transfer control between components.

mod codec;
mod exec;
mod isa;
mod program;

pub use codec::{load_machine_program, save_machine_program};
pub(crate) use codec::{get_interface, put_interface};
pub use exec::{mrun, mrun_observed, mstep, MachineRun, MachineState, Step};
pub use isa::{Imm, Instr, Label, Reg};
pub use program::{DataBlock, MachineComponent, MachineError, MachineProgram, ProcEntries};

#[cfg(test)]
mod tests;
