//! Tag-based back end: every word carries a tag, and a monitor consulted on
//! each instruction enforces component isolation and a cross-component stack
//! discipline based on linear return capabilities.

mod codec;
mod compile;
mod monitor;
mod run;

pub use codec::{load_mp_image, save_mp_image};
pub use compile::{mp_compile, service_addr, MpImage, Region, HEAP_BASE, READ_PORT, WRITE_PORT};
pub use monitor::{
    mp_monitor, MemTag, MonitorInput, MonitorOutput, MpOp, PcTag, RuleCache, ValTag, Violation,
    NO_COLOR,
};
pub use run::{mp_run, mp_run_with, LinearityCheck, MpOptions, MpRun, MpState, MAX_ALLOC};
