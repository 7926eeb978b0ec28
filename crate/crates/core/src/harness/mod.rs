//! Random program generation and the executable tests built on it: the
//! security test with back-translated replacements, differential agreement
//! between levels, and the SFI invariant suite.

mod agreement;
mod gen;
mod rscdcmd;
mod shrink;
mod target;
mod verdict;

pub use agreement::{
    backend_agreement_case, compiler_agreement_case, run_backend_agreement_test,
    run_backend_agreement_test_with, run_compiler_agreement_test, run_sfi_invariants_test,
    sfi_invariants_case,
};
pub use gen::{gen_program, gen_source, GenConfig, GenConfigError};
pub use rscdcmd::{
    participants, rscdcmd_case, run_rscdcmd_test, run_rscdcmd_test_with, CaseFailure, CaseResult,
    REL_BACKTRANSLATE, REL_BLAME, REL_PREFIX, REL_PREFIX_OR_BLAME, REL_RESIDUAL_UNDEF,
};
pub use shrink::shrink;
pub use target::{run_target, HarnessOptions, TargetRun};
pub use verdict::{
    run_batch, run_batch_jobs, Backend, BatchReport, Counterexample, SeedVerdict, TestVerdict, Variant,
    DISCARD_LIMIT,
};

#[cfg(test)]
mod tests;
