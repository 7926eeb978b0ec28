use crate::machine::MachineProgram;
use crate::model::{Outcome, TracePrefix};
use crate::mp::{mp_compile, mp_run};
use crate::sfi::{mutate_instrumentation, sfi_compile, sfi_run, LayoutConfig, Mutation};

use super::verdict::Backend;

/// Budgets and knobs shared by the harness tests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HarnessOptions {
    /// Steps for source and compartmentalized-machine runs.
    pub fuel: u64,
    /// Target runs get `fuel` times these factors, since one machine
    /// instruction expands to several target instructions.
    pub sfi_fuel_factor: u64,
    pub mp_fuel_factor: u64,
    /// Longer target traces are cut to this many events before
    /// back-translation, whose output grows with the trace.
    pub max_events: usize,
    pub layout: LayoutConfig,
    /// Break the SFI instrumentation before running.
    pub mutation: Option<Mutation>,
    pub shrink: bool,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        HarnessOptions {
            fuel: 100_000,
            sfi_fuel_factor: 32,
            mp_fuel_factor: 8,
            max_events: 256,
            layout: LayoutConfig::default(),
            mutation: None,
            shrink: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetRun {
    pub trace: TracePrefix,
    pub outcome: Outcome,
}

/// Compiles `m` through `backend` and runs it. `Err` carries a discard
/// reason: the program does not fit the layout or the mutation has no site.
pub fn run_target(
    m: &MachineProgram,
    tape: &[i64],
    backend: Backend,
    opts: &HarnessOptions,
) -> Result<TargetRun, String> {
    match backend {
        Backend::Sfi => {
            let mut img = sfi_compile(m, opts.layout).map_err(|e| format!("sfi layout: {e}"))?;
            if let Some(mu) = opts.mutation {
                img = mutate_instrumentation(&img, mu).map_err(|e| e.to_string())?;
            }
            let r = sfi_run(&img, opts.fuel * opts.sfi_fuel_factor, tape);
            Ok(TargetRun {
                trace: r.trace,
                outcome: r.outcome,
            })
        }
        Backend::Mp => {
            let img = mp_compile(m);
            let r = mp_run(&img, opts.fuel * opts.mp_fuel_factor, tape);
            Ok(TargetRun {
                trace: r.trace,
                outcome: r.outcome,
            })
        }
    }
}
