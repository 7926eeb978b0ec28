//! Differential tests between adjacent levels of the chain, and the SFI
//! invariant suite on generated programs.

use crate::compiler::compile_program;
use crate::machine::mrun;
use crate::model::{prec_blame, prefix_leq, ComponentId, Outcome, TracePrefix};
use crate::sfi::{
    mutate_instrumentation, sfi_check_invariants, sfi_compile, sfi_run, InvariantReport, Mutation,
};
use crate::source::{run_source, SourceProgram};

use super::gen::{gen_source, GenConfig};
use super::rscdcmd::{counterexample, CaseFailure, CaseResult};
use super::target::{run_target, HarnessOptions};
use super::verdict::{Backend, TestVerdict};

fn events_prefix(a: &TracePrefix, b: &TracePrefix) -> bool {
    a.events.len() <= b.events.len() && a.events[..] == b.events[..a.events.len()]
}

fn compatible(a: &TracePrefix, b: &TracePrefix) -> bool {
    events_prefix(a, b) || events_prefix(b, a)
}

fn failure(relation: &str, target: &TracePrefix, source: &TracePrefix) -> CaseResult {
    CaseResult::Fail(CaseFailure {
        relation: relation.into(),
        target: target.clone(),
        source: source.clone(),
        replaced: Vec::new(),
    })
}

/// Source semantics against the compartmentalized machine. Runs that end
/// normally must agree exactly; after source undefined behavior the machine
/// may stop earlier with blame or keep going past the defined prefix.
pub fn compiler_agreement_case(src: &SourceProgram, opts: &HarnessOptions) -> CaseResult {
    let (s, so) = run_source(src, opts.fuel);
    let (t, to) = mrun(&compile_program(src), opts.fuel, &src.env_tape);
    let all: Vec<ComponentId> = src.components.keys().copied().collect();
    match so {
        Outcome::Terminated => {
            if s == t {
                CaseResult::Pass
            } else if to == Outcome::OutOfFuel && events_prefix(&t, &s) {
                CaseResult::Discard("machine fuel".into())
            } else {
                failure("source = machine", &t, &s)
            }
        }
        Outcome::Undef { .. } => {
            if prec_blame(&t, &s, &all) || prefix_leq(&s.open(), &t) {
                CaseResult::Pass
            } else if to == Outcome::OutOfFuel && events_prefix(&t, &s) {
                CaseResult::Discard("machine fuel".into())
            } else {
                failure("t <_P m or m <= t", &t, &s)
            }
        }
        _ => {
            if compatible(&s, &t) {
                CaseResult::Discard("source fuel".into())
            } else {
                failure("fuel-bounded prefixes agree", &t, &s)
            }
        }
    }
}

/// Compartmentalized machine against a back end.
pub fn backend_agreement_case(
    src: &SourceProgram,
    backend: Backend,
    opts: &HarnessOptions,
) -> CaseResult {
    let machine = compile_program(src);
    let (m, mo) = mrun(&machine, opts.fuel, &src.env_tape);
    let b = match run_target(&machine, &src.env_tape, backend, opts) {
        Ok(r) => r,
        Err(reason) => return CaseResult::Discard(reason),
    };
    let short_of_fuel = b.outcome == Outcome::OutOfFuel && events_prefix(&b.trace, &m);
    match mo {
        Outcome::Terminated => {
            if b.trace == m {
                CaseResult::Pass
            } else if short_of_fuel {
                CaseResult::Discard("target fuel".into())
            } else {
                failure("machine = target", &b.trace, &m)
            }
        }
        Outcome::Undef { component } => {
            let open = m.open();
            if !prefix_leq(&open, &b.trace) {
                return if short_of_fuel {
                    CaseResult::Discard("target fuel".into())
                } else {
                    failure("m <= target", &b.trace, &m)
                };
            }
            // A monitor stop before any further event must blame the
            // component that had control.
            match &b.outcome {
                Outcome::Violation { component: v, .. }
                    if b.trace.events.len() == m.events.len() && *v != component =>
                {
                    failure("violation blames the undefined component", &b.trace, &m)
                }
                _ => CaseResult::Pass,
            }
        }
        _ => {
            if compatible(&m, &b.trace) {
                CaseResult::Discard("machine fuel".into())
            } else {
                failure("fuel-bounded prefixes agree", &b.trace, &m)
            }
        }
    }
}

fn verdict<F>(cfg: &GenConfig, opts: &HarnessOptions, case: F) -> TestVerdict
where
    F: Fn(&SourceProgram) -> CaseResult,
{
    let src = gen_source(cfg);
    match case(&src) {
        CaseResult::Pass => TestVerdict::Pass,
        CaseResult::Discard(r) => TestVerdict::discard(r),
        CaseResult::Fail(f) => counterexample(cfg.seed, &src, f, opts, |p| {
            matches!(case(p), CaseResult::Fail(_))
        }),
    }
}

pub fn run_compiler_agreement_test(cfg: &GenConfig, opts: &HarnessOptions) -> TestVerdict {
    verdict(cfg, opts, |p| compiler_agreement_case(p, opts))
}

pub fn run_backend_agreement_test(cfg: &GenConfig, backend: Backend) -> TestVerdict {
    run_backend_agreement_test_with(cfg, backend, &HarnessOptions::default())
}

pub fn run_backend_agreement_test_with(
    cfg: &GenConfig,
    backend: Backend,
    opts: &HarnessOptions,
) -> TestVerdict {
    verdict(cfg, opts, |p| backend_agreement_case(p, backend, opts))
}

/// Compiles through SFI, optionally mutates, runs and checks the three
/// invariants on the log. `Err` is a discard reason.
pub fn sfi_invariants_case(
    src: &SourceProgram,
    mutation: Option<Mutation>,
    opts: &HarnessOptions,
) -> Result<InvariantReport, String> {
    let m = compile_program(src);
    let mut img = sfi_compile(&m, opts.layout).map_err(|e| format!("sfi layout: {e}"))?;
    if let Some(mu) = mutation {
        img = mutate_instrumentation(&img, mu).map_err(|e| e.to_string())?;
    }
    let r = sfi_run(&img, opts.fuel * opts.sfi_fuel_factor, &src.env_tape);
    Ok(sfi_check_invariants(&r.log, &img))
}

fn broken_invariant(rep: &InvariantReport) -> &'static str {
    if !rep.writes_confined {
        "writes confined"
    } else if !rep.transfers_allowed {
        "transfers allowed"
    } else {
        "shadow stack well formed"
    }
}

/// Fails when some invariant is broken. With `opts.mutation` set a failure
/// is the expected detection.
pub fn run_sfi_invariants_test(cfg: &GenConfig, opts: &HarnessOptions) -> TestVerdict {
    let case = |p: &SourceProgram| match sfi_invariants_case(p, opts.mutation, opts) {
        Err(reason) => CaseResult::Discard(reason),
        Ok(rep) if rep.all_hold() => CaseResult::Pass,
        Ok(rep) => CaseResult::Fail(CaseFailure {
            relation: broken_invariant(&rep).into(),
            target: TracePrefix::default(),
            source: TracePrefix::default(),
            replaced: Vec::new(),
        }),
    };
    verdict(cfg, opts, case)
}
