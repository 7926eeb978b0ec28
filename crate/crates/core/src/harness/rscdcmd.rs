//! The executable security test: compile a generated program, run it on a
//! target, and check that every compromised component can be replaced by a
//! source component that explains the target trace.

use crate::backtranslate::back_translate_components;
use crate::compiler::compile_program;
use crate::machine::mrun;
use crate::model::{prec_blame, prefix_leq, ComponentId, Outcome, TracePrefix};
use crate::source::{print_source, SourceProgram};

use super::gen::{gen_source, GenConfig};
use super::shrink::shrink;
use super::target::{run_target, HarnessOptions};
use super::verdict::{Backend, Counterexample, TestVerdict, Variant};

pub const REL_PREFIX_OR_BLAME: &str = "t_t <= t_s or t_s <_blame t_t";
pub const REL_PREFIX: &str = "t_t <= t_s";
pub const REL_BLAME: &str = "undef in replaced component";
pub const REL_RESIDUAL_UNDEF: &str = "undef after replacing all undefined components";
pub const REL_BACKTRANSLATE: &str = "back-translation";

/// Outcome of one test case before it becomes a verdict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CaseResult {
    Pass,
    Discard(String),
    Fail(CaseFailure),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseFailure {
    pub relation: String,
    pub target: TracePrefix,
    pub source: TracePrefix,
    pub replaced: Vec<ComponentId>,
}

enum Judgement {
    Holds,
    Fails,
    /// The source run ran out of fuel while still following the target.
    Inconclusive,
}

fn events_prefix(a: &TracePrefix, b: &TracePrefix) -> bool {
    a.events.len() <= b.events.len() && a.events[..] == b.events[..a.events.len()]
}

fn judge(tt: &TracePrefix, ts: &TracePrefix, out: &Outcome, blamed: &[ComponentId]) -> Judgement {
    if prefix_leq(tt, ts) || prec_blame(ts, tt, blamed) {
        Judgement::Holds
    } else if *out == Outcome::OutOfFuel && events_prefix(ts, tt) {
        Judgement::Inconclusive
    } else {
        Judgement::Fails
    }
}

/// Non-environment components of `t`, in order of first appearance.
pub fn participants(t: &TracePrefix) -> Vec<ComponentId> {
    let mut out = Vec::new();
    for e in &t.events {
        for c in [e.src(), e.dst()] {
            if !c.is_env() && !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out
}

fn relinked_run(
    src: &SourceProgram,
    tt: &TracePrefix,
    replaced: &[ComponentId],
    opts: &HarnessOptions,
) -> Result<(TracePrefix, Outcome), CaseFailure> {
    let prog = if replaced.is_empty() {
        src.clone()
    } else {
        let parts = back_translate_components(tt, &src.interface(), replaced).map_err(|e| {
            CaseFailure {
                relation: format!("{REL_BACKTRANSLATE}: {e}"),
                target: tt.clone(),
                source: TracePrefix::default(),
                replaced: replaced.to_vec(),
            }
        })?;
        src.with_replaced(&parts)
    };
    Ok(mrun(&compile_program(&prog), opts.fuel, &src.env_tape))
}

/// Runs the security test on a given program.
pub fn rscdcmd_case(
    src: &SourceProgram,
    backend: Backend,
    variant: Variant,
    opts: &HarnessOptions,
) -> CaseResult {
    let machine = compile_program(src);
    let target = match run_target(&machine, &src.env_tape, backend, opts) {
        Ok(t) => t,
        Err(reason) => return CaseResult::Discard(reason),
    };
    let mut tt = target.trace;
    if tt.events.len() > opts.max_events {
        tt = tt.truncate(opts.max_events);
    }
    if tt.events.is_empty() {
        return CaseResult::Discard("empty target trace".into());
    }
    let fail = |relation: &str, ts: TracePrefix, replaced: &[ComponentId]| {
        CaseResult::Fail(CaseFailure {
            relation: relation.to_string(),
            target: tt.clone(),
            source: ts,
            replaced: replaced.to_vec(),
        })
    };
    match variant {
        Variant::EachComponent => {
            let mut replaced = Vec::new();
            let mut inconclusive = false;
            for c in participants(&tt).into_iter().take(src.components.len()) {
                replaced.push(c);
                let (ts, out) = match relinked_run(src, &tt, &replaced, opts) {
                    Ok(r) => r,
                    Err(f) => return CaseResult::Fail(f),
                };
                if ts.undef_component().is_some_and(|u| replaced.contains(&u)) {
                    return fail(REL_BLAME, ts, &replaced);
                }
                let blamed: Vec<ComponentId> = src
                    .components
                    .keys()
                    .filter(|k| !replaced.contains(k))
                    .copied()
                    .collect();
                match judge(&tt, &ts, &out, &blamed) {
                    Judgement::Holds => {}
                    Judgement::Inconclusive => inconclusive = true,
                    Judgement::Fails => return fail(REL_PREFIX_OR_BLAME, ts, &replaced),
                }
            }
            if inconclusive {
                CaseResult::Discard("source fuel".into())
            } else {
                CaseResult::Pass
            }
        }
        Variant::AllUndefined => {
            let mut undefined: Vec<ComponentId> = Vec::new();
            loop {
                let (ts, out) = match relinked_run(src, &tt, &undefined, opts) {
                    Ok(r) => r,
                    Err(f) => return CaseResult::Fail(f),
                };
                match ts.undef_component() {
                    Some(u) if undefined.contains(&u) => return fail(REL_BLAME, ts, &undefined),
                    Some(u) if undefined.len() < src.components.len() => undefined.push(u),
                    Some(_) => return fail(REL_RESIDUAL_UNDEF, ts, &undefined),
                    None => {
                        return match judge(&tt, &ts, &out, &[]) {
                            Judgement::Holds => CaseResult::Pass,
                            Judgement::Inconclusive => CaseResult::Discard("source fuel".into()),
                            Judgement::Fails => fail(REL_PREFIX, ts, &undefined),
                        }
                    }
                }
            }
        }
    }
}

/// Turns a failing case into a counterexample, shrinking the program while
/// `still_fails` holds.
pub(crate) fn counterexample<F>(
    seed: u64,
    src: &SourceProgram,
    failure: CaseFailure,
    opts: &HarnessOptions,
    still_fails: F,
) -> TestVerdict
where
    F: Fn(&SourceProgram) -> bool,
{
    let shrunk = opts.shrink.then(|| print_source(&shrink(src, still_fails)));
    TestVerdict::Fail(Box::new(Counterexample {
        seed,
        relation: failure.relation,
        program: print_source(src),
        target_trace: failure.target.to_text(),
        source_trace: failure.source.to_text(),
        replaced: failure.replaced,
        shrunk,
    }))
}

pub fn run_rscdcmd_test(cfg: &GenConfig, backend: Backend, variant: Variant) -> TestVerdict {
    run_rscdcmd_test_with(cfg, backend, variant, &HarnessOptions::default())
}

pub fn run_rscdcmd_test_with(
    cfg: &GenConfig,
    backend: Backend,
    variant: Variant,
    opts: &HarnessOptions,
) -> TestVerdict {
    let src = gen_source(cfg);
    match rscdcmd_case(&src, backend, variant, opts) {
        CaseResult::Pass => TestVerdict::Pass,
        CaseResult::Discard(r) => TestVerdict::discard(r),
        CaseResult::Fail(f) => counterexample(cfg.seed, &src, f, opts, |p| {
            matches!(rscdcmd_case(p, backend, variant, opts), CaseResult::Fail(_))
        }),
    }
}
