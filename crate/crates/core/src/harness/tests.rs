use super::*;
use crate::compiler::compile_program;
use crate::machine::mrun;
use crate::model::{ComponentId, Event, Outcome, TracePrefix};
use crate::sfi::Mutation;
use crate::source::{check_source, parse_source, print_source, Expr};

fn quick() -> HarnessOptions {
    HarnessOptions {
        shrink: false,
        ..HarnessOptions::default()
    }
}

#[test]
fn generation_is_deterministic() {
    let cfg = GenConfig::default().with_seed(17);
    assert_eq!(gen_source(&cfg), gen_source(&cfg));
    assert_ne!(gen_source(&cfg), gen_source(&cfg.with_seed(18)));
}

#[test]
fn generated_programs_are_well_formed() {
    let cfg = GenConfig::default();
    for seed in 0..2000 {
        let p = gen_source(&cfg.with_seed(seed));
        assert_eq!(check_source(&p), Ok(()), "seed {seed}");
    }
}

#[test]
fn generated_programs_survive_printing() {
    let cfg = GenConfig::default();
    for seed in 0..200 {
        let p = gen_source(&cfg.with_seed(seed));
        assert_eq!(parse_source(&print_source(&p)).unwrap(), p, "seed {seed}");
    }
}

#[test]
fn no_undef_without_undef_sites() {
    let cfg = GenConfig {
        undef_probability: 0.0,
        ..GenConfig::default()
    };
    for seed in 0..200 {
        let p = gen_source(&cfg.with_seed(seed));
        let (_, out) = mrun(&compile_program(&p), 100_000, &p.env_tape);
        assert!(out.undef_component().is_none(), "seed {seed}: {out:?}");
    }
}

#[test]
fn undef_sites_do_fire() {
    let cfg = GenConfig {
        undef_probability: 1.0,
        ..GenConfig::default()
    };
    let undef = (0..100)
        .filter(|&s| {
            let p = gen_source(&cfg.with_seed(s));
            let (_, out) = mrun(&compile_program(&p), 100_000, &p.env_tape);
            out.undef_component().is_some()
        })
        .count();
    assert!(undef > 30, "{undef}");
}

#[test]
fn bodies_use_every_construct() {
    fn kinds(e: &Expr, out: &mut [bool; 11]) {
        let k = match e {
            Expr::Int(_) => 0,
            Expr::Local => 1,
            Expr::Arg => 2,
            Expr::BinOp(..) => 3,
            Expr::Seq(..) => 4,
            Expr::If(..) => 5,
            Expr::Alloc(_) => 6,
            Expr::Deref(_) => 7,
            Expr::Assign(..) => 8,
            Expr::Call(..) => 9,
            Expr::Exit => 10,
        };
        out[k] = true;
        for c in e.children() {
            kinds(c, out);
        }
    }
    let mut seen = [false; 11];
    for seed in 0..200 {
        let p = gen_source(&GenConfig::default().with_seed(seed));
        for b in p.components.values().flat_map(|c| c.procedures.values()) {
            kinds(b, &mut seen);
        }
    }
    assert!(seen.iter().all(|&b| b), "{seen:?}");
}

#[test]
fn config_validation() {
    assert!(GenConfig::default().validate().is_ok());
    let bad = GenConfig {
        components: (3, 2),
        ..GenConfig::default()
    };
    assert_eq!(bad.validate(), Err(GenConfigError::Range("components")));
    let bad = GenConfig {
        undef_probability: 1.5,
        ..GenConfig::default()
    };
    assert_eq!(bad.validate(), Err(GenConfigError::Probability));
}

#[test]
fn participants_in_order_of_appearance() {
    let t = TracePrefix::new(vec![
        Event::call(2, 0, "write", 1),
        Event::ret(0, 2, 0),
        Event::call(2, 3, "f", 0),
        Event::call(3, 1, "g", 0),
    ]);
    assert_eq!(participants(&t), vec![ComponentId(2), ComponentId(3), ComponentId(1)]);
}

const FIG6: &str = include_str!("../../../../programs/fig6.src");

#[test]
fn security_test_passes_on_the_corpus() {
    let p = parse_source(FIG6).unwrap();
    for b in [Backend::Sfi, Backend::Mp] {
        for v in [Variant::EachComponent, Variant::AllUndefined] {
            assert_eq!(rscdcmd_case(&p, b, v, &quick()), CaseResult::Pass, "{b} {v}");
        }
    }
}

/// `A` stores far outside its buffer and then hands control to `B`.
const STRAY: &str = "component A { import B.f; buffer 3; main() { local[-7] := 5; B.f(1) } }
component B { import E.write; export f; buffer 3; f(x) { E.write(local[2]) } }";

#[test]
fn undefined_component_is_replaced() {
    let p = parse_source(STRAY).unwrap();
    let (m, _) = mrun(&compile_program(&p), 10_000, &[]);
    assert_eq!(m.undef_component(), Some(ComponentId(1)));
    for b in [Backend::Sfi, Backend::Mp] {
        for v in [Variant::EachComponent, Variant::AllUndefined] {
            let r = rscdcmd_case(&p, b, v, &quick());
            assert!(matches!(r, CaseResult::Pass | CaseResult::Discard(_)), "{b} {v}: {r:?}");
        }
    }
}

#[test]
fn empty_target_trace_is_discarded() {
    let p = parse_source("component A { main() { 3 } }").unwrap();
    let r = rscdcmd_case(&p, Backend::Sfi, Variant::EachComponent, &quick());
    assert_eq!(r, CaseResult::Discard("empty target trace".into()));
}

/// `A` writes into `B`'s buffer under the default layout; only the broken
/// store mask lets the write through.
const NEIGHBOR: &str = "component A { import B.f; buffer 3; main() { local[4098] := 55; B.f(1) } }
component B { import E.write; export f; buffer 3; f(x) { E.write(local[2]) } }";

#[test]
fn dropped_store_mask_fails_the_security_test() {
    let p = parse_source(NEIGHBOR).unwrap();
    let sound = rscdcmd_case(&p, Backend::Sfi, Variant::EachComponent, &quick());
    assert_eq!(sound, CaseResult::Pass);
    let broken = HarnessOptions {
        mutation: Some(Mutation::DropStoreMask),
        ..quick()
    };
    match rscdcmd_case(&p, Backend::Sfi, Variant::EachComponent, &broken) {
        CaseResult::Fail(f) => {
            assert_eq!(f.relation, REL_PREFIX_OR_BLAME);
            assert!(f.target.events.contains(&Event::call(2, 0, "write", 55)));
            assert_eq!(f.replaced, vec![ComponentId(1)]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn failing_verdict_is_shrunk_and_replayable() {
    let opts = HarnessOptions {
        mutation: Some(Mutation::DropStoreMask),
        ..HarnessOptions::default()
    };
    let cfg = GenConfig::default();
    let seed = (0..200)
        .find(|&s| {
            run_rscdcmd_test_with(&cfg.with_seed(s), Backend::Sfi, Variant::EachComponent, &quick_with(&opts))
                .is_fail()
        })
        .expect("the broken mask is caught");
    let v = run_rscdcmd_test_with(&cfg.with_seed(seed), Backend::Sfi, Variant::EachComponent, &opts);
    let TestVerdict::Fail(cx) = &v else {
        panic!("{v:?}")
    };
    assert_eq!(cx.seed, seed);
    let shrunk = parse_source(cx.shrunk.as_deref().unwrap()).unwrap();
    let original = parse_source(&cx.program).unwrap();
    assert!(shrunk.size() <= original.size());
    assert!(matches!(
        rscdcmd_case(&shrunk, Backend::Sfi, Variant::EachComponent, &opts),
        CaseResult::Fail(_)
    ));
    // Same seed, same verdict.
    assert_eq!(
        run_rscdcmd_test_with(&cfg.with_seed(seed), Backend::Sfi, Variant::EachComponent, &opts),
        v
    );
}

fn quick_with(o: &HarnessOptions) -> HarnessOptions {
    HarnessOptions {
        shrink: false,
        ..o.clone()
    }
}

#[test]
fn shrinking_keeps_the_failure() {
    let p = gen_source(&GenConfig::default().with_seed(5));
    let writes = |q: &crate::source::SourceProgram| {
        let (t, _) = mrun(&compile_program(q), 100_000, &q.env_tape);
        t.events.iter().any(|e| matches!(e, Event::Call { proc, .. } if proc == "write"))
    };
    assert!(writes(&p));
    let s = shrink(&p, writes);
    assert!(writes(&s));
    assert!(s.size() <= p.size());
    assert_eq!(check_source(&s), Ok(()));
}

#[test]
fn batches_count_and_flag() {
    let r = run_batch("t", 0, 10, |s| {
        if s < 9 {
            TestVerdict::discard("x")
        } else {
            TestVerdict::Pass
        }
    });
    assert_eq!((r.passed, r.discarded, r.failed), (1, 9, 0));
    assert!(r.generator_flag);
    assert!(!r.ok());
    assert_eq!(r.verdicts.len(), 9);
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["verdicts"][0]["verdict"], "discard");
    assert_eq!(json["verdicts"][0]["seed"], 0);
}

#[test]
fn small_batches_pass_on_both_back_ends() {
    let cfg = GenConfig::default();
    let opts = quick();
    for b in [Backend::Sfi, Backend::Mp] {
        let r = run_batch("agree", 0, 60, |s| run_backend_agreement_test_with(&cfg.with_seed(s), b, &opts));
        assert!(r.ok(), "{b}: {:?}", r.fail_relations);
        for v in [Variant::EachComponent, Variant::AllUndefined] {
            let r = run_batch("rsc", 0, 60, |s| run_rscdcmd_test_with(&cfg.with_seed(s), b, v, &opts));
            assert!(r.ok(), "{b} {v}: {:?}", r.fail_relations);
        }
    }
    let r = run_batch("agree", 0, 60, |s| run_compiler_agreement_test(&cfg.with_seed(s), &opts));
    assert!(r.ok(), "{:?}", r.fail_relations);
}

#[test]
fn fuel_exhaustion_is_a_discard() {
    let p = parse_source(
        "component A { import E.write; main() { E.write(1); A.main(0) } }",
    )
    .unwrap();
    let opts = HarnessOptions {
        fuel: 500,
        ..quick()
    };
    let r = backend_agreement_case(&p, Backend::Mp, &opts);
    assert!(matches!(r, CaseResult::Discard(_)), "{r:?}");
    let (_, out) = mrun(&compile_program(&p), 500, &[]);
    assert_eq!(out, Outcome::OutOfFuel);
}
