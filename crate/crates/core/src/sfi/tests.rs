use super::*;
use crate::compiler::compile_program;
use crate::flat::{FInstr, R};
use crate::machine::{mrun, MachineProgram};
use crate::model::{prefix_leq, Event, Outcome};
use crate::source::parse_source;

const FIG6: &str = include_str!("../../../../programs/fig6.src");
const ECHO: &str = include_str!("../../../../programs/echo.src");
const REFACTORED: &str = include_str!("../../../../programs/refactored.src");

fn machine(text: &str) -> MachineProgram {
    compile_program(&parse_source(text).unwrap())
}

fn image(text: &str) -> SfiImage {
    sfi_compile(&machine(text), LayoutConfig::default()).unwrap()
}

fn code_words(img: &SfiImage) -> Vec<(i64, FInstr)> {
    img.memory
        .iter()
        .filter(|(a, _)| img.cfg.decode(**a).is_ok_and(|l| l.is_code()))
        .filter_map(|(a, w)| Some((*a, FInstr::decode(*w)?)))
        .collect()
}

#[test]
fn every_store_is_masked() {
    let img = image(FIG6);
    let mut stores = 0;
    for (a, i) in code_words(&img) {
        if let FInstr::Store(rp, _) = i {
            if img.meta.push_sites.contains(&a) || img.meta.mmio_sites.contains(&a) {
                continue;
            }
            stores += 1;
            assert_eq!(rp, R::T1);
            assert!(matches!(
                FInstr::decode(img.word(a - 2)),
                Some(FInstr::And(_, R::SAND, R::T1))
            ));
            assert_eq!(
                FInstr::decode(img.word(a - 1)),
                Some(FInstr::Or(R::T1, R::SOR, R::T1))
            );
            assert_eq!((a - 2) / 16, a / 16, "mask pair straddles a block at {a:#x}");
        }
    }
    assert!(stores > 0);
    assert_eq!(stores, img.meta.store_sites.len());
}

#[test]
fn entries_are_unaligned_and_landing_pads_aligned() {
    let img = image(FIG6);
    assert!(!img.meta.entries.is_empty());
    for a in img.meta.entries.keys() {
        assert_ne!(a % 16, 0);
        assert_eq!(img.word(a - 1), 0, "entry {a:#x} is not preceded by an aligned halt");
    }
    let mut jals = 0;
    for (a, i) in code_words(&img) {
        match i {
            FInstr::Jal(_) => {
                jals += 1;
                assert_eq!((a + 1) % 16, 0);
            }
            FInstr::Jump(r) => {
                assert_eq!(r, R::T1);
                if !img.meta.return_sites.contains(&a) {
                    assert!(matches!(
                        FInstr::decode(img.word(a - 2)),
                        Some(FInstr::And(_, R::JAND, R::T1))
                    ));
                }
            }
            _ => {}
        }
    }
    assert!(jals > 0);
    for a in &img.meta.return_sites {
        assert_eq!((a - 7) % 16, 0, "return sequence at {a:#x} is not aligned");
    }
}

#[test]
fn halting_program_halts_at_once() {
    let img = image("component M { main() { exit } }");
    let r = sfi_run(&img, 1000, &[]);
    assert_eq!(r.outcome, Outcome::Terminated);
    assert!(r.trace.events.is_empty());
    assert!(r.steps < 40);
}

#[test]
fn defined_programs_agree_with_the_machine() {
    for (text, tape) in [(FIG6, vec![]), (ECHO, vec![1, 2, 3]), (REFACTORED, vec![7])] {
        let p = machine(text);
        let (m, out) = mrun(&p, 100_000, &tape);
        let img = sfi_compile(&p, LayoutConfig::default()).unwrap();
        let r = sfi_run(&img, 3_200_000, &tape);
        if out == Outcome::Terminated {
            assert_eq!(r.trace, m);
        } else {
            assert!(prefix_leq(&m.open(), &r.trace), "{m} vs {}", r.trace);
        }
        let rep = sfi_check_invariants(&r.log, &img);
        assert!(rep.all_hold(), "{rep:?}");
    }
}

#[test]
fn echo_trace_shape() {
    let img = image(ECHO);
    let r = sfi_run(&img, 1_000_000, &[1, 2, 3]);
    let writes: Vec<i64> = r
        .trace
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Call { proc, arg, .. } if proc == "write" => Some(*arg),
            _ => None,
        })
        .collect();
    assert_eq!(writes, vec![1, 3, 6]);
}

#[test]
fn small_slots_chain_code_across_slots() {
    let mut body = String::from("main() { ");
    for i in 0..150 {
        body.push_str(&format!("local[0] := local[0] + {i}; "));
    }
    body.push_str("E.write(local[0]) }");
    let text = format!("component M {{ import E.write; {body} }}");
    let p = machine(&text);
    let cfg = LayoutConfig {
        offset_bits: 11,
        component_bits: 3,
    };
    let img = sfi_compile(&p, cfg).unwrap();
    assert!(img.meta.slots[&crate::model::ComponentId(1)].code_slots.len() > 1);
    let r = sfi_run(&img, 1_000_000, &[]);
    assert_eq!(r.trace, mrun(&p, 100_000, &[]).0);
    assert!(sfi_check_invariants(&r.log, &img).all_hold());
}

#[test]
fn capacity_and_layout_errors() {
    let p = machine(ECHO);
    let tiny = LayoutConfig {
        offset_bits: 8,
        component_bits: 4,
    };
    assert!(matches!(sfi_compile(&p, tiny), Err(SfiError::Capacity(_))));
    let narrow = LayoutConfig {
        offset_bits: 12,
        component_bits: 1,
    };
    assert!(matches!(sfi_compile(&p, narrow), Err(SfiError::Capacity(_))));
    let bad = LayoutConfig {
        offset_bits: 3,
        component_bits: 4,
    };
    assert!(matches!(sfi_compile(&p, bad), Err(SfiError::Layout(_))));
}

#[test]
fn allocation_gets_fresh_slots() {
    let text = "component M { import E.write; main() { \
        local[0] := alloc 3; !local[0] := 5; local[0][1] := 6; \
        E.write(local[0][0] + local[0][1]) } }";
    let p = machine(text);
    let img = sfi_compile(&p, LayoutConfig::default()).unwrap();
    let r = sfi_run(&img, 100_000, &[]);
    assert_eq!(r.trace, mrun(&p, 100_000, &[]).0);
    assert_eq!(r.trace.events[0].arg(), 11);
    let big = "component M { main() { alloc 100000 } }";
    let r = sfi_run(&image(big), 100_000, &[]);
    assert_eq!(r.outcome, Outcome::Terminated);
    assert!(r.log.alloc_exhausted);
}

const STRAY_STORE: &str = "component A { import B.f; main() { local[-5] := 9; B.f(0) } }
component B { export f; buffer 2; f(x) { local[1] } }";

#[test]
fn masked_stray_store_stays_home() {
    let img = image(STRAY_STORE);
    let r = sfi_run(&img, 100_000, &[]);
    let rep = sfi_check_invariants(&r.log, &img);
    assert!(rep.all_hold(), "{rep:?}");
}

#[test]
fn dropped_store_mask_is_caught() {
    let img = mutate_instrumentation(&image(STRAY_STORE), Mutation::DropStoreMask).unwrap();
    let r = sfi_run(&img, 100_000, &[]);
    let rep = sfi_check_invariants(&r.log, &img);
    assert!(!rep.writes_confined, "{rep:?}");
}

#[test]
fn store_mask_mutation_touches_every_store_site() {
    let img = image(STRAY_STORE);
    let bad = mutate_instrumentation(&img, Mutation::DropStoreMask).unwrap();
    for &a in &img.meta.store_sites {
        assert_ne!(img.word(a), bad.word(a));
        assert_eq!(bad.word(a - 1), FInstr::Nop.encode().unwrap());
    }
}

#[test]
fn mutation_without_sites_is_refused() {
    // Every compiled procedure stores to its stack, so strip the sites by hand.
    let mut img = image("component A { main() { exit() } }");
    img.meta.store_sites.clear();
    assert_eq!(
        mutate_instrumentation(&img, Mutation::DropStoreMask).unwrap_err(),
        MutationError::NoSite(Mutation::DropStoreMask)
    );
    assert!(mutate_instrumentation(&img, Mutation::SkipShadowPush).is_ok());
}

#[test]
fn skipped_shadow_pop_is_caught() {
    let img = mutate_instrumentation(&image(ECHO), Mutation::SkipShadowPop).unwrap();
    let r = sfi_run(&img, 1_000_000, &[1, 2, 3]);
    let rep = sfi_check_invariants(&r.log, &img);
    assert!(!rep.stack_well_formed, "{rep:?}");
}

#[test]
fn skipped_shadow_push_is_caught() {
    let text = "component A { import B.f; main() { B.f(0) } }
component B { import E.write; export f; f(x) { E.write(4) } }";
    let img = mutate_instrumentation(&image(text), Mutation::SkipShadowPush).unwrap();
    let r = sfi_run(&img, 100_000, &[]);
    let rep = sfi_check_invariants(&r.log, &img);
    assert!(!rep.stack_well_formed, "{rep:?}");
}

#[test]
fn dropped_jump_mask_is_caught() {
    // The buffer is followed by the stack-pointer cell and then the stack,
    // whose first word is the saved return address.
    let text = "component A { buffer 1; main() { A.g(0) } g(x) { local[2] := 77; 0 } }";
    let img = image(text);
    let r = sfi_run(&img, 100_000, &[]);
    assert!(sfi_check_invariants(&r.log, &img).all_hold());
    let bad = mutate_instrumentation(&img, Mutation::DropJumpAlign).unwrap();
    let r = sfi_run(&bad, 100_000, &[]);
    assert!(!sfi_check_invariants(&r.log, &bad).transfers_allowed);
}

#[test]
fn checkers_reject_synthetic_logs() {
    let img = image(STRAY_STORE);
    let cfg = img.cfg;
    let pc = cfg.encode(1, 2, 40).unwrap();
    let mut log = SfiLog::default();
    log.writes.push(WriteRecord {
        pc,
        component: Some(1),
        addr: cfg.encode(2, 1, 3).unwrap(),
        value: 0,
    });
    let rep = sfi_check_invariants(&log, &img);
    assert!(!rep.writes_confined && rep.transfers_allowed);

    let mut log = SfiLog::default();
    log.transfers.push(TransferRecord {
        pc,
        target: cfg.encode(2, 2, 32).unwrap(),
        kind: TransferKind::Jump,
        ssp: img.meta.shadow_base,
    });
    let rep = sfi_check_invariants(&log, &img);
    assert!(rep.writes_confined && !rep.transfers_allowed);
}

#[test]
fn image_codec_round_trip() {
    let img = image(REFACTORED);
    let bytes = save_sfi_image(&img);
    assert_eq!(load_sfi_image(&bytes).unwrap(), img);
    assert!(load_sfi_image(&bytes[..bytes.len() - 3]).is_err());
    assert!(load_sfi_image(b"CMPM\x01\x00").is_err());
}

#[test]
fn log_serializes_as_json_lines() {
    let img = image(ECHO);
    let r = sfi_run(&img, 1_000_000, &[1, 2, 3]);
    let text = r.log.to_json_lines();
    for line in text.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    assert_eq!(text.lines().count(), r.log.writes.len() + r.log.transfers.len() + 1);
}
