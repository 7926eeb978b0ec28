mod common;

use compart_core::compiler::compile_program;
use compart_core::machine::{load_machine_program, mrun, save_machine_program};
use compart_core::mp::{load_mp_image, mp_compile, mp_run, save_mp_image};
use compart_core::sfi::{load_sfi_image, sfi_compile, sfi_run, save_sfi_image, LayoutConfig};
use compart_core::source::print_source;
use compart_core::{parse_source, run_source, ComponentId, Outcome, TracePrefix};

use common::*;

const ECHO_TRACE: &str = "\
CALL 1 0.read 0
RET 0 1 1
CALL 1 2.add 1
RET 2 1 1
CALL 1 0.write 1
RET 0 1 0
CALL 1 0.read 0
RET 0 1 2
CALL 1 2.add 2
RET 2 1 3
CALL 1 0.write 3
RET 0 1 0
CALL 1 0.read 0
RET 0 1 3
CALL 1 2.add 3
RET 2 1 6
CALL 1 0.write 6
RET 0 1 0
END
";

const REFACTORED_TRACE: &str = "\
CALL 1 3.init 0
RET 3 1 1
CALL 1 0.read 0
RET 0 1 7
CALL 1 2.parse 7
RET 2 1 8
CALL 1 3.process 8
RET 3 1 16
CALL 1 0.write 16007
RET 0 1 0
END
";

fn expected() -> Vec<(&'static str, &'static str, String)> {
    vec![
        ("echo", ECHO, ECHO_TRACE.to_string()),
        ("refactored", REFACTORED, REFACTORED_TRACE.to_string()),
        ("fig6", FIG6, format!("{}END\n", fig6_trace())),
        ("undef_deref", UNDEF_DEREF, "UNDEF 1\n".to_string()),
    ]
}

#[test]
fn every_level_reproduces_the_corpus_traces() {
    for (name, text, want) in expected() {
        let p = parse_source(text).unwrap();
        let tape = &p.env_tape;
        let (s, _) = run_source(&p, 100_000);
        assert_eq!(s.to_text(), want, "{name} source");
        let m = compile_program(&p);
        let (t, _) = mrun(&m, 100_000, tape);
        assert_eq!(t.to_text(), want, "{name} machine");
        if want.ends_with("END\n") {
            let sfi = sfi_run(&sfi_compile(&m, LayoutConfig::default()).unwrap(), 3_000_000, tape);
            assert_eq!(sfi.trace.to_text(), want, "{name} sfi");
            let mp = mp_run(&mp_compile(&m), 800_000, tape);
            assert_eq!(mp.trace.to_text(), want, "{name} mp");
        }
    }
}

#[test]
fn undefined_behavior_stops_the_targets_without_extra_events() {
    let p = parse_source(UNDEF_DEREF).unwrap();
    let (_, out) = run_source(&p, 1000);
    assert_eq!(out, Outcome::undef(ComponentId(1)));
    let m = compile_program(&p);
    let sfi = sfi_run(&sfi_compile(&m, LayoutConfig::default()).unwrap(), 100_000, &[]);
    assert!(sfi.trace.events.is_empty());
    let mp = mp_run(&mp_compile(&m), 100_000, &[]);
    assert!(mp.trace.events.is_empty());
}

#[test]
fn binary_formats_round_trip() {
    for (name, text, _) in expected() {
        let m = compile_program(&parse_source(text).unwrap());
        assert_eq!(load_machine_program(&save_machine_program(&m)).unwrap(), m, "{name}");
        let sfi = sfi_compile(&m, LayoutConfig::default()).unwrap();
        assert_eq!(load_sfi_image(&save_sfi_image(&sfi)).unwrap(), sfi, "{name}");
        let mp = mp_compile(&m);
        assert_eq!(load_mp_image(&save_mp_image(&mp)).unwrap(), mp, "{name}");
    }
}

#[test]
fn loaders_reject_each_others_formats() {
    let m = compile_program(&parse_source(FIG6).unwrap());
    let bytes = save_machine_program(&m);
    assert!(load_sfi_image(&bytes).is_err());
    assert!(load_mp_image(&bytes).is_err());
    assert!(load_machine_program(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn printed_corpus_parses_back() {
    for (name, text, _) in expected() {
        let p = parse_source(text).unwrap();
        assert_eq!(parse_source(&print_source(&p)).unwrap(), p, "{name}");
    }
}

#[test]
fn trace_text_round_trips() {
    for (_, _, want) in expected() {
        let t: TracePrefix = want.parse().unwrap();
        assert_eq!(t.to_text(), want);
    }
}
