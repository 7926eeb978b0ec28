use std::collections::BTreeMap;

use super::*;
use crate::compiler::compile_program;
use crate::model::{ComponentId, Event, Interface, Outcome, ProcedureId};
use crate::source::parse_source;
use crate::value::{Pointer, Value};

const FIG6: &str = include_str!("../../../../programs/fig6.src");

fn component(id: u32, exports: &[&str], imports: &[(u32, &str)], code: Vec<Instr>) -> MachineComponent {
    let iface = Interface::new(ComponentId(id))
        .with_exports(exports.iter().copied())
        .with_imports(imports.iter().map(|(c, p)| ProcedureId::new(ComponentId(*c), *p)));
    let mut entries = BTreeMap::new();
    for name in exports.iter().chain(["main"].iter()) {
        entries.insert(
            name.to_string(),
            ProcEntries {
                internal: Label::new(1, 0),
                external: exports.contains(name).then_some(Label::new(1, 0)),
                start: None,
            },
        );
    }
    let mut data = BTreeMap::new();
    data.insert(0, DataBlock::filled(4, Value::Int(0)));
    MachineComponent {
        interface: iface,
        code: [(1, code)].into_iter().collect(),
        data,
        entries,
    }
}

fn program(parts: Vec<MachineComponent>) -> MachineProgram {
    MachineProgram {
        main: ProcedureId::new(ComponentId(1), "main"),
        components: parts.into_iter().map(|c| (c.id(), c)).collect(),
    }
}

fn caller_callee(callee_code: Vec<Instr>) -> MachineProgram {
    program(vec![
        component(
            1,
            &[],
            &[(2, "p")],
            vec![
                Instr::Const(Imm::Int(0), Reg::Com),
                Instr::Call(ComponentId(2), "p".into()),
                Instr::Halt,
            ],
        ),
        component(2, &["p"], &[], callee_code),
    ])
}

#[test]
fn call_rule_pushes_sigma_and_invalidates() {
    let p = caller_callee(vec![Instr::Return]);
    let mut s = MachineState::initial(&p);
    s.regs[Reg::Aux1.index()] = Value::Int(9);
    assert_eq!(mstep(&p, &mut s, &[]), Step::Silent);
    let step = mstep(&p, &mut s, &[]);
    assert_eq!(step, Step::Events(vec![Event::call(1, 2, "p", 0)]));
    assert_eq!(s.sigma, vec![Pointer::new(ComponentId(1), 1, 2)]);
    assert_eq!(s.reg(Reg::Aux1), Value::Top);
    assert_eq!(s.reg(Reg::Com), Value::Int(0));
    assert_eq!(s.reg(Reg::Ra), Value::Ptr(Pointer::new(ComponentId(1), 1, 2)));
    assert_eq!(s.cur, ComponentId(2));
}

#[test]
fn return_rule_pops_sigma() {
    let p = caller_callee(vec![Instr::Const(Imm::Int(5), Reg::Com), Instr::Return]);
    let (t, o) = mrun(&p, 100, &[]);
    assert_eq!(t.events, vec![Event::call(1, 2, "p", 0), Event::ret(2, 1, 5)]);
    assert_eq!(o, Outcome::Terminated);
}

#[test]
fn forged_return_address_is_stuck() {
    let p = caller_callee(vec![Instr::Const(Imm::Int(5), Reg::Ra), Instr::Return]);
    let (t, o) = mrun(&p, 100, &[]);
    assert_eq!(t.events.len(), 1);
    assert_eq!(o, Outcome::undef(ComponentId(2)));
}

#[test]
fn halt_only_program() {
    let p = program(vec![component(1, &[], &[], vec![Instr::Halt])]);
    let (t, o) = mrun(&p, 10, &[]);
    assert!(t.events.is_empty());
    assert_eq!(o, Outcome::Terminated);
}

#[test]
fn store_through_integer_is_stuck() {
    let p = program(vec![component(
        1,
        &[],
        &[],
        vec![Instr::Const(Imm::Int(3), Reg::Aux1), Instr::Store(Reg::Aux1, Reg::One)],
    )]);
    assert_eq!(mrun(&p, 10, &[]).1, Outcome::undef(ComponentId(1)));
}

#[test]
fn cross_component_store_and_self_call_are_stuck() {
    let mut callee = vec![
        Instr::Const(Imm::Data { block: 0, offset: 0 }, Reg::Aux1),
        Instr::Store(Reg::Aux1, Reg::One),
        Instr::Return,
    ];
    // R_AUX1 still points into component 2; switch ownership by hand
    let p = caller_callee(callee.clone());
    let mut s = MachineState::initial(&p);
    for _ in 0..3 {
        mstep(&p, &mut s, &[]);
    }
    s.regs[Reg::Aux1.index()] = Value::Ptr(Pointer::new(ComponentId(1), 0, 0));
    assert_eq!(mstep(&p, &mut s, &[]), Step::Stuck(ComponentId(2)));

    callee.insert(0, Instr::Call(ComponentId(2), "p".into()));
    let p = caller_callee(callee);
    assert_eq!(mrun(&p, 100, &[]).1, Outcome::undef(ComponentId(2)));
}

#[test]
fn codec_round_trip_and_errors() {
    let p = compile_program(&parse_source(FIG6).unwrap());
    let bytes = save_machine_program(&p);
    assert_eq!(load_machine_program(&bytes).unwrap(), p);
    assert!(load_machine_program(&bytes[..bytes.len() - 3]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(
        load_machine_program(&bad),
        Err(crate::codec::FormatError::BadMagic { .. })
    ));
    let mut v2 = bytes;
    v2[4] = 9;
    assert!(matches!(
        load_machine_program(&v2),
        Err(crate::codec::FormatError::BadVersion(9))
    ));
}

#[test]
fn compiled_fig6_reproduces_source_trace() {
    let src = parse_source(FIG6).unwrap();
    let p = compile_program(&src);
    let (t, o) = mrun(&p, 100_000, &[]);
    assert_eq!((t, o), crate::source::run_source(&src, 100_000));
    assert!(p.disassemble().contains("Call 2.p"));
}

#[test]
fn sigma_mirrors_open_calls_and_registers_reset() {
    let src = parse_source(include_str!("../../../../programs/refactored.src")).unwrap();
    let p = compile_program(&src);
    let mut open: Vec<Pointer> = Vec::new();
    let mut last_sigma_len = 0;
    mrun_observed(&p, 100_000, &src.env_tape, |s, step| {
        if let Step::Events(es) = step {
            for e in es {
                if e.src().is_env() || e.dst().is_env() {
                    continue;
                }
                match e {
                    Event::Call { .. } => open.push(s.sigma[s.sigma.len() - 1]),
                    Event::Return { .. } => {
                        open.pop();
                    }
                }
            }
            for r in Reg::ALL {
                if r != Reg::Com && r != Reg::Ra {
                    assert_eq!(s.reg(r), Value::Top, "{r} after {es:?}");
                }
            }
            assert!(s.reg(Reg::Com).as_int().is_some());
        }
        assert_eq!(s.sigma, open);
        last_sigma_len = s.sigma.len();
    });
    assert_eq!(last_sigma_len, 0);
}
