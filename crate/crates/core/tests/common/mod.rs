#![allow(dead_code)]

use std::collections::BTreeMap;

use compart_core::machine::{
    DataBlock, Imm, Instr, Label, MachineComponent, MachineProgram, ProcEntries, Reg,
};
use compart_core::model::Terminator;
use compart_core::{ComponentId, Event, Interface, ProcedureId, TracePrefix, Value};
use rand::Rng;

pub const FIG6: &str = include_str!("../../../../programs/fig6.src");
pub const ECHO: &str = include_str!("../../../../programs/echo.src");
pub const REFACTORED: &str = include_str!("../../../../programs/refactored.src");
pub const UNDEF_DEREF: &str = include_str!("../../../../programs/undef_deref.src");

pub fn fig6_trace() -> TracePrefix {
    TracePrefix::new(vec![
        Event::call(1, 2, "p", 0),
        Event::ret(2, 1, 1),
        Event::call(1, 2, "p", 2),
        Event::call(2, 1, "mainP", 3),
    ])
}

/// `B.f` parks its return address in memory and returns through it; `B.g`
/// then jumps to the parked copy.
pub fn double_return() -> MachineProgram {
    let a = ComponentId(1);
    let b = ComponentId(2);
    let mut ca = MachineComponent {
        interface: Interface::new(a)
            .with_imports([ProcedureId::new(b, "f"), ProcedureId::new(b, "g")]),
        ..Default::default()
    };
    ca.code.insert(
        0,
        vec![
            Instr::Call(b, "f".into()),
            Instr::Call(b, "g".into()),
            Instr::Halt,
        ],
    );
    ca.entries.insert(
        "main".into(),
        ProcEntries {
            internal: Label::new(0, 0),
            external: None,
            start: None,
        },
    );
    let mut cb = MachineComponent {
        interface: Interface::new(b).with_exports(["f", "g"]),
        ..Default::default()
    };
    cb.data.insert(0, DataBlock::filled(1, Value::Int(0)));
    let cell = Imm::Data {
        block: 0,
        offset: 0,
    };
    cb.code.insert(
        1,
        vec![
            Instr::Const(cell, Reg::Aux1),
            Instr::Store(Reg::Aux1, Reg::Ra),
            Instr::Load(Reg::Aux1, Reg::Ra),
            Instr::Return,
        ],
    );
    cb.code.insert(
        2,
        vec![
            Instr::Const(cell, Reg::Aux1),
            Instr::Load(Reg::Aux1, Reg::Aux2),
            Instr::Jump(Reg::Aux2),
        ],
    );
    for (name, block) in [("f", 1), ("g", 2)] {
        cb.entries.insert(
            name.into(),
            ProcEntries {
                internal: Label::new(block, 0),
                external: Some(Label::new(block, 0)),
                start: None,
            },
        );
    }
    MachineProgram {
        components: BTreeMap::from([(a, ca), (b, cb)]),
        main: ProcedureId::new(a, "main"),
    }
}

/// Events over components 0..=3 with small arguments, so that independently
/// drawn prefixes often share events.
pub fn random_event<R: Rng>(rng: &mut R) -> Event {
    let src = rng.gen_range(0..4);
    let dst = rng.gen_range(0..4);
    let arg = rng.gen_range(-1..3);
    if rng.gen_bool(0.6) {
        let proc = ["p", "q", "read", "write"][rng.gen_range(0..4)];
        Event::call(src, dst, proc, arg)
    } else {
        Event::ret(src, dst, arg)
    }
}

pub fn random_terminator<R: Rng>(rng: &mut R) -> Option<Terminator> {
    match rng.gen_range(0..4) {
        0 => Some(Terminator::End),
        1 => Some(Terminator::Undef(ComponentId(rng.gen_range(0..4)))),
        _ => None,
    }
}

pub fn random_prefix<R: Rng>(rng: &mut R, max_len: usize) -> TracePrefix {
    let n = rng.gen_range(0..=max_len);
    TracePrefix {
        events: (0..n).map(|_| random_event(rng)).collect(),
        terminator: random_terminator(rng),
    }
}

/// A prefix of `base`'s events, cut at a random point, with a random
/// terminator.
pub fn cut<R: Rng>(rng: &mut R, base: &TracePrefix) -> TracePrefix {
    let n = rng.gen_range(0..=base.events.len());
    TracePrefix {
        events: base.events[..n].to_vec(),
        terminator: random_terminator(rng),
    }
}
