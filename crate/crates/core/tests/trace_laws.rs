use compart_core::model::{strengthen_zp, Terminator};
use compart_core::{
    prec_blame, prefix_leq, project_events, well_formed_prefix, ComponentId, Event, Interface,
    ProcedureId, ProgramInterface, TracePrefix,
};
use compart_core::model::TraceProperty;
use proptest::prelude::*;

fn event() -> impl Strategy<Value = Event> {
    (0u32..4, 0u32..4, -1i64..3, prop::bool::ANY, 0usize..3).prop_map(|(s, d, a, call, p)| {
        if call {
            Event::call(s, d, ["p", "q", "write"][p], a)
        } else {
            Event::ret(s, d, a)
        }
    })
}

fn terminator() -> impl Strategy<Value = Option<Terminator>> {
    prop_oneof![
        Just(None),
        Just(Some(Terminator::End)),
        (0u32..4).prop_map(|c| Some(Terminator::Undef(ComponentId(c)))),
    ]
}

fn prefix() -> impl Strategy<Value = TracePrefix> {
    (prop::collection::vec(event(), 0..=12), terminator())
        .prop_map(|(events, terminator)| TracePrefix { events, terminator })
}

/// A base prefix with three cuts of it.
fn related() -> impl Strategy<Value = (TracePrefix, TracePrefix, TracePrefix)> {
    prefix().prop_flat_map(|base| {
        let n = base.events.len();
        let cut = move |b: TracePrefix| {
            (0..=n, terminator()).prop_map(move |(k, terminator)| TracePrefix {
                events: b.events[..k].to_vec(),
                terminator,
            })
        };
        (cut(base.clone()), cut(base.clone()), cut(base))
    })
}

fn set() -> impl Strategy<Value = Vec<ComponentId>> {
    prop::collection::vec((0u32..4).prop_map(ComponentId), 0..4)
}

fn chain_interface() -> ProgramInterface {
    let c1 = ComponentId(1);
    let c2 = ComponentId(2);
    ProgramInterface::new(
        ProcedureId::new(c1, "main"),
        [
            Interface::new(c1)
                .with_exports(["p"])
                .with_imports([ProcedureId::new(c2, "p"), ProcedureId::new(ComponentId(0), "write")]),
            Interface::new(c2)
                .with_exports(["p"])
                .with_imports([ProcedureId::new(c1, "p")]),
        ],
    )
}

/// A well-formed prefix for [`chain_interface`], steered by `choices`:
/// 0 returns when possible, 1 writes, anything else calls the other component.
fn walk(choices: &[u8]) -> TracePrefix {
    let mut stack: Vec<u32> = Vec::new();
    let mut control = 1;
    let mut events = Vec::new();
    for (i, &c) in choices.iter().enumerate() {
        let arg = i as i64;
        if c == 0 && !stack.is_empty() {
            let caller = stack.pop().unwrap();
            events.push(Event::ret(control, caller, arg));
            control = caller;
        } else if c == 1 && control == 1 {
            events.push(Event::call(1, 0, "write", arg));
            events.push(Event::ret(0, 1, 0));
        } else if control != 0 {
            let other = 3 - control;
            events.push(Event::call(control, other, "p", arg));
            stack.push(control);
            control = other;
        }
    }
    TracePrefix::new(events)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn prefix_order_is_reflexive(m in prefix()) {
        prop_assert!(prefix_leq(&m, &m));
    }

    #[test]
    fn prefix_order_is_antisymmetric_and_transitive((a, b, c) in related()) {
        if prefix_leq(&a, &b) && prefix_leq(&b, &a) {
            prop_assert_eq!(&a, &b);
        }
        if prefix_leq(&a, &b) && prefix_leq(&b, &c) {
            prop_assert!(prefix_leq(&a, &c));
        }
    }

    #[test]
    fn open_cuts_are_below_the_base((a, _, _) in related(), t in terminator()) {
        let base = TracePrefix { events: a.events.clone(), terminator: t };
        prop_assert!(prefix_leq(&a.open(), &base));
    }

    #[test]
    fn blame_distributes_over_union((t, m, _) in related(), s1 in set(), s2 in set()) {
        let both: Vec<ComponentId> = s1.iter().chain(&s2).copied().collect();
        prop_assert_eq!(
            prec_blame(&t, &m, &both),
            prec_blame(&t, &m, &s1) || prec_blame(&t, &m, &s2)
        );
    }

    #[test]
    fn projections_interleave_back_to_the_trace(m in prefix()) {
        let mut parts: Vec<std::collections::VecDeque<Event>> =
            (0..4).map(|c| project_events(&m, ComponentId(c)).into()).collect();
        for e in &m.events {
            let next = parts[e.src().index()].pop_front();
            prop_assert_eq!(next.as_ref(), Some(e));
        }
        prop_assert!(parts.iter().all(|p| p.is_empty()));
    }

    #[test]
    fn well_formedness_is_prefix_closed(choices in prop::collection::vec(0u8..4, 0..16)) {
        let iface = chain_interface();
        let m = walk(&choices);
        prop_assert!(well_formed_prefix(&m, &iface));
        for k in 0..m.events.len() {
            prop_assert!(well_formed_prefix(&m.truncate(k), &iface));
        }
    }

    #[test]
    fn random_prefixes_below_well_formed_ones_are_well_formed(m in prefix()) {
        let iface = chain_interface();
        let open = m.open();
        if well_formed_prefix(&open, &iface) {
            for k in 0..open.events.len() {
                prop_assert!(well_formed_prefix(&open.truncate(k), &iface));
            }
        }
    }

    #[test]
    fn strengthening_only_removes(m in prefix(), blamed in set()) {
        let pi = TraceProperty::new("short", vec![Event::call(1, 0, "write", 0)], |t: &TracePrefix| t.events.len() < 3);
        let s = strengthen_zp(&pi, &blamed);
        prop_assert!(!s.accepts(&m) || pi.accepts(&m));
    }
}
