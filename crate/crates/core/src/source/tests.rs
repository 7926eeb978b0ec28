use proptest::prelude::*;

use super::*;
use crate::model::{well_formed_prefix, ComponentId, Event, Outcome, ProcedureId, TracePrefix};
use crate::value::BinOp;

const FIG6: &str = include_str!("../../../../programs/fig6.src");
const REFACTORED: &str = include_str!("../../../../programs/refactored.src");

fn fig6_trace() -> Vec<Event> {
    vec![
        Event::call(1, 2, "p", 0),
        Event::ret(2, 1, 1),
        Event::call(1, 2, "p", 2),
        Event::call(2, 1, "mainP", 3),
    ]
}

fn run(text: &str) -> (TracePrefix, Outcome) {
    let p = parse_source(text).unwrap();
    check_source(&p).unwrap();
    run_source(&p, 100_000)
}

#[test]
fn fig6_parses_into_two_components() {
    let p = parse_source(FIG6).unwrap();
    assert_eq!(p.components.len(), 2);
    assert_eq!(p.main, ProcedureId::new(ComponentId(1), "mainP"));
    assert!(check_source(&p).is_ok());
}

#[test]
fn fig6_emits_four_events_then_terminates() {
    let (t, o) = run(FIG6);
    assert_eq!(t.events, fig6_trace());
    assert_eq!(o, Outcome::Terminated);
}

#[test]
fn exit_only_program() {
    let p = parse_source("component M { main() { exit } }").unwrap();
    assert_eq!(p.components[&ComponentId(1)].procedures["main"], Expr::Exit);
    let (t, o) = run_source(&p, 10);
    assert!(t.events.is_empty());
    assert_eq!(o, Outcome::Terminated);
}

#[test]
fn malformed_expression_is_rejected_with_position() {
    let err = parse_source("component M { main() { 1 + } }").unwrap_err();
    assert_eq!(err.line, 1);
    assert_eq!(err.column, 28);
}

#[test]
fn integer_deref_is_undefined() {
    let (t, o) = run("component M { main() { !5 } }");
    assert!(t.events.is_empty());
    assert_eq!(o, Outcome::undef(ComponentId(1)));
}

#[test]
fn calling_unimported_procedure_is_ill_formed() {
    let p = parse_source(
        "component A { main() { B.p(1) } } component B { export p; p(_) { 0 } }",
    )
    .unwrap();
    let errs = check_source(&p).unwrap_err();
    assert!(matches!(errs[0], WellFormednessError::CallNotImported { .. }));
}

#[test]
fn exporting_undefined_procedure_is_ill_formed() {
    let p = parse_source("component A { export q; main() { 0 } }").unwrap();
    let errs = check_source(&p).unwrap_err();
    assert_eq!(
        errs,
        vec![WellFormednessError::ExportNotImplemented(ComponentId(1), "q".into())]
    );
}

#[test]
fn refactored_example_runs_with_tape() {
    let (t, o) = run(REFACTORED);
    assert_eq!(o, Outcome::Terminated);
    let p = parse_source(REFACTORED).unwrap();
    assert!(well_formed_prefix(&t, &p.interface()));
    // x = 7, parse -> 8, process -> 16, write 16*1000+7
    assert_eq!(t.events.last(), Some(&Event::ret(0, 1, 0)));
    assert!(t.events.contains(&Event::call(1, 0, "write", 16_007)));
}

#[test]
fn negative_request_blames_parser() {
    let mut p = parse_source(REFACTORED).unwrap();
    p.env_tape = vec![-4];
    let (t, o) = run_source(&p, 100_000);
    assert_eq!(o, Outcome::undef(ComponentId(2)));
    assert_eq!(t.events.last(), Some(&Event::call(1, 2, "parse", -4)));
}

#[test]
fn link_three_components() {
    let c0 = parse_unit(
        "extern C1 @ 2; extern C2 @ 3;
         component C0 @ 1 { import C1.parse, C2.init; main() { C2.init(0); C1.parse(1) } }",
    )
    .unwrap();
    let rest = parse_unit(
        "component C1 @ 2 { export parse; parse(x) { x } }
         component C2 @ 3 { export init; init(_) { 0 } }",
    )
    .unwrap();
    let main = ProcedureId::new(ComponentId(1), "main");
    let p = link_source([c0.components.clone(), rest.components.clone()], main.clone()).unwrap();
    assert_eq!(p.components.len(), 3);
    assert!(check_source(&p).is_ok());
    assert_eq!(
        link_source([c0.components.clone(), c0.components], main.clone()),
        Err(LinkError::DuplicateComponent(ComponentId(1)))
    );
    let lonely = parse_unit(
        "extern C1 @ 2; component C0 @ 1 { import C1.nope; main() { 0 } }",
    )
    .unwrap();
    assert!(matches!(
        link_source([lonely.components, rest.components], main),
        Err(LinkError::UnresolvedImport(..))
    ));
}

#[test]
fn cross_component_pointer_is_undefined_for_sender() {
    let (_, o) = run(
        "component A { import B.p; main() { B.p(local) } }
         component B { export p; p(x) { 0 } }",
    );
    assert_eq!(o, Outcome::undef(ComponentId(1)));
    let (t, o) = run(
        "component A { import B.p; main() { B.p(0) } }
         component B { export p; p(x) { local } }",
    );
    assert_eq!(t.events.len(), 1);
    assert_eq!(o, Outcome::undef(ComponentId(2)));
}

#[test]
fn top_inspection_and_bounds() {
    // alloc'd cells are undefined until written
    let (_, o) = run("component A { main() { if (!alloc 2) { 1 } else { 2 } } }");
    assert_eq!(o, Outcome::undef(ComponentId(1)));
    let (_, o) = run("component A { main() { local[1] } }");
    assert_eq!(o, Outcome::undef(ComponentId(1)));
    let (_, o) = run("component A { buffer 2; main() { local[1] := 4; local[1] } }");
    assert_eq!(o, Outcome::Terminated);
    let (_, o) = run("component A { main() { alloc 0 } }");
    assert_eq!(o, Outcome::undef(ComponentId(1)));
}

#[test]
fn environment_reads_tape_and_defaults_to_zero() {
    let (t, _) = run(
        "component A { import E.read; main() { E.read(); E.read() } }
         input 5;",
    );
    assert_eq!(
        t.events,
        vec![
            Event::call(1, 0, "read", 0),
            Event::ret(0, 1, 5),
            Event::call(1, 0, "read", 0),
            Event::ret(0, 1, 0),
        ]
    );
}

#[test]
fn fuel_exhaustion() {
    let p = parse_source("component A { main() { A.main(0) } }").unwrap();
    let (t, o) = run_source(&p, 1000);
    assert_eq!(o, Outcome::OutOfFuel);
    assert!(t.terminator.is_none());
}

#[test]
fn printer_round_trips_examples() {
    for text in [FIG6, REFACTORED, include_str!("../../../../programs/echo.src")] {
        let p = parse_source(text).unwrap();
        let printed = print_source(&p);
        let q = parse_source(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(p, q, "{printed}");
    }
}

#[test]
fn literal_extremes() {
    let (_, o) = run("component A { main() { -9223372036854775808 } }");
    assert_eq!(o, Outcome::Terminated);
    assert!(parse_source("component A { main() { 9223372036854775808 } }").is_err());
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        any::<i64>().prop_map(Expr::Int),
        Just(Expr::Local),
        Just(Expr::Arg),
        Just(Expr::Exit),
    ];
    leaf.prop_recursive(5, 48, 3, |inner| {
        prop_oneof![
            (0usize..6, inner.clone(), inner.clone())
                .prop_map(|(o, a, b)| Expr::binop(BinOp::ALL[o], a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::seq(a, b)),
            (inner.clone(), inner.clone(), inner.clone()).prop_map(|(a, b, c)| Expr::if_(a, b, c)),
            inner.clone().prop_map(Expr::alloc),
            inner.clone().prop_map(Expr::deref),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::assign(a, b)),
            (any::<bool>(), inner).prop_map(|(own, a)| if own {
                Expr::call(ComponentId(1), "main", a)
            } else {
                Expr::call(ComponentId(0), "read", a)
            }),
        ]
    })
}

proptest! {
    #[test]
    fn printed_expressions_reparse(e in arb_expr()) {
        let text = format!("component A {{ import E.read; main(x) {{ {} }} }}", "0");
        let mut p = parse_source(&text).unwrap();
        p.components.get_mut(&ComponentId(1)).unwrap().procedures.insert("main".into(), e);
        let printed = print_source(&p);
        let q = parse_source(&printed).map_err(|err| TestCaseError::fail(format!("{err}\n{printed}")))?;
        prop_assert_eq!(p, q);
    }

    #[test]
    fn runs_are_deterministic_and_fuel_monotone(e in arb_expr(), f1 in 0u64..200, extra in 0u64..200) {
        let mut p = parse_source("component A { import E.read; main(x) { 0 } } input 3, 4;").unwrap();
        p.components.get_mut(&ComponentId(1)).unwrap().procedures.insert("main".into(), e);
        let a = run_source(&p, f1);
        prop_assert_eq!(&a, &run_source(&p, f1));
        let b = run_source(&p, f1 + extra);
        prop_assert!(crate::model::prefix_leq(&a.0.open(), &b.0));
        prop_assert!(well_formed_prefix(&b.0, &p.interface()));
    }
}
