//! Back-translation of a finite trace prefix into a whole source program
//! that replays it.
//!
//! Every component keeps an event counter in `local[0]`. All its procedures
//! share one dispatcher body: branch `i` bumps the counter and produces the
//! component's `i`-th event of the prefix, and once the events run out the
//! program exits. After an emitted call returns, the dispatcher re-enters
//! itself through a silent internal call.

use std::collections::BTreeMap;

use crate::model::{
    check_prefix, env_reads, project_events, ComponentId, Event, InterfaceError, PrefixError,
    ProgramInterface, Terminator, TracePrefix,
};
use crate::source::{Expr, SourceComponent, SourceProgram};
use crate::value::BinOp;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BackTranslateError {
    #[error("prefix ends in undefined behavior of {0}")]
    Undefined(ComponentId),
    #[error("prefix is not well formed: {0}")]
    IllFormed(#[from] PrefixError),
    #[error("interface is not linkable: {0:?}")]
    Interface(Vec<InterfaceError>),
}

fn dispatcher(id: ComponentId, own: &[Event], reentry: &str) -> Expr {
    let mut body = Expr::Exit;
    for (i, e) in own.iter().enumerate().rev() {
        let replay = match e {
            Event::Call { dst, proc, arg, .. } => Expr::seq_all(vec![
                Expr::bump_local(0),
                Expr::call(*dst, proc.clone(), Expr::Int(*arg)),
                Expr::call(id, reentry, Expr::Int(0)),
            ]),
            Event::Return { arg, .. } => Expr::seq(Expr::bump_local(0), Expr::Int(*arg)),
        };
        let test = Expr::binop(BinOp::Eq, Expr::local_at(0), Expr::Int(i as i64));
        body = Expr::if_(test, replay, body);
    }
    body
}

/// Builds a program with interface `iface` whose run produces `m`. Component
/// names default to `C<id>`.
pub fn back_translate(
    m: &TracePrefix,
    iface: &ProgramInterface,
) -> Result<SourceProgram, BackTranslateError> {
    back_translate_named(m, iface, &BTreeMap::new())
}

pub fn back_translate_named(
    m: &TracePrefix,
    iface: &ProgramInterface,
    names: &BTreeMap<ComponentId, String>,
) -> Result<SourceProgram, BackTranslateError> {
    if let Some(Terminator::Undef(c)) = m.terminator {
        return Err(BackTranslateError::Undefined(c));
    }
    iface.check_compatible().map_err(BackTranslateError::Interface)?;
    check_prefix(m, iface)?;
    let mut components = BTreeMap::new();
    for id in iface.user_components() {
        let i = &iface.components[&id];
        let own = project_events(m, id);
        let mut procs: Vec<String> = i.exports.iter().cloned().collect();
        if iface.main.component == id && !procs.contains(&iface.main.name) {
            procs.push(iface.main.name.clone());
        }
        let procedures = procs
            .iter()
            .map(|p| (p.clone(), dispatcher(id, &own, p)))
            .collect();
        components.insert(
            id,
            SourceComponent {
                name: names.get(&id).cloned().unwrap_or_else(|| format!("C{}", id.0)),
                interface: i.clone(),
                procedures,
                buffers: vec![1],
            },
        );
    }
    Ok(SourceProgram {
        components,
        main: iface.main.clone(),
        env_tape: env_reads(m),
    })
}

/// Back-translates and keeps only the components in `keep`.
pub fn back_translate_components(
    m: &TracePrefix,
    iface: &ProgramInterface,
    keep: &[ComponentId],
) -> Result<Vec<SourceComponent>, BackTranslateError> {
    let p = back_translate(m, iface)?;
    Ok(p.components
        .into_values()
        .filter(|c| keep.contains(&c.id()))
        .collect())
}
