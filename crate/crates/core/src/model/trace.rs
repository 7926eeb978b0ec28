//! Events, finite trace prefixes and the relations between them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ids::{ComponentId, ProgramInterface, ENV_READ};

/// A cross-component interaction. Calls are produced by the caller, returns by
/// the returning component.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Event {
    Call {
        src: ComponentId,
        dst: ComponentId,
        proc: String,
        arg: i64,
    },
    Return {
        src: ComponentId,
        dst: ComponentId,
        arg: i64,
    },
}

impl Event {
    pub fn call(src: u32, dst: u32, proc: &str, arg: i64) -> Event {
        Event::Call {
            src: ComponentId(src),
            dst: ComponentId(dst),
            proc: proc.to_string(),
            arg,
        }
    }

    pub fn ret(src: u32, dst: u32, arg: i64) -> Event {
        Event::Return {
            src: ComponentId(src),
            dst: ComponentId(dst),
            arg,
        }
    }

    /// The component that produced this event.
    pub fn src(&self) -> ComponentId {
        match self {
            Event::Call { src, .. } | Event::Return { src, .. } => *src,
        }
    }

    pub fn dst(&self) -> ComponentId {
        match self {
            Event::Call { dst, .. } | Event::Return { dst, .. } => *dst,
        }
    }

    pub fn arg(&self) -> i64 {
        match self {
            Event::Call { arg, .. } | Event::Return { arg, .. } => *arg,
        }
    }

    pub fn is_call(&self) -> bool {
        matches!(self, Event::Call { .. })
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Call {
                src,
                dst,
                proc,
                arg,
            } => write!(f, "CALL {src} {dst}.{proc} {arg}"),
            Event::Return { src, dst, arg } => write!(f, "RET {src} {dst} {arg}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "component", rename_all = "lowercase")]
pub enum Terminator {
    /// Undefined behavior, attributed to the component that caused it.
    Undef(ComponentId),
    /// Normal termination.
    End,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TracePrefix {
    pub events: Vec<Event>,
    pub terminator: Option<Terminator>,
}

impl TracePrefix {
    pub fn new(events: Vec<Event>) -> Self {
        TracePrefix {
            events,
            terminator: None,
        }
    }

    pub fn with_terminator(events: Vec<Event>, terminator: Terminator) -> Self {
        TracePrefix {
            events,
            terminator: Some(terminator),
        }
    }

    pub fn undef(events: Vec<Event>, c: ComponentId) -> Self {
        Self::with_terminator(events, Terminator::Undef(c))
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty() && self.terminator.is_none()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    /// The same events with no terminator.
    pub fn open(&self) -> TracePrefix {
        TracePrefix::new(self.events.clone())
    }

    pub fn undef_component(&self) -> Option<ComponentId> {
        match self.terminator {
            Some(Terminator::Undef(c)) => Some(c),
            _ => None,
        }
    }

    /// Events-only prefix of length `n`.
    pub fn truncate(&self, n: usize) -> TracePrefix {
        TracePrefix::new(self.events[..n.min(self.events.len())].to_vec())
    }

    /// Renders the line-oriented text format.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for TracePrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.events {
            writeln!(f, "{e}")?;
        }
        match self.terminator {
            Some(Terminator::Undef(c)) => writeln!(f, "UNDEF {c}"),
            Some(Terminator::End) => writeln!(f, "END"),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace line {line}: {msg}")]
pub struct TraceParseError {
    pub line: usize,
    pub msg: String,
}

impl FromStr for TracePrefix {
    type Err = TraceParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut trace = TracePrefix::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |msg: &str| TraceParseError {
                line,
                msg: msg.to_string(),
            };
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            if trace.terminator.is_some() {
                return Err(err("event after terminator"));
            }
            let words: Vec<&str> = raw.split_whitespace().collect();
            let comp = |s: &str| {
                s.parse::<u32>()
                    .map(ComponentId)
                    .map_err(|_| err("bad component id"))
            };
            let int = |s: &str| s.parse::<i64>().map_err(|_| err("bad integer"));
            match words.as_slice() {
                ["CALL", src, target, arg] => {
                    let (dst, proc) = target
                        .split_once('.')
                        .ok_or_else(|| err("expected <dst>.<proc>"))?;
                    if proc.is_empty() {
                        return Err(err("empty procedure name"));
                    }
                    trace.events.push(Event::Call {
                        src: comp(src)?,
                        dst: comp(dst)?,
                        proc: proc.to_string(),
                        arg: int(arg)?,
                    });
                }
                ["RET", src, dst, arg] => trace.events.push(Event::Return {
                    src: comp(src)?,
                    dst: comp(dst)?,
                    arg: int(arg)?,
                }),
                ["UNDEF", c] => trace.terminator = Some(Terminator::Undef(comp(c)?)),
                ["END"] => trace.terminator = Some(Terminator::End),
                _ => return Err(err("unrecognized line")),
            }
        }
        Ok(trace)
    }
}

/// `m ≤ t`: the events of `m` are a prefix of those of `t`, and if `m` is
/// terminated then `t` ends with the same terminator at the same position.
pub fn prefix_leq(m: &TracePrefix, t: &TracePrefix) -> bool {
    if m.events.len() > t.events.len() || m.events[..] != t.events[..m.events.len()] {
        return false;
    }
    match m.terminator {
        None => true,
        Some(term) => t.terminator == Some(term) && t.events.len() == m.events.len(),
    }
}

/// `t ≺_blamed m`: `t` is some events-prefix of `m` followed by undefined
/// behavior of a blamed component.
pub fn prec_blame(t: &TracePrefix, m: &TracePrefix, blamed: &[ComponentId]) -> bool {
    match t.terminator {
        Some(Terminator::Undef(c)) if blamed.contains(&c) => {
            t.events.len() <= m.events.len() && t.events[..] == m.events[..t.events.len()]
        }
        _ => false,
    }
}

/// Subsequence of the events produced by `c`.
pub fn project_events(m: &TracePrefix, c: ComponentId) -> Vec<Event> {
    m.events.iter().filter(|e| e.src() == c).cloned().collect()
}

/// Why a prefix is not one a program with the given interface could emit.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrefixError {
    #[error("event {0}: produced by {1} but {2} has control")]
    NotInControl(usize, ComponentId, ComponentId),
    #[error("event {0}: source equals destination")]
    SelfEvent(usize),
    #[error("event {0}: call not permitted by the interfaces")]
    InterfaceViolation(usize),
    #[error("event {0}: return without a matching call")]
    UnmatchedReturn(usize),
    #[error("undefined behavior attributed to {0}, which does not have control")]
    BadUndef(ComponentId),
}

/// Checks well-bracketing, interface conformance and control flow. On success
/// returns the stack of unmatched calls as (caller, callee) pairs.
pub fn check_prefix(
    m: &TracePrefix,
    iface: &ProgramInterface,
) -> Result<Vec<(ComponentId, ComponentId)>, PrefixError> {
    let mut control = iface.main.component;
    let mut stack: Vec<(ComponentId, ComponentId)> = Vec::new();
    for (i, e) in m.events.iter().enumerate() {
        if e.src() != control {
            return Err(PrefixError::NotInControl(i, e.src(), control));
        }
        if e.src() == e.dst() {
            return Err(PrefixError::SelfEvent(i));
        }
        match e {
            Event::Call { src, dst, proc, .. } => {
                if !iface.allows_call(*src, *dst, proc) {
                    return Err(PrefixError::InterfaceViolation(i));
                }
                stack.push((*src, *dst));
                control = *dst;
            }
            Event::Return { src, dst, .. } => match stack.last() {
                Some(&(caller, callee)) if callee == *src && caller == *dst => {
                    stack.pop();
                    control = *dst;
                }
                _ => return Err(PrefixError::UnmatchedReturn(i)),
            },
        }
    }
    if let Some(Terminator::Undef(c)) = m.terminator {
        if c != control || c.is_env() {
            return Err(PrefixError::BadUndef(c));
        }
    }
    Ok(stack)
}

pub fn well_formed_prefix(m: &TracePrefix, iface: &ProgramInterface) -> bool {
    check_prefix(m, iface).is_ok()
}

/// Values the environment returned in answer to `read` calls, in order.
pub fn env_reads(m: &TracePrefix) -> Vec<i64> {
    let mut pending: Vec<bool> = Vec::new();
    let mut out = Vec::new();
    for e in &m.events {
        match e {
            Event::Call { dst, proc, .. } => pending.push(dst.is_env() && proc == ENV_READ),
            Event::Return { src, arg, .. } => {
                if pending.pop() == Some(true) && src.is_env() {
                    out.push(*arg);
                }
            }
        }
    }
    out
}
