//! Finite-prefix trace properties and the two closure operators relating a
//! safety property to the class of properties closed under undefined-behavior
//! extension.

use std::fmt;
use std::sync::Arc;

use super::ids::ComponentId;
use super::trace::{prec_blame, prefix_leq, Event, Terminator, TracePrefix};

type Predicate = dyn Fn(&TracePrefix) -> bool + Send + Sync;

/// A decision procedure over trace prefixes.
///
/// The probe alphabet is the finite set of events used when a definition
/// quantifies over all extensions of a prefix; it should contain every event
/// the predicate distinguishes.
#[derive(Clone)]
pub struct TraceProperty {
    name: String,
    pred: Arc<Predicate>,
    probes: Vec<Event>,
}

impl fmt::Debug for TraceProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TraceProperty")
            .field("name", &self.name)
            .field("probes", &self.probes.len())
            .finish()
    }
}

/// How many events deep extensions are enumerated.
pub const EXTENSION_DEPTH: usize = 2;

impl TraceProperty {
    pub fn new<F>(name: impl Into<String>, probes: Vec<Event>, pred: F) -> Self
    where
        F: Fn(&TracePrefix) -> bool + Send + Sync + 'static,
    {
        TraceProperty {
            name: name.into(),
            pred: Arc::new(pred),
            probes,
        }
    }

    pub fn always(value: bool) -> Self {
        let name = if value { "true" } else { "false" };
        Self::new(name, Vec::new(), move |_| value)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn probes(&self) -> &[Event] {
        &self.probes
    }

    pub fn accepts(&self, m: &TracePrefix) -> bool {
        (self.pred)(m)
    }

    /// Every extension of `base` by at most [`EXTENSION_DEPTH`] probe events,
    /// unterminated or ending normally.
    fn extensions(&self, base: &[Event]) -> Vec<TracePrefix> {
        let mut out = Vec::new();
        let mut frontier = vec![base.to_vec()];
        for depth in 0..=EXTENSION_DEPTH {
            let mut next = Vec::new();
            for events in frontier {
                out.push(TracePrefix::new(events.clone()));
                out.push(TracePrefix::with_terminator(events.clone(), Terminator::End));
                if depth < EXTENSION_DEPTH {
                    for p in &self.probes {
                        let mut e = events.clone();
                        e.push(p.clone());
                        next.push(e);
                    }
                }
            }
            frontier = next;
        }
        out
    }
}

/// The strongest property below `pi` that is closed under extension of
/// traces ending in undefined behavior of `blamed`: a prefix `m·Undef(C)`
/// with `C` blamed is kept only if `pi` accepts every extension of `m`.
pub fn strengthen_zp(pi: &TraceProperty, blamed: &[ComponentId]) -> TraceProperty {
    let base = pi.clone();
    let blamed = blamed.to_vec();
    TraceProperty::new(
        format!("{}^Z+", pi.name),
        pi.probes.clone(),
        move |m: &TracePrefix| {
            if !base.accepts(m) {
                return false;
            }
            match m.terminator {
                Some(Terminator::Undef(c)) if blamed.contains(&c) => base
                    .extensions(&m.events)
                    .iter()
                    .all(|ext| base.accepts(ext)),
                _ => true,
            }
        },
    )
}

/// What survives of `pi` across a compiler that may implement undefined
/// behavior of `blamed` arbitrarily: `m` is accepted when `pi` accepts it,
/// or when some witness `t` accepted by `pi` satisfies `t ≺ m` or `m ≤ t`.
///
/// The existential ranges over the caller-supplied witnesses.
pub fn weaken_zp(
    pi: &TraceProperty,
    blamed: &[ComponentId],
    witnesses: Vec<TracePrefix>,
) -> TraceProperty {
    let base = pi.clone();
    let blamed = blamed.to_vec();
    let accepted: Vec<TracePrefix> = witnesses.into_iter().filter(|t| pi.accepts(t)).collect();
    TraceProperty::new(
        format!("{}^Z-", pi.name),
        pi.probes.clone(),
        move |m: &TracePrefix| {
            base.accepts(m)
                || accepted
                    .iter()
                    .any(|t| prec_blame(t, m, &blamed) || prefix_leq(m, t))
        },
    )
}

/// Every `E.write(x)` must be preceded by an `E.read` returning `x` to
/// `reader`.
pub fn reads_before_writes(reader: ComponentId, probes: Vec<Event>) -> TraceProperty {
    TraceProperty::new("reads-before-writes", probes, move |m: &TracePrefix| {
        let mut seen = Vec::new();
        let mut pending_read = Vec::new();
        for e in &m.events {
            match e {
                Event::Call { src, dst, proc, arg } if dst.is_env() => {
                    if proc == super::ids::ENV_WRITE && !seen.contains(arg) {
                        return false;
                    }
                    pending_read.push(proc == super::ids::ENV_READ && *src == reader);
                }
                Event::Call { .. } => pending_read.push(false),
                Event::Return { arg, .. } => {
                    if pending_read.pop() == Some(true) {
                        seen.push(*arg);
                    }
                }
            }
        }
        true
    })
}
