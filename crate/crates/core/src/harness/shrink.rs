//! Greedy minimization of failing programs.

use std::collections::BTreeSet;

use crate::model::{ComponentId, ProcedureId};
use crate::source::{check_source, Expr, SourceProgram};

/// Upper bound on candidate programs tried.
const BUDGET: usize = 400;

fn children_mut(e: &mut Expr) -> Vec<&mut Expr> {
    match e {
        Expr::Int(_) | Expr::Local | Expr::Arg | Expr::Exit => vec![],
        Expr::Alloc(a) | Expr::Deref(a) | Expr::Call(_, _, a) => vec![a.as_mut()],
        Expr::BinOp(_, a, b) | Expr::Seq(a, b) | Expr::Assign(a, b) => vec![a.as_mut(), b.as_mut()],
        Expr::If(a, b, c) => vec![a.as_mut(), b.as_mut(), c.as_mut()],
    }
}

/// The node at pre-order position `*idx`.
fn node_at<'a>(e: &'a mut Expr, idx: &mut usize) -> Option<&'a mut Expr> {
    if *idx == 0 {
        return Some(e);
    }
    *idx -= 1;
    for ch in children_mut(e) {
        if let Some(n) = node_at(ch, idx) {
            return Some(n);
        }
    }
    None
}

/// Smaller stand-ins for a node: `0` and each child.
fn replacements(e: &Expr) -> Vec<Expr> {
    let mut out = Vec::new();
    if *e != Expr::Int(0) {
        out.push(Expr::Int(0));
    }
    out.extend(e.children().into_iter().cloned());
    out
}

/// Recomputes imports from the calls left in the bodies.
fn refresh_imports(p: &mut SourceProgram) {
    for c in p.components.values_mut() {
        let id = c.id();
        let mut calls = Vec::new();
        for b in c.procedures.values() {
            b.calls(&mut calls);
        }
        c.interface.imports = calls
            .into_iter()
            .filter(|(t, _)| *t != id)
            .map(|(t, n)| ProcedureId::new(t, n))
            .collect::<BTreeSet<_>>();
    }
}

fn drop_calls_to(e: &mut Expr, c: ComponentId) {
    if let Expr::Call(t, _, arg) = e {
        if *t == c {
            let mut a = std::mem::replace(arg.as_mut(), Expr::Int(0));
            drop_calls_to(&mut a, c);
            *e = a;
            return;
        }
    }
    for ch in children_mut(e) {
        drop_calls_to(ch, c);
    }
}

fn candidates(p: &SourceProgram) -> Vec<SourceProgram> {
    let mut out = Vec::new();
    for &c in p.components.keys() {
        if c == p.main.component {
            continue;
        }
        let mut q = p.clone();
        q.components.remove(&c);
        for k in q.components.values_mut() {
            for b in k.procedures.values_mut() {
                drop_calls_to(b, c);
            }
        }
        out.push(q);
    }
    if !p.env_tape.is_empty() {
        let mut q = p.clone();
        q.env_tape.pop();
        out.push(q);
    }
    for (c, comp) in &p.components {
        for (name, body) in &comp.procedures {
            for i in 0..body.size() {
                let mut scratch = body.clone();
                let node = node_at(&mut scratch, &mut i.clone()).cloned();
                for r in node.map(|n| replacements(&n)).unwrap_or_default() {
                    let mut q = p.clone();
                    let b = q
                        .components
                        .get_mut(c)
                        .and_then(|k| k.procedures.get_mut(name))
                        .expect("procedure exists");
                    if let Some(slot) = node_at(b, &mut i.clone()) {
                        *slot = r;
                    }
                    out.push(q);
                }
            }
        }
    }
    for q in &mut out {
        refresh_imports(q);
    }
    out
}

/// Repeatedly takes the first smaller well-formed candidate on which
/// `fails` still holds. The result fails whenever `p` does.
pub fn shrink<F>(p: &SourceProgram, fails: F) -> SourceProgram
where
    F: Fn(&SourceProgram) -> bool,
{
    let mut best = p.clone();
    let mut tried = 0;
    'outer: while tried < BUDGET {
        for q in candidates(&best) {
            if tried >= BUDGET {
                break 'outer;
            }
            if check_source(&q).is_err() {
                continue;
            }
            tried += 1;
            if fails(&q) {
                best = q;
                continue 'outer;
            }
        }
        break;
    }
    best
}
