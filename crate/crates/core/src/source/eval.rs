//! Small-step evaluator with event emission and undefined-behavior detection.

use crate::memory::{Block, Memory};
use crate::model::{ComponentId, Event, Outcome, TracePrefix, ENV_READ};
use crate::value::{eval_binop, BinOp, Pointer, Value};

use super::ast::{Expr, SourceProgram};

enum Frame<'a> {
    BinL(BinOp, &'a Expr),
    BinR(BinOp, Value),
    Seq(&'a Expr),
    If(&'a Expr, &'a Expr),
    Alloc,
    Deref,
    AssignL(&'a Expr),
    AssignR(Pointer),
    CallArg(ComponentId, &'a str),
    /// Procedure activation: where control goes back to.
    Return { component: ComponentId, arg: Value },
}

enum Control<'a> {
    Eval(&'a Expr),
    Ret(Value),
}

/// Result of a bounded source run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceRun {
    pub trace: TracePrefix,
    pub outcome: Outcome,
    pub steps: u64,
}

/// Answers a call into the environment, consuming the tape for reads.
pub fn env_answer(proc: &str, tape: &[i64], cursor: &mut usize) -> i64 {
    if proc == ENV_READ {
        let v = tape.get(*cursor).copied().unwrap_or(0);
        *cursor += 1;
        v
    } else {
        0
    }
}

/// Initial memory: every static buffer zero-filled.
pub fn initial_memory(p: &SourceProgram) -> Memory {
    let mut mem = Memory::new();
    for (id, c) in &p.components {
        for (b, &len) in c.buffers.iter().enumerate() {
            mem.install(*id, b as u32, Block::filled(len, Value::Int(0)));
        }
    }
    mem
}

struct Machine<'a> {
    prog: &'a SourceProgram,
    mem: Memory,
    kont: Vec<Frame<'a>>,
    cur: ComponentId,
    arg: Value,
    events: Vec<Event>,
    tape_pos: usize,
}

enum Step<'a> {
    Continue(Control<'a>),
    Done(Outcome),
}

impl<'a> Machine<'a> {
    fn undef(&self) -> Step<'a> {
        Step::Done(Outcome::undef(self.cur))
    }

    fn eval(&mut self, e: &'a Expr) -> Step<'a> {
        use Control::*;
        Step::Continue(match e {
            Expr::Int(n) => Ret(Value::Int(*n)),
            Expr::Local => Ret(Value::Ptr(Pointer::new(self.cur, 0, 0))),
            Expr::Arg => Ret(self.arg),
            Expr::Exit => return Step::Done(Outcome::Terminated),
            Expr::BinOp(op, a, b) => {
                self.kont.push(Frame::BinL(*op, b));
                Eval(a)
            }
            Expr::Seq(a, b) => {
                self.kont.push(Frame::Seq(b));
                Eval(a)
            }
            Expr::If(c, t, f) => {
                self.kont.push(Frame::If(t, f));
                Eval(c)
            }
            Expr::Alloc(a) => {
                self.kont.push(Frame::Alloc);
                Eval(a)
            }
            Expr::Deref(a) => {
                self.kont.push(Frame::Deref);
                Eval(a)
            }
            Expr::Assign(p, v) => {
                self.kont.push(Frame::AssignL(v));
                Eval(p)
            }
            Expr::Call(c, p, a) => {
                self.kont.push(Frame::CallArg(*c, p));
                Eval(a)
            }
        })
    }

    fn owned_ptr(&self, v: Value) -> Option<Pointer> {
        v.as_ptr().filter(|p| p.component == self.cur)
    }

    fn apply(&mut self, v: Value) -> Step<'a> {
        use Control::*;
        let frame = match self.kont.pop() {
            Some(f) => f,
            None => return Step::Done(Outcome::Terminated),
        };
        Step::Continue(match frame {
            Frame::BinL(op, b) => {
                self.kont.push(Frame::BinR(op, v));
                Eval(b)
            }
            Frame::BinR(op, a) => Ret(eval_binop(op, a, v)),
            Frame::Seq(b) => Eval(b),
            Frame::If(t, f) => match v.as_int() {
                Some(0) => Eval(f),
                Some(_) => Eval(t),
                None => return self.undef(),
            },
            Frame::Alloc => match v.as_int() {
                Some(n) if n > 0 => {
                    let p = self.mem.alloc(self.cur, n, Value::Top);
                    Ret(Value::Ptr(p))
                }
                _ => return self.undef(),
            },
            Frame::Deref => match self.owned_ptr(v).map(|p| self.mem.load(p)) {
                Some(Ok(x)) => Ret(x),
                _ => return self.undef(),
            },
            Frame::AssignL(rhs) => match self.owned_ptr(v) {
                Some(p) => {
                    self.kont.push(Frame::AssignR(p));
                    Eval(rhs)
                }
                None => return self.undef(),
            },
            Frame::AssignR(p) => match self.mem.store(p, v) {
                Ok(()) => Ret(v),
                Err(_) => return self.undef(),
            },
            Frame::CallArg(target, proc) => {
                if target != self.cur {
                    let n = match v.as_int() {
                        Some(n) => n,
                        None => return self.undef(),
                    };
                    self.events.push(Event::Call {
                        src: self.cur,
                        dst: target,
                        proc: proc.to_string(),
                        arg: n,
                    });
                    if target.is_env() {
                        let r = env_answer(proc, &self.prog.env_tape, &mut self.tape_pos);
                        self.events.push(Event::Return {
                            src: target,
                            dst: self.cur,
                            arg: r,
                        });
                        return Step::Continue(Ret(Value::Int(r)));
                    }
                }
                let body = match self.prog.body(target, proc) {
                    Some(b) => b,
                    None => return self.undef(),
                };
                self.kont.push(Frame::Return {
                    component: self.cur,
                    arg: self.arg,
                });
                self.cur = target;
                self.arg = v;
                Eval(body)
            }
            Frame::Return { component, arg } => {
                if component != self.cur {
                    let n = match v.as_int() {
                        Some(n) => n,
                        None => return self.undef(),
                    };
                    self.events.push(Event::Return {
                        src: self.cur,
                        dst: component,
                        arg: n,
                    });
                }
                self.cur = component;
                self.arg = arg;
                Ret(v)
            }
        })
    }
}

/// Runs `p` from its main procedure for at most `fuel` small steps. The
/// returned trace carries the terminator matching the outcome.
pub fn run_source_detailed(p: &SourceProgram, fuel: u64) -> SourceRun {
    let mut m = Machine {
        prog: p,
        mem: initial_memory(p),
        kont: Vec::new(),
        cur: p.main.component,
        arg: Value::Int(0),
        events: Vec::new(),
        tape_pos: 0,
    };
    let mut control = match p.body(p.main.component, &p.main.name) {
        Some(b) => Control::Eval(b),
        None => Control::Ret(Value::Int(0)),
    };
    let mut steps = 0;
    let outcome = loop {
        if steps >= fuel {
            break Outcome::OutOfFuel;
        }
        steps += 1;
        let r = match control {
            Control::Eval(e) => m.eval(e),
            Control::Ret(v) => m.apply(v),
        };
        match r {
            Step::Continue(c) => control = c,
            Step::Done(o) => break o,
        }
    };
    SourceRun {
        trace: TracePrefix {
            events: m.events,
            terminator: outcome.terminator(),
        },
        outcome,
        steps,
    }
}

pub fn run_source(p: &SourceProgram, fuel: u64) -> (TracePrefix, Outcome) {
    let r = run_source_detailed(p, fuel);
    (r.trace, r.outcome)
}
