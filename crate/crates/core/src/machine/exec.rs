//! Small-step semantics of the compartmentalized machine.

use crate::memory::{Block, Memory};
use crate::model::{ComponentId, Event, Outcome, ProcedureId, TracePrefix};
use crate::source::env_answer;
use crate::value::{eval_binop, Pointer, Value};

use super::isa::{Imm, Instr, Label, Reg};
use super::program::MachineProgram;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineState {
    pub cur: ComponentId,
    /// Protected stack of return addresses.
    pub sigma: Vec<Pointer>,
    pub mem: Memory,
    pub regs: [Value; Reg::COUNT],
    pub pc: Pointer,
    tape_pos: usize,
}

impl MachineState {
    /// Main's entry, registers undefined except `R_COM = 0` and `R_ONE = 1`.
    pub fn initial(p: &MachineProgram) -> MachineState {
        let mut mem = Memory::new();
        for (id, c) in &p.components {
            mem.reserve(*id, c.block_bound());
            for (b, d) in &c.data {
                let mut block = Block::filled(d.len, d.fill);
                for (i, v) in d.init.iter().enumerate() {
                    block.set(i as i64, *v);
                }
                mem.install(*id, *b, block);
            }
        }
        let start = p.start_label().unwrap_or(Label::new(0, 0));
        let mut regs = [Value::Top; Reg::COUNT];
        regs[Reg::Com.index()] = Value::Int(0);
        regs[Reg::One.index()] = Value::Int(1);
        MachineState {
            cur: p.main.component,
            sigma: Vec::new(),
            mem,
            regs,
            pc: Pointer::new(p.main.component, start.block, start.offset),
            tape_pos: 0,
        }
    }

    pub fn reg(&self, r: Reg) -> Value {
        self.regs[r.index()]
    }

    fn set(&mut self, r: Reg, v: Value) {
        self.regs[r.index()] = v;
    }

    fn invalidate_except_com(&mut self) {
        let com = self.reg(Reg::Com);
        self.regs = [Value::Top; Reg::COUNT];
        self.set(Reg::Com, com);
    }
}

/// What one step did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Silent,
    /// A cross-component transfer; calls into the environment produce the
    /// call and the environment's answer in one step.
    Events(Vec<Event>),
    Halted,
    Stuck(ComponentId),
}

fn next(pc: Pointer) -> Pointer {
    pc.shift(1)
}

/// Executes one instruction.
pub fn mstep(p: &MachineProgram, s: &mut MachineState, tape: &[i64]) -> Step {
    let cur = s.cur;
    let stuck = Step::Stuck(cur);
    let comp = match p.components.get(&cur) {
        Some(c) => c,
        None => return stuck,
    };
    let instr = match comp.instr_at(Label::new(s.pc.block, s.pc.offset)) {
        Some(i) if s.pc.component == cur => i,
        _ => return stuck,
    };
    let own_data = |v: Value| v.as_ptr().filter(|q| q.component == cur);
    match instr {
        Instr::Nop => s.pc = next(s.pc),
        Instr::Halt => return Step::Halted,
        Instr::Const(imm, rd) => {
            let v = match *imm {
                Imm::Int(n) => Value::Int(n),
                Imm::Data { block, offset } => Value::Ptr(Pointer::new(cur, block, offset)),
            };
            s.set(*rd, v);
            s.pc = next(s.pc);
        }
        Instr::Mov(rs, rd) => {
            s.set(*rd, s.reg(*rs));
            s.pc = next(s.pc);
        }
        Instr::BinOp(op, a, b, rd) => {
            s.set(*rd, eval_binop(*op, s.reg(*a), s.reg(*b)));
            s.pc = next(s.pc);
        }
        Instr::Load(rp, rd) => {
            let v = match own_data(s.reg(*rp)).map(|q| s.mem.load(q)) {
                Some(Ok(v)) => v,
                _ => return stuck,
            };
            s.set(*rd, v);
            s.pc = next(s.pc);
        }
        Instr::Store(rp, rs) => {
            let q = match own_data(s.reg(*rp)) {
                Some(q) => q,
                None => return stuck,
            };
            if s.mem.store(q, s.reg(*rs)).is_err() {
                return stuck;
            }
            s.pc = next(s.pc);
        }
        Instr::Jal(l) => {
            s.set(Reg::Ra, Value::Ptr(next(s.pc)));
            s.pc = Pointer::new(cur, l.block, l.offset);
        }
        Instr::Jump(r) => match s.reg(*r).as_ptr() {
            Some(q) if q.component == cur && comp.code.contains_key(&q.block) => s.pc = q,
            _ => return stuck,
        },
        Instr::Bnz(r, l) => match s.reg(*r).as_int() {
            Some(0) => s.pc = next(s.pc),
            Some(_) => s.pc = Pointer::new(cur, l.block, l.offset),
            None => return stuck,
        },
        Instr::Alloc(rd, rs) => match s.reg(*rs).as_int() {
            Some(n) if n > 0 => {
                let q = s.mem.alloc(cur, n, Value::Top);
                s.set(*rd, Value::Ptr(q));
                s.pc = next(s.pc);
            }
            _ => return stuck,
        },
        Instr::Call(target, proc) => {
            let arg = match s.reg(Reg::Com).as_int() {
                Some(n) => n,
                None => return stuck,
            };
            if *target == cur || !comp.interface.imports(&ProcedureId::new(*target, proc.clone())) {
                return stuck;
            }
            let call = Event::Call {
                src: cur,
                dst: *target,
                proc: proc.clone(),
                arg,
            };
            if target.is_env() {
                let r = env_answer(proc, tape, &mut s.tape_pos);
                s.set(Reg::Com, Value::Int(r));
                s.invalidate_except_com();
                s.pc = next(s.pc);
                return Step::Events(vec![
                    call,
                    Event::Return {
                        src: *target,
                        dst: cur,
                        arg: r,
                    },
                ]);
            }
            let entry = match p.components.get(target).and_then(|c| c.external_entry(proc)) {
                Some(l) => l,
                None => return stuck,
            };
            let ret = next(s.pc);
            s.sigma.push(ret);
            s.invalidate_except_com();
            s.set(Reg::Ra, Value::Ptr(ret));
            s.cur = *target;
            s.pc = Pointer::new(*target, entry.block, entry.offset);
            return Step::Events(vec![call]);
        }
        Instr::Return => {
            let top = match s.sigma.last() {
                Some(t) => *t,
                None => return stuck,
            };
            let arg = match s.reg(Reg::Com).as_int() {
                Some(n) => n,
                None => return stuck,
            };
            if s.reg(Reg::Ra) != Value::Ptr(top) || top.component == cur {
                return stuck;
            }
            s.sigma.pop();
            s.invalidate_except_com();
            s.cur = top.component;
            s.pc = top;
            return Step::Events(vec![Event::Return {
                src: cur,
                dst: top.component,
                arg,
            }]);
        }
    }
    Step::Silent
}

/// A bounded run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineRun {
    pub trace: TracePrefix,
    pub outcome: Outcome,
    pub steps: u64,
}

/// Runs `p` from its initial state, calling `observe` after every step.
pub fn mrun_observed<F>(p: &MachineProgram, fuel: u64, tape: &[i64], mut observe: F) -> MachineRun
where
    F: FnMut(&MachineState, &Step),
{
    let mut s = MachineState::initial(p);
    let mut events = Vec::new();
    let mut steps = 0;
    let outcome = loop {
        if steps >= fuel {
            break Outcome::OutOfFuel;
        }
        steps += 1;
        let step = mstep(p, &mut s, tape);
        observe(&s, &step);
        match step {
            Step::Silent => {}
            Step::Events(es) => events.extend(es),
            Step::Halted => break Outcome::Terminated,
            Step::Stuck(c) => break Outcome::undef(c),
        }
    };
    MachineRun {
        trace: TracePrefix {
            events,
            terminator: outcome.terminator(),
        },
        outcome,
        steps,
    }
}

pub fn mrun(p: &MachineProgram, fuel: u64, tape: &[i64]) -> (TracePrefix, Outcome) {
    let r = mrun_observed(p, fuel, tape, |_, _| {});
    (r.trace, r.outcome)
}
