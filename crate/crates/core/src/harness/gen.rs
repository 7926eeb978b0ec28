//! Seeded random generation of well-formed multi-component programs.
//!
//! Every component owns one buffer: cell 0 is a budget for calls that go
//! against the call order, cell 1 holds pointers from allocation patterns and
//! the rest is plain integer data. Calls normally go to later components (or
//! later procedures of the same component), which keeps every run finite;
//! calls against that order are guarded by the budget.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compiler::compile_program;
use crate::machine::MachineProgram;
use crate::model::{ComponentId, Interface, ProcedureId, ENV_READ, ENV_WRITE};
use crate::source::{Expr, SourceComponent, SourceProgram};
use crate::value::BinOp;

const BUDGET: i64 = 0;
const SCRATCH: i64 = 1;
const DATA: i64 = 2;
/// Calls per body, not counting calls into the environment.
const MAX_CALLS: usize = 2;
/// Distance between the data of neighboring components in the default SFI
/// layout; stray stores at these offsets land in another component's buffer.
const SLOT_STRIDE: i64 = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub components: (usize, usize),
    pub procedures: (usize, usize),
    pub body_depth: (usize, usize),
    /// Chance that a procedure body contains a site of undefined behavior.
    pub undef_probability: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            components: (2, 4),
            procedures: (1, 3),
            body_depth: (1, 4),
            undef_probability: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GenConfigError {
    #[error("range `{0}` is empty or starts at zero")]
    Range(&'static str),
    #[error("undef probability must lie in [0, 1]")]
    Probability,
}

impl GenConfig {
    pub fn with_seed(&self, seed: u64) -> GenConfig {
        GenConfig { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), GenConfigError> {
        let ranges = [
            ("components", self.components),
            ("procedures", self.procedures),
        ];
        for (name, (lo, hi)) in ranges {
            if lo == 0 || lo > hi {
                return Err(GenConfigError::Range(name));
            }
        }
        if self.body_depth.0 > self.body_depth.1 {
            return Err(GenConfigError::Range("body_depth"));
        }
        if !(0.0..=1.0).contains(&self.undef_probability) {
            return Err(GenConfigError::Probability);
        }
        Ok(())
    }
}

fn range(r: (usize, usize)) -> RangeInclusive<usize> {
    r.0..=r.1.max(r.0)
}

fn cell(i: i64) -> Expr {
    Expr::binop(BinOp::Add, Expr::Local, Expr::Int(i))
}

fn proc_name(i: usize) -> String {
    format!("p{i}")
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    cfg: &'a GenConfig,
    /// Procedure count per component, indexed from 1.
    procs: Vec<usize>,
    /// Buffer length per component, indexed from 1.
    lens: Vec<i64>,
    cur: usize,
    /// Index of the procedure being generated; `None` for `main`.
    cur_proc: Option<usize>,
    calls_left: usize,
}

impl Gen<'_> {
    fn n(&self) -> usize {
        self.procs.len() - 1
    }

    fn data_cell(&mut self) -> i64 {
        let len = self.lens[self.cur];
        self.rng.gen_range(DATA..len)
    }

    fn small(&mut self) -> i64 {
        self.rng.gen_range(-3..=12)
    }

    /// Procedures this body may call without a guard.
    fn forward_targets(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for c in self.cur..=self.n() {
            for p in 0..self.procs[c] {
                let later = match (c == self.cur, self.cur_proc) {
                    (false, _) | (true, None) => true,
                    (true, Some(q)) => p > q,
                };
                if later {
                    out.push((c, p));
                }
            }
        }
        out
    }

    fn backward_targets(&self) -> Vec<(usize, usize)> {
        let fwd = self.forward_targets();
        let mut out = Vec::new();
        for c in 1..=self.n() {
            for p in 0..self.procs[c] {
                if !fwd.contains(&(c, p)) {
                    out.push((c, p));
                }
            }
        }
        out
    }

    fn call_to(&self, (c, p): (usize, usize), arg: Expr) -> Expr {
        Expr::call(ComponentId(c as u32), proc_name(p), arg)
    }

    fn leaf(&mut self) -> Expr {
        match self.rng.gen_range(0..10) {
            0..=2 => Expr::Int(self.small()),
            3 | 4 => Expr::Arg,
            5..=7 => {
                let k = self.data_cell();
                Expr::local_at(k)
            }
            8 => Expr::call(ComponentId::ENV, ENV_READ, Expr::Int(0)),
            _ => {
                if self.rng.gen_bool(0.05) {
                    Expr::Exit
                } else {
                    Expr::Int(self.small())
                }
            }
        }
    }

    fn call(&mut self, d: usize) -> Option<Expr> {
        if self.calls_left == 0 {
            return None;
        }
        let fwd = self.forward_targets();
        let back = self.backward_targets();
        let guarded = fwd.is_empty() || (!back.is_empty() && self.rng.gen_bool(0.25));
        let &t = if guarded { &back } else { &fwd }.choose(&mut self.rng)?;
        self.calls_left -= 1;
        let arg = self.expr(d);
        if guarded {
            let fallback = self.expr(d);
            let test = Expr::binop(BinOp::Lt, Expr::local_at(BUDGET), Expr::Int(2));
            let call = Expr::seq(Expr::bump_local(BUDGET), self.call_to(t, arg));
            return Some(Expr::if_(test, call, fallback));
        }
        Some(self.call_to(t, arg))
    }

    /// `alloc(n)[i] := e`, or the pointer parked in the scratch cell and
    /// read back.
    fn alloc(&mut self, d: usize) -> Expr {
        let n = self.rng.gen_range(1..=3);
        let i = self.rng.gen_range(0..n);
        let v = self.expr(d);
        if self.rng.gen_bool(0.5) {
            let p = Expr::binop(BinOp::Add, Expr::alloc(Expr::Int(n)), Expr::Int(i));
            return Expr::assign(p, v);
        }
        let parked = || Expr::binop(BinOp::Add, Expr::deref(cell(SCRATCH)), Expr::Int(i));
        Expr::seq_all(vec![
            Expr::assign(cell(SCRATCH), Expr::alloc(Expr::Int(n))),
            Expr::assign(parked(), v),
            Expr::deref(parked()),
        ])
    }

    fn expr(&mut self, d: usize) -> Expr {
        if d == 0 {
            return self.leaf();
        }
        let d1 = d - 1;
        match self.rng.gen_range(0..20) {
            0..=3 => {
                let op = *BinOp::ALL.choose(&mut self.rng).unwrap();
                Expr::binop(op, self.expr(d1), self.expr(d1))
            }
            4..=6 => Expr::seq(self.expr(d1), self.expr(d1)),
            7..=9 => Expr::if_(self.expr(d1), self.expr(d1), self.expr(d1)),
            10..=12 => {
                let k = self.data_cell();
                Expr::assign(cell(k), self.expr(d1))
            }
            13..=15 => self.call(d1).unwrap_or_else(|| self.leaf()),
            16 | 17 => Expr::call(ComponentId::ENV, ENV_WRITE, self.expr(d1)),
            18 => self.alloc(d1),
            _ => self.leaf(),
        }
    }

    /// An expression whose evaluation is undefined in the source.
    fn undef_site(&mut self, d: usize) -> Expr {
        let len = self.lens[self.cur];
        match self.rng.gen_range(0..10) {
            0 | 1 => {
                let off = self.stray_offset(len);
                Expr::assign(cell(off), self.expr(d))
            }
            2 | 3 if self.n() > 1 => self.neighbor_store(),
            4 => {
                let off = self.stray_offset(len);
                Expr::call(ComponentId::ENV, ENV_WRITE, Expr::deref(cell(off)))
            }
            5 => {
                let k = self.small();
                if self.rng.gen_bool(0.5) {
                    Expr::deref(Expr::Int(k))
                } else {
                    Expr::assign(Expr::Int(k), self.expr(d))
                }
            }
            6 => {
                let top = Expr::deref(Expr::alloc(Expr::Int(1)));
                Expr::if_(top, self.expr(d), self.expr(d))
            }
            7 => Expr::call(ComponentId::ENV, ENV_WRITE, Expr::Local),
            8 => {
                // Overwrite the stack frames that follow the buffer.
                let v = self.small();
                Expr::seq_all((1..=6).map(|i| Expr::assign(cell(len + i), Expr::Int(v))).collect())
            }
            _ => Expr::alloc(Expr::Int(-self.rng.gen_range(0..2))),
        }
    }

    /// Under the default SFI layout every buffer starts at the same offset
    /// of its component's data slot, so this store would hit the last cell of
    /// another component's buffer, the one bodies print. When the other
    /// component may be called next, it is.
    fn neighbor_store(&mut self) -> Expr {
        let cur = self.cur as i64;
        let others: Vec<i64> = (1..=self.n() as i64).filter(|&c| c != cur).collect();
        let target = *others.choose(&mut self.rng).expect("two components");
        let off = (target - cur) * SLOT_STRIDE + self.lens[target as usize] - 1;
        let store = Expr::assign(cell(off), Expr::Int(self.rng.gen_range(100..1000)));
        let callee = self
            .forward_targets()
            .into_iter()
            .find(|&(c, _)| c as i64 == target);
        match callee {
            Some(t) if self.calls_left > 0 => {
                self.calls_left -= 1;
                Expr::seq(store, self.call_to(t, Expr::Int(0)))
            }
            _ => store,
        }
    }

    /// Offsets past either end of the buffer: into the stack right after
    /// it, just before it, or far away.
    fn stray_offset(&mut self, len: i64) -> i64 {
        match self.rng.gen_range(0..3) {
            0 => len + self.rng.gen_range(0..4),
            1 => -self.rng.gen_range(1..4),
            _ => {
                let far = self.rng.gen_range(SLOT_STRIDE..1 << 24);
                if self.rng.gen_bool(0.5) {
                    far
                } else {
                    -far
                }
            }
        }
    }

    fn body(&mut self) -> Expr {
        self.calls_left = MAX_CALLS;
        let depth = self.rng.gen_range(range(self.cfg.body_depth));
        let mut body = self.expr(depth);
        if self.rng.gen_bool(0.5) {
            let k = self.lens[self.cur] - 1;
            let show = Expr::call(ComponentId::ENV, ENV_WRITE, Expr::local_at(k));
            body = Expr::seq(body, show);
        }
        if self.rng.gen_bool(self.cfg.undef_probability) {
            let ub = self.undef_site(depth.saturating_sub(1));
            body = match self.rng.gen_range(0..3) {
                0 => Expr::seq(ub, body),
                1 => Expr::seq(body, ub),
                _ => {
                    let other = self.expr(1);
                    Expr::if_(self.expr(1), Expr::seq(ub, body), other)
                }
            };
        }
        body
    }

    /// `main` starts with an observable call so that traces are rarely empty.
    fn main_body(&mut self) -> Expr {
        let first = match self.call(1) {
            Some(c) if self.rng.gen_bool(0.7) => c,
            _ => {
                let d = self.rng.gen_range(0..2);
                Expr::call(ComponentId::ENV, ENV_WRITE, self.expr(d))
            }
        };
        let rest = self.body();
        Expr::seq(first, rest)
    }
}

/// Generates a well-formed program, a pure function of `cfg`.
pub fn gen_source(cfg: &GenConfig) -> SourceProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = rng.gen_range(range(cfg.components));
    let mut procs = vec![0];
    let mut lens = vec![0];
    for _ in 0..n {
        procs.push(rng.gen_range(range(cfg.procedures)));
        lens.push(rng.gen_range(DATA + 2..=DATA + 4));
    }
    let mut g = Gen {
        rng,
        cfg,
        procs,
        lens,
        cur: 1,
        cur_proc: None,
        calls_left: 0,
    };
    let mut components = BTreeMap::new();
    for c in 1..=n {
        g.cur = c;
        let mut procedures = BTreeMap::new();
        if c == 1 {
            g.cur_proc = None;
            let b = g.main_body();
            procedures.insert("main".to_string(), b);
        }
        for p in 0..g.procs[c] {
            g.cur_proc = Some(p);
            let b = g.body();
            procedures.insert(proc_name(p), b);
        }
        let id = ComponentId(c as u32);
        let mut imports = Vec::new();
        for b in procedures.values() {
            b.calls(&mut imports);
        }
        let interface = Interface::new(id)
            .with_exports((0..g.procs[c]).map(proc_name))
            .with_imports(
                imports
                    .into_iter()
                    .filter(|(t, _)| *t != id)
                    .map(|(t, p)| ProcedureId::new(t, p)),
            );
        components.insert(
            id,
            SourceComponent {
                name: format!("C{c}"),
                interface,
                procedures,
                buffers: vec![g.lens[c]],
            },
        );
    }
    let tape_len = g.rng.gen_range(0..=4);
    let env_tape = (0..tape_len).map(|_| g.rng.gen_range(-3..=20)).collect();
    SourceProgram {
        components,
        main: ProcedureId::new(ComponentId(1), "main"),
        env_tape,
    }
}

/// A generated program together with its compilation.
pub fn gen_program(cfg: &GenConfig) -> (SourceProgram, MachineProgram) {
    let src = gen_source(cfg);
    let m = compile_program(&src);
    (src, m)
}
