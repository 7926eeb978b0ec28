//! Separate compilation of source components to machine components.
//!
//! Conventions: every expression leaves its value in `R_COM`; `R_ONE` holds 1
//! and `R_SP` points at the next free cell of the component's local stack.
//! Data blocks are laid out as the static buffers, then a one-cell block
//! where `R_SP` is parked across cross-component calls, then the stack.
//! Each procedure gets its own code block:
//!
//! ```text
//! 0               start stub   (entered when the procedure is main)
//! START_LEN       external preamble (exported procedures only)
//! internal        push R_RA; push argument; body; pop both; Jump R_RA
//! ```

use std::collections::BTreeMap;

use crate::machine::{
    DataBlock, Imm, Instr, Label, MachineComponent, MachineProgram, ProcEntries, Reg,
};
use crate::model::ComponentId;
use crate::source::{Expr, SourceComponent, SourceProgram};
use crate::value::{BinOp, Pointer, Value};

/// Words in each component's local stack.
pub const STACK_WORDS: i64 = 2048;

const START_LEN: i64 = 6;
const PREAMBLE_LEN: i64 = 11;

/// Block ids used by a compiled component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameLayout {
    pub buffers: u32,
    pub sp_cell: u32,
    pub stack: u32,
    pub first_code: u32,
}

impl FrameLayout {
    pub fn for_component(c: &SourceComponent) -> Self {
        let buffers = c.buffers.len().max(1) as u32;
        FrameLayout {
            buffers,
            sp_cell: buffers,
            stack: buffers + 1,
            first_code: buffers + 2,
        }
    }
}

enum Item {
    I(Instr),
    /// `Bnz` to a local label, patched once the label is placed.
    BnzTo(Reg, usize),
    Mark(usize),
}

struct Emitter<'a> {
    id: ComponentId,
    block: u32,
    layout: FrameLayout,
    internal: &'a BTreeMap<String, Label>,
    items: Vec<Item>,
    next_label: usize,
}

impl Emitter<'_> {
    fn emit(&mut self, i: Instr) {
        self.items.push(Item::I(i));
    }

    fn len(&self) -> i64 {
        self.items.iter().filter(|i| !matches!(i, Item::Mark(_))).count() as i64
    }

    fn fresh(&mut self) -> usize {
        self.next_label += 1;
        self.next_label - 1
    }

    fn push(&mut self, r: Reg) {
        self.emit(Instr::Store(Reg::Sp, r));
        self.emit(Instr::BinOp(BinOp::Add, Reg::Sp, Reg::One, Reg::Sp));
    }

    fn pop(&mut self, r: Reg) {
        self.emit(Instr::BinOp(BinOp::Sub, Reg::Sp, Reg::One, Reg::Sp));
        self.emit(Instr::Load(Reg::Sp, r));
    }

    fn sp_cell(&self) -> Imm {
        Imm::Data {
            block: self.layout.sp_cell,
            offset: 0,
        }
    }

    fn reload_sp(&mut self) {
        self.emit(Instr::Const(self.sp_cell(), Reg::Sp));
        self.emit(Instr::Load(Reg::Sp, Reg::Sp));
        self.emit(Instr::Const(Imm::Int(1), Reg::One));
    }

    fn save_sp(&mut self) {
        self.emit(Instr::Const(self.sp_cell(), Reg::Aux2));
        self.emit(Instr::Store(Reg::Aux2, Reg::Sp));
    }

    /// Drops the argument and restores the caller's return address.
    fn pop_frame(&mut self) {
        self.emit(Instr::BinOp(BinOp::Sub, Reg::Sp, Reg::One, Reg::Sp));
        self.pop(Reg::Ra);
    }

    fn expr(&mut self, e: &Expr, depth: i64, tail: bool) {
        match e {
            Expr::Int(n) => self.emit(Instr::Const(Imm::Int(*n), Reg::Com)),
            Expr::Local => self.emit(Instr::Const(Imm::Data { block: 0, offset: 0 }, Reg::Com)),
            Expr::Arg => {
                self.emit(Instr::Const(Imm::Int(-(1 + depth)), Reg::Aux2));
                self.emit(Instr::BinOp(BinOp::Add, Reg::Sp, Reg::Aux2, Reg::Aux2));
                self.emit(Instr::Load(Reg::Aux2, Reg::Com));
            }
            Expr::BinOp(op, a, b) => {
                self.expr(a, depth, false);
                self.push(Reg::Com);
                self.expr(b, depth + 1, false);
                self.pop(Reg::Aux1);
                self.emit(Instr::BinOp(*op, Reg::Aux1, Reg::Com, Reg::Com));
            }
            Expr::Seq(a, b) => {
                self.expr(a, depth, false);
                self.expr(b, depth, tail);
            }
            Expr::If(c, t, f) => {
                let then_l = self.fresh();
                let end_l = self.fresh();
                self.expr(c, depth, false);
                self.items.push(Item::BnzTo(Reg::Com, then_l));
                self.expr(f, depth, tail);
                self.items.push(Item::BnzTo(Reg::One, end_l));
                self.items.push(Item::Mark(then_l));
                self.expr(t, depth, tail);
                self.items.push(Item::Mark(end_l));
            }
            Expr::Alloc(a) => {
                self.expr(a, depth, false);
                self.emit(Instr::Alloc(Reg::Com, Reg::Com));
            }
            Expr::Deref(a) => {
                self.expr(a, depth, false);
                self.emit(Instr::Load(Reg::Com, Reg::Com));
            }
            Expr::Assign(p, v) => {
                self.expr(p, depth, false);
                self.push(Reg::Com);
                self.expr(v, depth + 1, false);
                self.pop(Reg::Aux1);
                self.emit(Instr::Store(Reg::Aux1, Reg::Com));
            }
            Expr::Call(c, p, a) if *c == self.id => {
                self.expr(a, depth, false);
                let target = self.internal[p];
                if tail && depth == 0 {
                    self.pop_frame();
                    self.emit(Instr::Bnz(Reg::One, target));
                } else {
                    self.emit(Instr::Jal(target));
                }
            }
            Expr::Call(c, p, a) => {
                self.expr(a, depth, false);
                self.save_sp();
                self.emit(Instr::Call(*c, p.clone()));
                self.reload_sp();
            }
            Expr::Exit => self.emit(Instr::Halt),
        }
    }

    fn assemble(self) -> Vec<Instr> {
        let mut offsets = BTreeMap::new();
        let mut n = 0;
        for it in &self.items {
            match it {
                Item::Mark(l) => {
                    offsets.insert(*l, n);
                }
                _ => n += 1,
            }
        }
        let mut out = Vec::with_capacity(n as usize);
        for it in self.items {
            match it {
                Item::I(i) => out.push(i),
                Item::BnzTo(r, l) => out.push(Instr::Bnz(r, Label::new(self.block, offsets[&l]))),
                Item::Mark(_) => {}
            }
        }
        out
    }
}

/// Compiles one component without looking at any other.
pub fn compile_component(c: &SourceComponent) -> MachineComponent {
    let id = c.id();
    let layout = FrameLayout::for_component(c);
    let mut data = BTreeMap::new();
    for b in 0..layout.buffers {
        let len = c.buffers.get(b as usize).copied().unwrap_or(0);
        data.insert(b, DataBlock::filled(len, Value::Int(0)));
    }
    data.insert(
        layout.sp_cell,
        DataBlock {
            len: 1,
            fill: Value::Top,
            init: vec![Value::Ptr(Pointer::new(id, layout.stack, 0))],
        },
    );
    data.insert(layout.stack, DataBlock::filled(STACK_WORDS, Value::Top));

    let mut entries = BTreeMap::new();
    let mut internal = BTreeMap::new();
    for (k, name) in c.procedures.keys().enumerate() {
        let block = layout.first_code + k as u32;
        let exported = c.interface.exports.contains(name);
        let body_at = START_LEN + if exported { PREAMBLE_LEN } else { 0 };
        internal.insert(name.clone(), Label::new(block, body_at));
        entries.insert(
            name.clone(),
            ProcEntries {
                internal: Label::new(block, body_at),
                external: exported.then_some(Label::new(block, START_LEN)),
                start: Some(Label::new(block, 0)),
            },
        );
    }

    let mut code = BTreeMap::new();
    for (name, body) in &c.procedures {
        let entry = entries[name];
        let block = entry.internal.block;
        let mut em = Emitter {
            id,
            block,
            layout,
            internal: &internal,
            items: Vec::new(),
            next_label: 0,
        };
        // start stub
        em.reload_sp();
        em.emit(Instr::Const(Imm::Int(0), Reg::Com));
        em.emit(Instr::Jal(entry.internal));
        em.emit(Instr::Halt);
        if entry.external.is_some() {
            em.reload_sp();
            em.push(Reg::Ra);
            em.emit(Instr::Jal(entry.internal));
            em.pop(Reg::Ra);
            em.save_sp();
            em.emit(Instr::Return);
        }
        debug_assert_eq!(em.len(), entry.internal.offset);
        em.push(Reg::Ra);
        em.push(Reg::Com);
        em.expr(body, 0, true);
        em.pop_frame();
        em.emit(Instr::Jump(Reg::Ra));
        code.insert(block, em.assemble());
    }

    MachineComponent {
        interface: c.interface.clone(),
        code,
        data,
        entries,
    }
}

/// Compiles each component separately; interfaces and main carry over.
pub fn compile_program(p: &SourceProgram) -> MachineProgram {
    MachineProgram {
        components: p
            .components
            .iter()
            .map(|(id, c)| (*id, compile_component(c)))
            .collect(),
        main: p.main.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::mrun;
    use crate::source::{parse_source, run_source};

    #[test]
    fn stub_and_preamble_lengths_match_constants() {
        let p = parse_source(
            "component A { export p; p(_) { 0 } main() { 0 } }",
        )
        .unwrap();
        let m = compile_component(&p.components[&ComponentId(1)]);
        let e = m.entries["p"];
        assert_eq!(m.instr_at(Label::new(e.internal.block, START_LEN - 1)), Some(&Instr::Halt));
        assert_eq!(
            m.instr_at(Label::new(e.internal.block, START_LEN + PREAMBLE_LEN - 1)),
            Some(&Instr::Return)
        );
        let compiled = compile_program(&p);
        compiled.validate().unwrap();
    }

    #[test]
    fn exit_compiles_to_halt() {
        let p = parse_source("component M { main() { exit } }").unwrap();
        let m = compile_program(&p);
        assert_eq!(mrun(&m, 1000, &[]), run_source(&p, 1000));
    }

    #[test]
    fn external_call_passes_argument_in_com() {
        let p = parse_source(
            "component A { import B.parse; main(x) { B.parse(x + 4) } }
             component B { export parse; parse(x) { x } }",
        )
        .unwrap();
        let m = compile_program(&p);
        let code = &m.components[&ComponentId(1)].code;
        let flat: Vec<&Instr> = code.values().flatten().collect();
        let k = flat
            .iter()
            .position(|i| **i == Instr::Call(ComponentId(2), "parse".into()))
            .unwrap();
        // the argument is computed into R_COM before the call site
        assert!(flat[..k]
            .iter()
            .any(|i| matches!(i, Instr::BinOp(BinOp::Add, _, _, Reg::Com))));
        let (t, _) = mrun(&m, 10_000, &[]);
        assert_eq!(t.events[0], crate::model::Event::call(1, 2, "parse", 4));
    }

    #[test]
    fn deep_tail_recursion_stays_in_stack() {
        let p = parse_source(
            "component A { main(x) { if (x == 5000) { 7 } else { A.main(x + 1) } } }",
        )
        .unwrap();
        let m = compile_program(&p);
        let (t, o) = mrun(&m, 1_000_000, &[]);
        assert_eq!((t, o), run_source(&p, 1_000_000));
    }
}
