//! Block-structured memory: each component owns a numbered family of finite
//! blocks, and pointers name a block and an offset inside it.

use std::collections::{BTreeMap, HashMap};

use crate::model::ComponentId;
use crate::value::{Pointer, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    len: i64,
    fill: Value,
    cells: HashMap<i64, Value>,
}

impl Block {
    /// A block of `len` cells, all holding `fill`. Cells are materialized
    /// lazily, so large blocks are cheap.
    pub fn filled(len: i64, fill: Value) -> Self {
        Block {
            len,
            fill,
            cells: HashMap::new(),
        }
    }

    pub fn from_values(values: &[Value]) -> Self {
        let mut b = Block::filled(values.len() as i64, Value::Top);
        for (i, v) in values.iter().enumerate() {
            b.cells.insert(i as i64, *v);
        }
        b
    }

    pub fn len(&self) -> i64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn in_bounds(&self, offset: i64) -> bool {
        (0..self.len).contains(&offset)
    }

    pub fn get(&self, offset: i64) -> Option<Value> {
        self.in_bounds(offset)
            .then(|| self.cells.get(&offset).copied().unwrap_or(self.fill))
    }

    pub fn set(&mut self, offset: i64, v: Value) -> bool {
        if self.in_bounds(offset) {
            self.cells.insert(offset, v);
            true
        } else {
            false
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MemError {
    #[error("no block {0}")]
    Dangling(Pointer),
    #[error("offset out of bounds at {0}")]
    OutOfBounds(Pointer),
}

/// Memory of every component. Block ids are per component; `None` slots are
/// ids reserved for something other than data (machine code blocks).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Memory {
    blocks: BTreeMap<ComponentId, Vec<Option<Block>>>,
}

impl Memory {
    pub fn new() -> Self {
        Memory::default()
    }

    /// Installs `block` under id `id`, reserving lower ids if needed.
    pub fn install(&mut self, c: ComponentId, id: u32, block: Block) {
        let v = self.blocks.entry(c).or_default();
        let id = id as usize;
        if v.len() <= id {
            v.resize(id + 1, None);
        }
        v[id] = Some(block);
    }

    /// Reserves ids `0..n` of `c` so later allocations come after them.
    pub fn reserve(&mut self, c: ComponentId, n: u32) {
        let v = self.blocks.entry(c).or_default();
        if v.len() < n as usize {
            v.resize(n as usize, None);
        }
    }

    /// A fresh block owned by `c`; returns a pointer to its first cell.
    pub fn alloc(&mut self, c: ComponentId, len: i64, fill: Value) -> Pointer {
        let v = self.blocks.entry(c).or_default();
        v.push(Some(Block::filled(len, fill)));
        Pointer::new(c, (v.len() - 1) as u32, 0)
    }

    pub fn block(&self, c: ComponentId, id: u32) -> Option<&Block> {
        self.blocks.get(&c)?.get(id as usize)?.as_ref()
    }

    pub fn load(&self, p: Pointer) -> Result<Value, MemError> {
        self.block(p.component, p.block)
            .ok_or(MemError::Dangling(p))?
            .get(p.offset)
            .ok_or(MemError::OutOfBounds(p))
    }

    pub fn store(&mut self, p: Pointer, v: Value) -> Result<(), MemError> {
        let b = self
            .blocks
            .get_mut(&p.component)
            .and_then(|bs| bs.get_mut(p.block as usize))
            .and_then(|b| b.as_mut())
            .ok_or(MemError::Dangling(p))?;
        if b.set(p.offset, v) {
            Ok(())
        } else {
            Err(MemError::OutOfBounds(p))
        }
    }

    pub fn block_count(&self, c: ComponentId) -> usize {
        self.blocks.get(&c).map_or(0, Vec::len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_store_and_bounds() {
        let c = ComponentId(1);
        let mut m = Memory::new();
        m.install(c, 0, Block::filled(2, Value::Int(0)));
        let p = Pointer::new(c, 0, 1);
        assert_eq!(m.load(p), Ok(Value::Int(0)));
        m.store(p, Value::Int(9)).unwrap();
        assert_eq!(m.load(p), Ok(Value::Int(9)));
        assert_eq!(m.load(p.shift(1)), Err(MemError::OutOfBounds(p.shift(1))));
        assert!(m.load(Pointer::new(c, 5, 0)).is_err());
    }

    #[test]
    fn alloc_follows_reserved_ids() {
        let c = ComponentId(2);
        let mut m = Memory::new();
        m.reserve(c, 3);
        let p = m.alloc(c, 1_000_000_000, Value::Top);
        assert_eq!(p.block, 3);
        assert_eq!(m.load(p.shift(999_999_999)), Ok(Value::Top));
        assert!(m.load(Pointer::new(c, 1, 0)).is_err());
    }
}
