//! Slot layout of the flat address space.
//!
//! An address is the triple (slot, component, offset) packed as
//! `slot << (component_bits + offset_bits) | component << offset_bits | offset`.
//! Slots with odd numbers hold data, even ones hold code.

use serde::{Deserialize, Serialize};

/// Addresses are non-negative and below `2^ADDR_BITS`, so every address
/// fits an instruction immediate.
pub const ADDR_BITS: u32 = 44;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub offset_bits: u32,
    pub component_bits: u32,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            offset_bits: 12,
            component_bits: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LayoutError {
    #[error("offset bits must be at least 6, got {0}")]
    OffsetBits(u32),
    #[error("component bits must be at least 1, got {0}")]
    ComponentBits(u32),
    #[error("layout leaves fewer than 4 slots")]
    TooFewSlots,
    #[error("{field} {value} out of range (limit {limit})")]
    Range {
        field: &'static str,
        value: i64,
        limit: i64,
    },
    #[error("address {0} is outside the address space")]
    Address(i64),
}

/// Decoded form of a flat address.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogicalAddr {
    pub component: u32,
    pub slot: u64,
    pub offset: u64,
}

impl LogicalAddr {
    pub fn is_code(&self) -> bool {
        self.slot % 2 == 0
    }
}

impl LayoutConfig {
    pub fn validate(&self) -> Result<(), LayoutError> {
        if self.offset_bits < 6 {
            return Err(LayoutError::OffsetBits(self.offset_bits));
        }
        if self.component_bits == 0 {
            return Err(LayoutError::ComponentBits(0));
        }
        if self.offset_bits + self.component_bits + 2 > ADDR_BITS {
            return Err(LayoutError::TooFewSlots);
        }
        Ok(())
    }

    pub fn slot_shift(&self) -> u32 {
        self.offset_bits + self.component_bits
    }

    pub fn slot_words(&self) -> i64 {
        1 << self.offset_bits
    }

    pub fn max_components(&self) -> u64 {
        1 << self.component_bits
    }

    pub fn max_slots(&self) -> u64 {
        1 << (ADDR_BITS - self.slot_shift())
    }

    /// Clears the component field and the parity bit of the slot, keeping
    /// the address in range.
    pub fn store_and_mask(&self) -> i64 {
        let slots = ((self.max_slots() - 1) & !1) as i64;
        slots << self.slot_shift() | (self.slot_words() - 1)
    }

    /// Sets the component field to `c` and makes the slot odd.
    pub fn store_or_mask(&self, c: u32) -> i64 {
        1 << self.slot_shift() | (c as i64) << self.offset_bits
    }

    /// Like the store mask, also clearing the low four offset bits.
    pub fn jump_and_mask(&self) -> i64 {
        self.store_and_mask() & !15
    }

    pub fn jump_or_mask(&self, c: u32) -> i64 {
        (c as i64) << self.offset_bits
    }

    pub fn encode(&self, component: u32, slot: u64, offset: i64) -> Result<i64, LayoutError> {
        let range = |field, value: i64, limit: i64| {
            if (0..limit).contains(&value) {
                Ok(())
            } else {
                Err(LayoutError::Range {
                    field,
                    value,
                    limit,
                })
            }
        };
        range("component", component as i64, self.max_components() as i64)?;
        range("slot", slot as i64, self.max_slots() as i64)?;
        range("offset", offset, self.slot_words())?;
        Ok((slot as i64) << self.slot_shift() | (component as i64) << self.offset_bits | offset)
    }

    pub fn decode(&self, addr: i64) -> Result<LogicalAddr, LayoutError> {
        if !(0..1i64 << ADDR_BITS).contains(&addr) {
            return Err(LayoutError::Address(addr));
        }
        let a = addr as u64;
        Ok(LogicalAddr {
            component: ((a >> self.offset_bits) & (self.max_components() - 1)) as u32,
            slot: a >> self.slot_shift(),
            offset: a & (self.slot_words() as u64 - 1),
        })
    }

    /// Component field of an address, if it is in range.
    pub fn component_of(&self, addr: i64) -> Option<u32> {
        self.decode(addr).ok().map(|l| l.component)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_address() {
        let cfg = LayoutConfig {
            offset_bits: 12,
            component_bits: 2,
        };
        assert_eq!(cfg.encode(1, 2, 5), Ok(36869));
        assert_eq!(
            cfg.decode(36869),
            Ok(LogicalAddr {
                component: 1,
                slot: 2,
                offset: 5
            })
        );
        assert_eq!(LayoutConfig::default().encode(0, 0, 0), Ok(0));
    }

    #[test]
    fn out_of_range_fields_are_rejected() {
        let cfg = LayoutConfig::default();
        assert!(cfg.encode(16, 0, 0).is_err());
        assert!(cfg.encode(0, 0, 4096).is_err());
        assert!(cfg.encode(0, 0, -1).is_err());
        assert!(cfg.decode(-1).is_err());
        assert!(LayoutConfig { offset_bits: 5, component_bits: 4 }.validate().is_err());
    }

    #[test]
    fn masks_force_component_and_parity() {
        let cfg = LayoutConfig::default();
        let masked = |a: i64| a & cfg.store_and_mask() | cfg.store_or_mask(3);
        for a in [0, 12345, -1, i64::MAX, cfg.encode(7, 8, 100).unwrap()] {
            let l = cfg.decode(masked(a)).unwrap();
            assert_eq!(l.component, 3);
            assert!(!l.is_code());
        }
        let j = cfg.decode(-77 & cfg.jump_and_mask() | cfg.jump_or_mask(2)).unwrap();
        assert!(j.is_code() && j.component == 2 && j.offset % 16 == 0);
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(ob in 6u32..20, cb in 1u32..8, c in 0u32..256, s in 0u64..1 << 16, o in 0i64..1 << 20) {
            let cfg = LayoutConfig { offset_bits: ob, component_bits: cb };
            let (c, s, o) = (c % (1 << cb), s % cfg.max_slots(), o % cfg.slot_words());
            let a = cfg.encode(c, s, o).unwrap();
            prop_assert_eq!(cfg.decode(a).unwrap(), LogicalAddr { component: c, slot: s, offset: o as u64 });
        }
    }
}
