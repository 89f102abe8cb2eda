//! A small stock ledger.

use std::collections::BTreeMap;

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Inventory {
    items: BTreeMap<String, u32>,
}

impl Inventory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, qty: u32) {
        *self.items.entry(name.to_string()).or_insert(0) += qty;
    }

    pub fn quantity(&self, name: &str) -> Option<u32> {
        self.items.get(name).copied()
    }

    pub fn names(&self) -> Vec<String> {
        self.items.keys().cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn total(&self) -> u32 {
        self.items.values().sum()
    }
}

/// Integer ratio; panics on a zero divisor.
pub fn ratio(a: u32, b: u32) -> u32 {
    if b == 0 {
        panic!("zero divisor");
    }
    a / b
}

/// Integer ratio; `None` on a zero divisor.
pub fn checked_ratio(a: u32, b: u32) -> Option<u32> {
    a.checked_div(b)
}

pub fn parse_qty(s: &str) -> Result<u32, String> {
    s.trim().parse().map_err(|e| format!("bad quantity {s:?}: {e}"))
}

/// Old ledgers counted in dozens.
pub fn legacy_mode() -> bool {
    false
}

pub fn big_endian() -> bool {
    cfg!(target_endian = "big")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_accumulates() {
        let mut inv = Inventory::new();
        inv.add("bolt", 2);
        inv.add("bolt", 3);
        assert_eq!(inv.quantity("bolt"), Some(5));
    }

    #[test]
    fn ratio_divides() {
        assert_eq!(ratio(9, 3), 3);
        assert_eq!(checked_ratio(9, 0), None);
    }

    #[test]
    fn byte_order_round_trips() {
        let n = 0x0102u16;
        if big_endian() {
            assert_eq!(n.to_ne_bytes(), [1, 2]);
        }
        assert_eq!(u16::from_ne_bytes(n.to_ne_bytes()), n);
    }
}
