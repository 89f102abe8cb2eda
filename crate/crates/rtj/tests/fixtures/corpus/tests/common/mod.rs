#![allow(dead_code)]

use stockroom::Inventory;

pub fn sample() -> Inventory {
    let mut inv = Inventory::new();
    inv.add("bolt", 10);
    inv.add("nut", 20);
    inv
}

pub fn check_stocked(inv: &Inventory, name: &str) {
    assert!(inv.quantity(name).is_some_and(|q| q > 0), "{name} is not stocked");
}

pub fn check_all_stocked(inv: &Inventory, names: &[&str]) {
    for name in names {
        check_stocked(inv, name);
    }
}

pub fn check_against_reference(inv: &Inventory, reference: Option<&Inventory>) {
    if reference.is_none() {
        return;
    }
    assert_eq!(inv.total(), reference.unwrap().total());
}
