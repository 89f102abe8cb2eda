mod common;

use stockroom::{parse_qty, ratio, Inventory};

#[test]
fn sample_is_fully_stocked() {
    let inv = common::sample();
    common::check_all_stocked(&inv, &["bolt", "nut"]);
}

#[test]
fn parse_accepts_padding() -> Result<(), String> {
    let q = parse_qty(" 7 ")?;
    assert_eq!(q, 7);
    Ok(())
}

#[test]
#[should_panic(expected = "zero divisor")]
fn ratio_panics_on_zero() {
    assert_eq!(ratio(1, 0), 0);
}

#[test]
fn first_item_is_checked_once() {
    let inv = common::sample();
    for name in inv.names() {
        assert!(inv.quantity(&name).is_some());
        return;
    }
}

#[test]
fn totals_add_up() {
    let mut inv = common::sample();
    inv.add("nut", 5);
    if inv.total() > 30 {
        assert_eq!(inv.total(), 35);
    } else {
        panic!("total too small");
    }
}

#[test]
fn empty_inventory_totals_zero() {
    let inv = Inventory::new();
    assert!(inv.is_empty());
    assert_eq!(inv.total(), 0);
}

#[test]
fn totals_double_count_known_bug() {
    let mut inv = Inventory::new();
    inv.add("bolt", 1);
    assert_eq!(inv.total(), 2);
    if inv.is_empty() {
        assert!(inv.names().is_empty());
    }
}

#[test]
#[ignore = "needs a real warehouse"]
fn warehouse_sync() {
    assert!(false, "not wired up");
}
