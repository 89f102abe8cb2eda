use tally::Tally;

fn check_total(t: &Tally, expected: u64) {
    assert_eq!(t.total(), expected);
}

#[test]
fn records_accumulate() {
    let mut t = Tally::with_buckets(3);
    for b in [0, 1, 1, 2] {
        assert!(t.record(b));
    }
    assert_eq!(t.count(1), 2);
    check_total(&t, 4);
}

#[test]
fn empty_tally_is_zero() {
    let t = Tally::with_buckets(0);
    check_total(&t, 0);
}
