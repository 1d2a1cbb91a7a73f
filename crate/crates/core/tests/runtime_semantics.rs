//! Exhaustive agreement between the runtime and a naive reference
//! interpreter over every DAG of up to four agents and every activation
//! pattern, with and without required predecessors.

mod common;

use common::reference::check;

#[test]
fn up_to_three_agents() {
    assert_eq!(check(1, 0..1).unwrap(), 6);
    assert!(check(2, 0..4).unwrap() > 0);
    assert!(check(3, 0..64).unwrap() > 0);
}

#[test]
fn four_agents_first_half() {
    assert!(check(4, 0..2048).unwrap() > 0);
}

#[test]
fn four_agents_second_half() {
    assert!(check(4, 2048..4096).unwrap() > 0);
}
