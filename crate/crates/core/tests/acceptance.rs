//! The eight end-to-end criteria at their stated tolerances and budgets.

use fiberlab::selftest;

const SEED: u64 = 7;

fn check(id: usize) {
    let report = selftest::run(id, SEED).unwrap();
    println!("{}", report.line());
    assert!(report.passed, "{}", report.line());
}

#[test]
fn heat_flow_retraction() {
    check(1);
}

#[test]
fn cech_cocycles() {
    check(2);
}

#[test]
fn fibration_geometry() {
    check(3);
}

#[test]
fn field_splitting() {
    check(4);
}

#[test]
fn karcher_centers() {
    check(5);
}

#[test]
fn straightening() {
    check(6);
}

#[test]
fn curve_shortening_flow() {
    check(7);
}

#[test]
fn core_orbit() {
    check(8);
}
