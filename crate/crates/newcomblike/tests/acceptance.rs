//! Acceptance gate: each test runs one numbered verification check and
//! prints its single pass or fail line. Run with `--nocapture` to see the
//! lines for passing checks too.

use newcomblike::verify::{criterion, CriterionOutcome};

const SEED: u64 = 20_240_601;

fn gate(index: usize) {
    let outcome: CriterionOutcome = criterion(index, SEED);
    let tag = if outcome.pass { "PASS" } else { "FAIL" };
    println!(
        "[{tag}] criterion {:02} ({}): {} [{} ms]",
        outcome.index, outcome.label, outcome.details, outcome.millis
    );
    assert!(
        outcome.pass,
        "criterion {:02} ({}) failed: {}",
        outcome.index, outcome.label, outcome.details
    );
}

#[test]
fn criterion_01_stationary_set_v1() {
    gate(1);
}

#[test]
fn criterion_02_value_and_credence_v1() {
    gate(2);
}

#[test]
fn criterion_03_weighted_beliefs_v2() {
    gate(3);
}

#[test]
fn criterion_04_box_problem_numbers() {
    gate(4);
}

#[test]
fn criterion_05_offer_optimum() {
    gate(5);
}

#[test]
fn criterion_06_gradient_identity() {
    gate(6);
}

#[test]
fn criterion_07_expansion_soundness() {
    gate(7);
}

#[test]
fn criterion_08_sampler_convergence() {
    gate(8);
}

#[test]
fn criterion_09_monte_carlo_validation() {
    gate(9);
}

#[test]
fn criterion_10_property_suite() {
    gate(10);
}
