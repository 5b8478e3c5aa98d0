//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Run with `cargo test -p regretlab --test acceptance -- --nocapture` to see
//! the lines and the per-check table.

use regretlab::verify::{format_table, run_criterion};

fn check(id: u8) {
    let r = run_criterion(id);
    println!("{}", r.line());
    assert!(r.passed, "\n{}", format_table(std::slice::from_ref(&r)));
}

#[test]
fn c01_dfp_regret_lock_in() {
    check(1);
}

#[test]
fn c02_cfp_conservation() {
    check(2);
}

#[test]
fn c03_unilateral_conservation() {
    check(3);
}

#[test]
fn c04_reduced_hannan_convergence() {
    check(4);
}

#[test]
fn c05_zero_sum_convergence() {
    check(5);
}

#[test]
fn c06_dominated_actions_vanish() {
    check(6);
}

#[test]
fn c07_potential_game_convergence() {
    check(7);
}

#[test]
fn c08_hannan_membership_exact() {
    check(8);
}

#[test]
fn c09_graph_perturbed_distance_exact() {
    check(9);
}

#[test]
fn c10_slack_bounded_by_regret() {
    check(10);
}

#[test]
fn c11_curb_machinery_exact() {
    check(11);
}

#[test]
fn c12_curb_attraction() {
    check(12);
}

#[test]
fn c13_shapley_dichotomy() {
    check(13);
}

#[test]
fn c14_a2ex2_nash_edges() {
    check(14);
}

#[test]
fn c15_step_identities() {
    check(15);
}

#[test]
fn c16_continuous_no_regret_flow() {
    check(16);
}
