//! Acceptance suite: every criterion pinned to its tolerance, one
//! pass/fail line each (visible with `--nocapture`), runtime budgets
//! asserted where stated.
//!
//! Run with `cargo test --test acceptance` (use `--release` for
//! representative timings).

use maneuver_cbf::verify::{self, CriterionReport};

fn check(report: CriterionReport) {
    println!("{}", report.line());
    assert!(report.passed, "{}", report.line());
    assert!(
        report.within_budget(),
        "criterion {} exceeded its runtime budget ({:.2}s > {:?})",
        report.id,
        report.runtime.as_secs_f64(),
        report.runtime_limit
    );
}

#[test]
fn criterion_1_euclidean_candidate_failure() {
    check(verify::criterion_1());
}

#[test]
fn criterion_2_closed_form_vs_rollout_oracle() {
    check(verify::criterion_2());
}

#[test]
fn criterion_3_gradient_formula() {
    check(verify::criterion_3());
}

#[test]
fn criterion_4_three_vehicle_counterexample() {
    check(verify::criterion_4());
}

#[test]
fn criterion_5_decentralized_soundness() {
    check(verify::criterion_5());
}

#[test]
fn criterion_6_forward_invariance_at_desk_scale() {
    check(verify::criterion_6());
}

#[test]
fn criterion_7_qp_solver_oracle_equivalence() {
    check(verify::criterion_7());
}

#[test]
fn criterion_8_decentralized_conservatism() {
    check(verify::criterion_8());
}
