//! Smallest possible use of the safety filter: two vehicles on a collision
//! course, one constraint, one projection of a nominal input onto the
//! admissible control space.
//!
//!     cargo run --example filter_single_step

use std::f64::consts::PI;

use maneuver_cbf::barrier::EvadingManeuver;
use maneuver_cbf::dynamics::{ControlBounds, StackedState, VehicleState};
use maneuver_cbf::safety::SafetyKind;
use maneuver_cbf::supervisor::{build_shared_maneuver_constraints, centralized_filter, AlphaFunction};

fn main() {
    let bounds = ControlBounds::new(15.0, 25.0, 13.0_f64.to_radians()).unwrap();

    // Every barrier in a scenario is built from one shared evading
    // maneuver; here both vehicles would turn at 90% of the rate limit.
    let maneuver = EvadingManeuver::Turn {
        sigmas: vec![1.1, 1.0],
        omega: 0.9 * bounds.omega_max,
        speed: 16.0,
    };
    let cs = build_shared_maneuver_constraints(2, SafetyKind::AdjustedSqrt, 5.0, 0.01, maneuver)
        .unwrap();
    let alpha = AlphaFunction::linear(1.0).unwrap();

    // Head-on at 60 m. The barrier is positive (still safe) but the
    // nominal input of "full speed, straight ahead" would shrink it.
    let x = StackedState::new(vec![
        VehicleState::new(-30.0, 0.0, 0.0),
        VehicleState::new(30.0, 0.0, PI),
    ]);
    let evals = cs.evaluate_all(&x).unwrap();
    println!("barrier value h = {:.4}", evals[0].h);

    let nominal = [25.0, 0.0, 25.0, 0.0];
    let (filtered, iterations) = centralized_filter(&cs, &alpha, &x, &nominal, &bounds).unwrap();
    println!("nominal  = {nominal:?}");
    println!("filtered = {filtered:?}  ({iterations} QP iterations)");

    let slack = cs.centralized_slack(&alpha, &evals[0], &filtered);
    println!("constraint row slack at the filtered input = {slack:.2e}");
}
