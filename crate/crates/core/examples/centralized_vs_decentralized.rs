//! The price of decentralization: on the same boundary state with the same
//! nominal inputs, the stacked program can split the correction between
//! vehicles while the per-vehicle strengthened programs each carry their
//! own share, so their total deviation is never smaller.
//!
//!     cargo run --example centralized_vs_decentralized

use std::f64::consts::PI;

use maneuver_cbf::barrier::EvadingManeuver;
use maneuver_cbf::dynamics::{ControlBounds, ControlInput, StackedState, VehicleState};
use maneuver_cbf::safety::SafetyKind;
use maneuver_cbf::supervisor::{
    build_shared_maneuver_constraints, centralized_filter, decentralized_filter, AlphaFunction,
};

fn main() {
    let bounds = ControlBounds::new(15.0, 25.0, 13.0_f64.to_radians()).unwrap();
    let cs = build_shared_maneuver_constraints(
        2,
        SafetyKind::AdjustedSqrt,
        5.0,
        0.01,
        EvadingManeuver::Turn {
            sigmas: vec![1.1, 1.0],
            omega: 0.9 * bounds.omega_max,
            speed: 16.0,
        },
    )
    .unwrap();
    let alpha = AlphaFunction::linear(1.0).unwrap();

    // Walk the pair toward each other until the barrier is nearly tight.
    let mut gap = 400.0;
    let state = loop {
        let x = StackedState::new(vec![
            VehicleState::new(-gap / 2.0, 0.0, 0.0),
            VehicleState::new(gap / 2.0, 0.0, PI),
        ]);
        let h = cs.evaluate_all(&x).unwrap()[0].h;
        if (0.0..=1.0).contains(&h) {
            println!("gap {gap} m, barrier h = {h:.4}");
            break x;
        }
        gap -= 1.0;
    };

    let nominal = [ControlInput::new(25.0, 0.0), ControlInput::new(25.0, 0.0)];
    let flat = [25.0, 0.0, 25.0, 0.0];

    let (central, _) = centralized_filter(&cs, &alpha, &state, &flat, &bounds).unwrap();
    let central_dev: f64 = central
        .iter()
        .zip(&flat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();

    let mut total_dev = 0.0;
    let mut stacked = Vec::new();
    for (i, u_hat) in nominal.iter().enumerate() {
        let (u, _) = decentralized_filter(&cs, &alpha, &state, *u_hat, i, &bounds).unwrap();
        total_dev += (u.v - u_hat.v).powi(2) + (u.omega - u_hat.omega).powi(2);
        stacked.push(u);
    }

    println!("centralized   u* = {central:?}");
    println!("decentralized u* = {stacked:?}");
    println!("centralized deviation   = {central_dev:.6}");
    println!("decentralized deviation = {total_dev:.6}");
    println!("conservatism gap        = {:.6}", total_dev - central_dev);
}
