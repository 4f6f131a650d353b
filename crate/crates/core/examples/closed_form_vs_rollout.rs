//! The closed-form barrier values against the defining rollout infimum on
//! random safe states: the phasor form for turn maneuvers, the quadratic
//! vertex for straight ones.
//!
//!     cargo run --release --example closed_form_vs_rollout

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use maneuver_cbf::barrier::{BarrierSpec, EvadingManeuver};
use maneuver_cbf::dynamics::{StackedState, VehicleState};
use maneuver_cbf::safety::{SafetyFnSpec, SafetyKind};

fn sample(rng: &mut ChaCha8Rng) -> StackedState {
    StackedState::new(
        (0..2)
            .map(|_| {
                VehicleState::new(
                    rng.gen_range(-150.0..150.0),
                    rng.gen_range(-150.0..150.0),
                    rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                )
            })
            .collect(),
    )
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let omega = 0.9 * 13.0_f64.to_radians();
    let turn = BarrierSpec::new(
        SafetyFnSpec::new(SafetyKind::AdjustedSqrt, 0, 1, 5.0, 0.01).unwrap(),
        Arc::new(EvadingManeuver::Turn {
            sigmas: vec![1.1, 1.0],
            omega,
            speed: 16.0,
        }),
    )
    .unwrap();
    let straight = BarrierSpec::new(
        SafetyFnSpec::new(SafetyKind::PlainSqrt, 0, 1, 5.0, 0.0).unwrap(),
        Arc::new(EvadingManeuver::Straight {
            speeds: vec![17.6, 16.0],
        }),
    )
    .unwrap();

    for (label, spec) in [("turn", &turn), ("straight", &straight)] {
        let mut max_gap: f64 = 0.0;
        let mut checked = 0;
        while checked < 300 {
            let x = sample(&mut rng);
            let (value, tau_star) = match spec.value(&x) {
                Ok(pair) if pair.0 >= 0.0 => pair,
                _ => continue,
            };
            checked += 1;
            let horizon = spec.suggested_horizon(&x).unwrap();
            let oracle = spec.rollout_infimum(&x, horizon, 1e-4 * horizon).unwrap();
            max_gap = max_gap.max((value - oracle).abs());
            if checked <= 3 {
                println!(
                    "{label}: h = {value:9.4}, attained at tau* = {tau_star:7.3} s, rollout gives {oracle:9.4}"
                );
            }
        }
        println!("{label}: max |closed form - rollout| over {checked} safe states = {max_gap:.3e}\n");
    }
}
