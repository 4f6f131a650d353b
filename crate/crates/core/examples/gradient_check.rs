//! Barrier gradients three ways on one state: the analytic closed-form
//! differentiation used by the filters, central finite differences of the
//! value, and the finite-difference route through the rollout itself.
//!
//!     cargo run --example gradient_check

use std::sync::Arc;

use maneuver_cbf::barrier::{BarrierSpec, EvadingManeuver};
use maneuver_cbf::dynamics::{StackedState, VehicleState};
use maneuver_cbf::safety::{SafetyFnSpec, SafetyKind};

fn main() {
    let spec = BarrierSpec::new(
        SafetyFnSpec::new(SafetyKind::AdjustedSqrt, 0, 1, 5.0, 0.01).unwrap(),
        Arc::new(EvadingManeuver::Turn {
            sigmas: vec![1.1, 1.0],
            omega: 0.9 * 13.0_f64.to_radians(),
            speed: 16.0,
        }),
    )
    .unwrap();
    let x = StackedState::new(vec![
        VehicleState::new(-40.0, 12.0, 0.3),
        VehicleState::new(55.0, -20.0, 2.6),
    ]);

    let analytic = spec.gradient(&x).unwrap();

    let step = 1e-6;
    let flat = x.to_flat();
    let fd_value: Vec<f64> = (0..6)
        .map(|c| {
            let mut hi = flat.clone();
            let mut lo = flat.clone();
            hi[c] += step;
            lo[c] -= step;
            let f = |f: &[f64]| spec.value(&StackedState::from_flat(f)).unwrap().0;
            (f(&hi) - f(&lo)) / (2.0 * step)
        })
        .collect();
    let fd_rollout: Vec<f64> = (0..6)
        .map(|c| {
            let mut hi = flat.clone();
            let mut lo = flat.clone();
            hi[c] += step;
            lo[c] -= step;
            let horizon = spec.suggested_horizon(&x).unwrap();
            let f = |f: &[f64]| {
                spec.rollout_infimum(&StackedState::from_flat(f), horizon, 1e-5 * horizon)
                    .unwrap()
            };
            (f(&hi) - f(&lo)) / (2.0 * step)
        })
        .collect();

    println!("coordinate      analytic        fd(value)       fd(rollout)");
    let names = ["px_0", "py_0", "theta_0", "px_1", "py_1", "theta_1"];
    for c in 0..6 {
        println!(
            "{:10}  {:+.9}  {:+.9}  {:+.9}",
            names[c], analytic[c], fd_value[c], fd_rollout[c]
        );
    }
}
