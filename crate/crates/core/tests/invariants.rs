//! Cross-module invariants that sit above any single unit: the filter's
//! local continuity and the barrier's defining flow property at scale.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use maneuver_cbf::barrier::EvadingManeuver;
use maneuver_cbf::dynamics::{ControlBounds, StackedState, VehicleState};
use maneuver_cbf::safety::SafetyKind;
use maneuver_cbf::supervisor::{
    build_shared_maneuver_constraints, centralized_filter, AlphaFunction, ConstraintSet,
};

fn paper_bounds() -> ControlBounds {
    ControlBounds::new(15.0, 25.0, 13.0_f64.to_radians()).unwrap()
}

fn pair_sets() -> Vec<(&'static str, ConstraintSet)> {
    let v = 0.9 * 15.0 + 0.1 * 25.0;
    let omega = 0.9 * paper_bounds().omega_max;
    vec![
        (
            "turn",
            build_shared_maneuver_constraints(
                2,
                SafetyKind::AdjustedSqrt,
                5.0,
                0.01,
                EvadingManeuver::Turn {
                    sigmas: vec![1.1, 1.0],
                    omega,
                    speed: v,
                },
            )
            .unwrap(),
        ),
        (
            "straight",
            build_shared_maneuver_constraints(
                2,
                SafetyKind::PlainSqrt,
                5.0,
                0.01,
                EvadingManeuver::Straight {
                    speeds: vec![1.1 * v, v],
                },
            )
            .unwrap(),
        ),
    ]
}

fn sample_interior_state(rng: &mut ChaCha8Rng, cs: &ConstraintSet, margin: f64) -> StackedState {
    loop {
        let x = StackedState::new(
            (0..2)
                .map(|_| {
                    VehicleState::new(
                        rng.gen_range(-160.0..160.0),
                        rng.gen_range(-160.0..160.0),
                        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                    )
                })
                .collect(),
        );
        let ok = cs.barriers().iter().all(|b| match b.value(&x) {
            Ok((v, _)) => v >= margin,
            Err(_) => false,
        });
        if ok {
            return x;
        }
    }
}

/// Local continuity surrogate for the filter: difference quotients of the
/// filtered input over state perturbations of at most 1e-4 stay bounded.
/// The empirically calibrated constant per scenario family is printed.
#[test]
fn filter_difference_quotients_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let alpha = AlphaFunction::linear(1.0).unwrap();
    let bounds = paper_bounds();
    for (label, cs) in pair_sets() {
        let mut max_quotient: f64 = 0.0;
        for _ in 0..100 {
            let x = sample_interior_state(&mut rng, &cs, 0.5);
            let u_hat = vec![
                rng.gen_range(15.0..25.0),
                rng.gen_range(-0.22..0.22),
                rng.gen_range(15.0..25.0),
                rng.gen_range(-0.22..0.22),
            ];
            let (u_a, _) = centralized_filter(&cs, &alpha, &x, &u_hat, &bounds).unwrap();

            let mut flat = x.to_flat();
            let mut norm = 0.0f64;
            for v in flat.iter_mut() {
                let p = rng.gen_range(-1e-4..1e-4);
                *v += p;
                norm = norm.max(p.abs());
            }
            let x2 = StackedState::from_flat(&flat);
            let inside = cs.barriers().iter().all(|b| match b.value(&x2) {
                Ok((v, _)) => v >= 0.0,
                Err(_) => false,
            });
            if !inside || norm == 0.0 {
                continue;
            }
            let (u_b, _) = centralized_filter(&cs, &alpha, &x2, &u_hat, &bounds).unwrap();
            let du = u_a
                .iter()
                .zip(&u_b)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            max_quotient = max_quotient.max(du / norm);
        }
        println!("{label}: max |u*(x) - u*(x')| / |x - x'| = {max_quotient:.3}");
        assert!(
            max_quotient.is_finite() && max_quotient < 1e4,
            "{label}: unbounded difference quotient {max_quotient}"
        );
    }
}

/// The defining property of the construction, at fuzz scale: along its own
/// maneuver the barrier cannot decrease, so the constraint row evaluated at
/// the maneuver is nonnegative on the safe set.
#[test]
fn maneuver_row_nonnegative_on_ten_thousand_safe_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    for (label, cs) in pair_sets() {
        let gamma = cs.gamma_stacked();
        let mut worst = f64::INFINITY;
        for _ in 0..5000 {
            let x = sample_interior_state(&mut rng, &cs, 0.0);
            let evals = cs.evaluate_all(&x).unwrap();
            for e in &evals {
                let along = e.lie_f
                    + e.lie_g
                        .iter()
                        .zip(&gamma)
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                worst = worst.min(along);
            }
        }
        println!("{label}: worst flow derivative {worst:.3e}");
        assert!(worst >= -1e-9, "{label}: flow derivative {worst}");
    }
}
