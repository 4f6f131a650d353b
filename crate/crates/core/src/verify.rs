//! The oracle and invariant suite behind `maneuver-cbf verify` and the
//! acceptance tests: every check pins its tolerance in code and reports
//! one pass/fail line.
//!
//! The oracles here are deliberately independent of the implementation
//! paths they check: rollout grids instead of closed forms, central
//! finite differences and a numerically integrated variational equation
//! instead of analytic gradients, and alternating-projection plus grid
//! search instead of the active-set solver.

use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::barrier::{lie_from_gradient, BarrierSpec, EvadingManeuver};
use crate::counterexample;
use crate::dynamics::{ControlBounds, ControlInput, StackedState, VehicleState};
use crate::qp::{self, QpProblem};
use crate::safety::{SafetyFnSpec, SafetyKind};
use crate::scenario::{preset, FilterMode, PRESET_NAMES};
use crate::sim;
use crate::supervisor::{
    build_shared_maneuver_constraints, centralized_filter, decentralized_filter, AlphaFunction,
    ConstraintSet,
};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub runtime: Duration,
    /// budget stated for the criterion, when one exists
    pub runtime_limit: Option<Duration>,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!(
            "criterion {} ({}): {} [{:.2}s] - {}",
            self.id,
            self.name,
            verdict,
            self.runtime.as_secs_f64(),
            self.details
        )
    }

    pub fn within_budget(&self) -> bool {
        match self.runtime_limit {
            Some(limit) => self.runtime <= limit,
            None => true,
        }
    }
}

fn paper_bounds() -> ControlBounds {
    ControlBounds::new(15.0, 25.0, 13.0_f64.to_radians()).unwrap()
}

fn base_speed() -> f64 {
    0.9 * 15.0 + 0.1 * 25.0
}

fn turn_pair_barrier(kind: SafetyKind, sigmas: Vec<f64>) -> BarrierSpec {
    let maneuver = EvadingManeuver::Turn {
        sigmas,
        omega: 0.9 * paper_bounds().omega_max,
        speed: base_speed(),
    };
    BarrierSpec::new(
        SafetyFnSpec::new(kind, 0, 1, 5.0, 0.01).unwrap(),
        std::sync::Arc::new(maneuver),
    )
    .unwrap()
}

fn straight_pair_barrier(kind: SafetyKind) -> BarrierSpec {
    let v = base_speed();
    let maneuver = EvadingManeuver::Straight {
        speeds: vec![1.01 * v, 1.02 * v],
    };
    BarrierSpec::new(
        SafetyFnSpec::new(kind, 0, 1, 5.0, 0.01).unwrap(),
        std::sync::Arc::new(maneuver),
    )
    .unwrap()
}

fn random_pair_state(rng: &mut ChaCha8Rng, span: f64) -> StackedState {
    StackedState::new(
        (0..2)
            .map(|_| {
                VehicleState::new(
                    rng.gen_range(-span..span),
                    rng.gen_range(-span..span),
                    rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                )
            })
            .collect(),
    )
}

/// Rejection-sample a two-vehicle state where the barrier is nonnegative.
fn sample_safe_pair(rng: &mut ChaCha8Rng, spec: &BarrierSpec, span: f64) -> StackedState {
    for _ in 0..1_000_000 {
        let x = random_pair_state(rng, span);
        if let Ok((v, _)) = spec.value(&x) {
            if v >= 0.0 {
                return x;
            }
        }
    }
    panic!("safe-state sampling failed");
}

/// Rejection-sample a k-vehicle state inside the joint safe set.
fn sample_safe_stack(rng: &mut ChaCha8Rng, cs: &ConstraintSet, span: f64) -> StackedState {
    'outer: for _ in 0..1_000_000 {
        let x = StackedState::new(
            (0..cs.k())
                .map(|_| {
                    VehicleState::new(
                        rng.gen_range(-span..span),
                        rng.gen_range(-span..span),
                        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                    )
                })
                .collect(),
        );
        for b in cs.barriers() {
            match b.value(&x) {
                Ok((v, _)) if v >= 0.0 => {}
                _ => continue 'outer,
            }
        }
        return x;
    }
    panic!("safe-stack sampling failed");
}

/// Central finite differences of a scalar state function.
fn fd_gradient(f: &dyn Fn(&StackedState) -> f64, x: &StackedState, step: f64) -> Vec<f64> {
    let flat = x.to_flat();
    (0..flat.len())
        .map(|c| {
            let mut hi = flat.clone();
            let mut lo = flat.clone();
            hi[c] += step;
            lo[c] -= step;
            (f(&StackedState::from_flat(&hi)) - f(&StackedState::from_flat(&lo))) / (2.0 * step)
        })
        .collect()
}

fn max_rel_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-9);
    analytic
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max)
}

/// Gradient of the barrier by the sensitivity route: integrate the
/// variational equation of the maneuver flow to the minimizing time and
/// compose with the safety-function gradient there.
fn variational_gradient(spec: &BarrierSpec, x: &StackedState, tau_star: f64) -> Vec<f64> {
    let k = x.len();
    let inputs = spec.maneuver.inputs();
    let steps = ((tau_star / 1e-3).ceil() as usize).max(10);
    let dt = tau_star / steps as f64;

    // Per-vehicle augmented system: pose plus its 3x3 sensitivity.
    let mut poses: Vec<[f64; 3]> = x
        .vehicles()
        .iter()
        .map(|v| [v.px, v.py, v.theta])
        .collect();
    let mut jacobians: Vec<[f64; 9]> =
        vec![[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]; k];

    let deriv = |pose: &[f64; 3], jac: &[f64; 9], u: &ControlInput| -> ([f64; 3], [f64; 9]) {
        let (sin_t, cos_t) = pose[2].sin_cos();
        let dpose = [u.v * cos_t, u.v * sin_t, u.omega];
        // dJ/dt = A J with A having only the theta column populated.
        let mut djac = [0.0; 9];
        for c in 0..3 {
            djac[c] = -u.v * sin_t * jac[6 + c];
            djac[3 + c] = u.v * cos_t * jac[6 + c];
        }
        (dpose, djac)
    };

    if tau_star > 0.0 {
        for _ in 0..steps {
            for l in 0..k {
                let u = &inputs[l];
                let (p0, j0) = (poses[l], jacobians[l]);
                let (kp1, kj1) = deriv(&p0, &j0, u);
                let half = |p: &[f64; 3], j: &[f64; 9], dp: &[f64; 3], dj: &[f64; 9], h: f64| {
                    let mut p2 = *p;
                    let mut j2 = *j;
                    for c in 0..3 {
                        p2[c] += h * dp[c];
                    }
                    for c in 0..9 {
                        j2[c] += h * dj[c];
                    }
                    (p2, j2)
                };
                let (p1, j1) = half(&p0, &j0, &kp1, &kj1, dt / 2.0);
                let (kp2, kj2) = deriv(&p1, &j1, u);
                let (p2, j2) = half(&p0, &j0, &kp2, &kj2, dt / 2.0);
                let (kp3, kj3) = deriv(&p2, &j2, u);
                let (p3, j3) = half(&p0, &j0, &kp3, &kj3, dt);
                let (kp4, kj4) = deriv(&p3, &j3, u);
                for c in 0..3 {
                    poses[l][c] =
                        p0[c] + dt * (kp1[c] + 2.0 * kp2[c] + 2.0 * kp3[c] + kp4[c]) / 6.0;
                }
                for c in 0..9 {
                    jacobians[l][c] =
                        j0[c] + dt * (kj1[c] + 2.0 * kj2[c] + 2.0 * kj3[c] + kj4[c]) / 6.0;
                }
            }
        }
    }

    let propagated = StackedState::new(
        poses
            .iter()
            .map(|p| VehicleState::new(p[0], p[1], p[2]))
            .collect(),
    );
    let rho_grad = spec.safety.rho_gradient(&propagated).unwrap();
    let mut out = vec![0.0; 3 * k];
    for l in 0..k {
        let j = &jacobians[l];
        for m in 0..3 {
            out[3 * l + m] = rho_grad[3 * l] * j[m]
                + rho_grad[3 * l + 1] * j[3 + m]
                + rho_grad[3 * l + 2] * j[6 + m];
        }
    }
    out
}

/// Supremum of a barrier row `L_f h + L_g h u + alpha(h)` over the box U.
fn row_supremum(lie_f: f64, lie_g: &[f64], alpha_h: f64, bounds: &ControlBounds) -> f64 {
    let mut sup = lie_f + alpha_h;
    for l in 0..lie_g.len() / 2 {
        let cv = lie_g[2 * l];
        let cw = lie_g[2 * l + 1];
        sup += (cv * bounds.v_min).max(cv * bounds.v_max);
        sup += cw.abs() * bounds.omega_max;
    }
    sup
}

/// Criterion 1: the raw separation constraint fails as a barrier under
/// actuator limits; the supremum of its constraint row at the boundary
/// configuration equals -4 D_s v_min exactly.
pub fn criterion_1() -> CriterionReport {
    let start = Instant::now();
    let bounds = paper_bounds();
    let d_s = 5.0;
    let x = StackedState::new(vec![
        VehicleState::new(-d_s / 2.0, 0.0, 0.0),
        VehicleState::new(d_s / 2.0, 0.0, std::f64::consts::PI),
    ]);
    let spec = SafetyFnSpec::new(SafetyKind::EuclideanSq, 0, 1, d_s, 0.0).unwrap();
    let rho = spec.rho(&x).unwrap();
    let grad = spec.rho_gradient(&x).unwrap();
    let (lie_f, lie_g) = lie_from_gradient(&x, &grad);
    // rho = 0 at this configuration, so any class-K term vanishes.
    let sup = row_supremum(lie_f, &lie_g, rho, &bounds);
    let expected = -4.0 * d_s * bounds.v_min;
    let error = (sup - expected).abs();
    let passed = error <= 1e-9 && rho.abs() <= 1e-12;
    CriterionReport {
        id: 1,
        name: "euclidean candidate failure",
        passed,
        details: format!("sup = {sup:.9}, expected {expected}, |error| = {error:.3e}"),
        runtime: start.elapsed(),
        runtime_limit: Some(Duration::from_millis(1)),
    }
}

/// Criterion 2: closed forms against the rollout oracle, 1000 random safe
/// states per maneuver family, both safety variants of each family.
pub fn criterion_2() -> CriterionReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    let period = 2.0 * std::f64::consts::PI / (0.9 * paper_bounds().omega_max);

    let mut max_turn: f64 = 0.0;
    let turn_sq = turn_pair_barrier(SafetyKind::AdjustedSq, vec![1.0, 1.0]);
    let turn_sqrt = turn_pair_barrier(SafetyKind::AdjustedSqrt, vec![1.0, 1.0]);
    for _ in 0..1000 {
        let x = sample_safe_pair(&mut rng, &turn_sq, 150.0);
        for spec in [&turn_sq, &turn_sqrt] {
            let (value, _) = spec.value(&x).unwrap();
            let oracle = spec.rollout_infimum(&x, period, 1e-4 * period).unwrap();
            max_turn = max_turn.max((value - oracle).abs());
        }
    }

    let mut max_straight: f64 = 0.0;
    let straight_sq = straight_pair_barrier(SafetyKind::EuclideanSq);
    let straight_sqrt = straight_pair_barrier(SafetyKind::PlainSqrt);
    for _ in 0..1000 {
        let x = sample_safe_pair(&mut rng, &straight_sq, 150.0);
        for spec in [&straight_sq, &straight_sqrt] {
            let (value, _) = spec.value(&x).unwrap();
            let horizon = spec.suggested_horizon(&x).unwrap();
            let oracle = spec.rollout_infimum(&x, horizon, 1e-4 * horizon).unwrap();
            max_straight = max_straight.max((value - oracle).abs());
        }
    }

    let passed = max_turn <= 1e-4 && max_straight <= 1e-6;
    CriterionReport {
        id: 2,
        name: "closed form vs rollout oracle",
        passed,
        details: format!(
            "max |closed - oracle|: turn {max_turn:.3e} (<= 1e-4), straight {max_straight:.3e} (<= 1e-6)"
        ),
        runtime: start.elapsed(),
        runtime_limit: Some(Duration::from_secs(10)),
    }
}

/// Criterion 3: analytic gradients against central finite differences and
/// the variational-equation oracle.
pub fn criterion_3() -> CriterionReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3030);
    let turn = turn_pair_barrier(SafetyKind::AdjustedSqrt, vec![1.1, 1.0]);
    let straight = straight_pair_barrier(SafetyKind::PlainSqrt);

    let mut max_fd: f64 = 0.0;
    for spec in [&turn, &straight] {
        for _ in 0..500 {
            let x = sample_safe_pair(&mut rng, spec, 150.0);
            let analytic = spec.gradient(&x).unwrap();
            let fd = fd_gradient(&|s| spec.value(s).unwrap().0, &x, 1e-6);
            max_fd = max_fd.max(max_rel_error(&analytic, &fd));
        }
    }

    let mut max_var: f64 = 0.0;
    for spec in [&turn, &straight] {
        for _ in 0..100 {
            let x = sample_safe_pair(&mut rng, spec, 150.0);
            let analytic = spec.gradient(&x).unwrap();
            let (_, tau_star) = spec.value(&x).unwrap();
            let oracle = variational_gradient(spec, &x, tau_star);
            max_var = max_var.max(max_rel_error(&analytic, &oracle));
        }
    }

    let passed = max_fd <= 1e-4 && max_var <= 1e-6;
    CriterionReport {
        id: 3,
        name: "gradient formula",
        passed,
        details: format!(
            "rel error vs finite differences {max_fd:.3e} (<= 1e-4), vs variational oracle {max_var:.3e} (<= 1e-6)"
        ),
        runtime: start.elapsed(),
        runtime_limit: Some(Duration::from_secs(30)),
    }
}

/// Criterion 4: the three-vehicle demonstration.
pub fn criterion_4() -> CriterionReport {
    let start = Instant::now();
    let report = counterexample::run();
    let facts = report.facts();
    CriterionReport {
        id: 4,
        name: "three-vehicle counterexample",
        passed: report.all_facts_hold(),
        details: format!(
            "h zeros {}, coefficients {} (error {:.3e}), joint infeasibility {}, shared feasibility {}",
            facts[0], facts[1], report.coefficient_error, facts[2], facts[3]
        ),
        runtime: start.elapsed(),
        runtime_limit: Some(Duration::from_secs(30)),
    }
}

/// One fuzzed decentralized-vs-centralized comparison.
struct FuzzOutcome {
    min_gamma_slack: f64,
    min_centralized_slack: f64,
    /// decentralized total deviation minus centralized deviation
    conservatism_gap: f64,
}

fn constraint_sets_for(k: usize) -> Vec<ConstraintSet> {
    let v = base_speed();
    let turn = build_shared_maneuver_constraints(
        k,
        SafetyKind::AdjustedSqrt,
        5.0,
        0.01,
        EvadingManeuver::Turn {
            sigmas: (0..k).map(|i| 1.0 + 0.02 * i as f64).collect(),
            omega: 0.9 * paper_bounds().omega_max,
            speed: v,
        },
    )
    .unwrap();
    let straight = build_shared_maneuver_constraints(
        k,
        SafetyKind::PlainSqrt,
        5.0,
        0.01,
        EvadingManeuver::Straight {
            speeds: (1..=k).map(|i| (1.0 + 0.01 * i as f64) * v).collect(),
        },
    )
    .unwrap();
    vec![turn, straight]
}

fn fuzz_one(
    rng: &mut ChaCha8Rng,
    cs: &ConstraintSet,
    alpha: &AlphaFunction,
    bounds: &ControlBounds,
    span: f64,
) -> FuzzOutcome {
    let x = sample_safe_stack(rng, cs, span);
    let k = cs.k();
    let gamma = cs.gamma_stacked();
    let evals = cs.evaluate_all(&x).unwrap();

    let mut min_gamma_slack = f64::INFINITY;
    for (j, e) in evals.iter().enumerate() {
        let (a, b) = cs.zeta(j);
        for i in [a, b] {
            let slack = cs.decentralized_slack(
                alpha,
                j,
                e,
                i,
                ControlInput::new(gamma[2 * i], gamma[2 * i + 1]),
            );
            min_gamma_slack = min_gamma_slack.min(slack);
        }
    }

    let u_hat: Vec<ControlInput> = (0..k)
        .map(|_| {
            ControlInput::new(
                rng.gen_range(bounds.v_min..bounds.v_max),
                rng.gen_range(-bounds.omega_max..bounds.omega_max),
            )
        })
        .collect();

    let mut stacked = Vec::with_capacity(2 * k);
    let mut dec_deviation = 0.0;
    for (i, nominal) in u_hat.iter().enumerate() {
        let (u, _) = decentralized_filter(cs, alpha, &x, *nominal, i, bounds).unwrap();
        dec_deviation +=
            (u.v - nominal.v) * (u.v - nominal.v) + (u.omega - nominal.omega) * (u.omega - nominal.omega);
        stacked.push(u.v);
        stacked.push(u.omega);
    }

    let mut min_centralized_slack = f64::INFINITY;
    for e in &evals {
        min_centralized_slack =
            min_centralized_slack.min(cs.centralized_slack(alpha, e, &stacked));
    }

    let mut u_hat_flat = Vec::with_capacity(2 * k);
    for u in &u_hat {
        u_hat_flat.push(u.v);
        u_hat_flat.push(u.omega);
    }
    let (u_central, _) = centralized_filter(cs, alpha, &x, &u_hat_flat, bounds).unwrap();
    let cen_deviation: f64 = u_central
        .iter()
        .zip(&u_hat_flat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();

    FuzzOutcome {
        min_gamma_slack,
        min_centralized_slack,
        conservatism_gap: dec_deviation - cen_deviation,
    }
}

fn run_fuzz(seed: u64) -> (Vec<FuzzOutcome>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = AlphaFunction::linear(1.0).unwrap();
    let bounds = paper_bounds();
    let mut outcomes = Vec::with_capacity(10_000);
    let mut states = 0;
    for (k, count) in [(2usize, 4000usize), (3, 3000), (5, 3000)] {
        let sets = constraint_sets_for(k);
        for n in 0..count {
            let cs = &sets[n % sets.len()];
            outcomes.push(fuzz_one(&mut rng, cs, &alpha, &bounds, 90.0 * k as f64));
            states += 1;
        }
    }
    (outcomes, states)
}

/// Criterion 5: on fuzzed safe states, the shared maneuver satisfies every
/// strengthened row, and stacked per-vehicle solutions satisfy every
/// centralized row.
pub fn criterion_5() -> CriterionReport {
    let start = Instant::now();
    let (outcomes, states) = run_fuzz(5050);
    let worst_gamma = outcomes
        .iter()
        .map(|o| o.min_gamma_slack)
        .fold(f64::INFINITY, f64::min);
    let worst_central = outcomes
        .iter()
        .map(|o| o.min_centralized_slack)
        .fold(f64::INFINITY, f64::min);
    let passed = worst_gamma >= -1e-9 && worst_central >= -1e-8;
    CriterionReport {
        id: 5,
        name: "decentralized soundness",
        passed,
        details: format!(
            "{states} states; worst maneuver row slack {worst_gamma:.3e} (>= -1e-9), worst centralized row slack under stacked decentralized solutions {worst_central:.3e} (>= -1e-8)"
        ),
        runtime: start.elapsed(),
        runtime_limit: Some(Duration::from_secs(60)),
    }
}

/// Criterion 6: the four presets complete in both filter modes with every
/// pairwise distance at or above D_s and every actuator sample inside the
/// box; the 20-vehicle decentralized run finishes inside its budget.
pub fn criterion_6() -> CriterionReport {
    let start = Instant::now();
    let mut details = String::new();
    let mut passed = true;
    let mut big_decentralized_wall = 0.0f64;
    for name in PRESET_NAMES {
        for mode in [FilterMode::Centralized, FilterMode::Decentralized] {
            let mut cfg = preset(name).unwrap();
            cfg.mode = mode;
            let result = match sim::run(&cfg) {
                Ok(r) => r,
                Err(e) => {
                    passed = false;
                    details.push_str(&format!("{name}/{mode}: construction failed: {e}; "));
                    continue;
                }
            };
            let mut ok = result.summary.error.is_none()
                && result.summary.min_pair_distance >= cfg.d_s
                && result.summary.actuator_violation_count == 0
                && result.summary.min_h >= -1e-4;
            for r in &result.records {
                for u in &r.applied {
                    if !cfg.bounds.contains(*u, 1e-6) {
                        ok = false;
                    }
                }
            }
            if name.contains("20veh") && mode == FilterMode::Decentralized {
                big_decentralized_wall = big_decentralized_wall.max(result.summary.wall_time);
            }
            if !ok {
                passed = false;
            }
            details.push_str(&format!(
                "{name}/{mode}: min_d {:.3}, min_h {:.2e}, {}; ",
                result.summary.min_pair_distance,
                result.summary.min_h,
                if ok { "ok" } else { "VIOLATION" }
            ));
        }
    }
    if big_decentralized_wall > 120.0 {
        passed = false;
        details.push_str(&format!(
            "20-vehicle decentralized wall time {big_decentralized_wall:.1}s exceeds 120s; "
        ));
    }
    CriterionReport {
        id: 6,
        name: "forward invariance at desk scale",
        passed,
        details,
        runtime: start.elapsed(),
        runtime_limit: None,
    }
}

/// Alternating-projection (Dykstra) computation of the Euclidean
/// projection of `u_hat` onto the halfspace intersection.
fn dykstra_projection(g: &[Vec<f64>], d: &[f64], u_hat: &[f64]) -> Vec<f64> {
    let r = g.len();
    let m = u_hat.len();
    let mut u = u_hat.to_vec();
    let mut corrections = vec![vec![0.0; m]; r];
    let norms_sq: Vec<f64> = g.iter().map(|row| qp::dot(row, row)).collect();
    for _ in 0..50_000 {
        let mut moved = 0.0f64;
        for i in 0..r {
            let y: Vec<f64> = u
                .iter()
                .zip(&corrections[i])
                .map(|(a, b)| a + b)
                .collect();
            let resid = qp::dot(&g[i], &y) - d[i];
            let proj: Vec<f64> = if resid >= 0.0 || norms_sq[i] == 0.0 {
                y.clone()
            } else {
                y.iter()
                    .zip(&g[i])
                    .map(|(a, gi)| a - resid / norms_sq[i] * gi)
                    .collect()
            };
            for c in 0..m {
                corrections[i][c] = y[c] - proj[c];
                moved = moved.max((u[c] - proj[c]).abs());
                u[c] = proj[c];
            }
        }
        if moved < 1e-13 {
            break;
        }
    }
    u
}

/// Criterion 7: active-set solutions match the projection oracle on random
/// feasible problems, and certified-infeasible problems are all flagged.
pub fn criterion_7() -> CriterionReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7070);
    let mut max_mismatch: f64 = 0.0;
    let mut grid_beats = 0usize;
    for _ in 0..1000 {
        let m = rng.gen_range(1..=4);
        let r = rng.gen_range(1..=12);
        let interior: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut g: Vec<Vec<f64>> = Vec::new();
        let mut d = Vec::new();
        for _ in 0..r {
            let row: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            d.push(qp::dot(&row, &interior) - rng.gen_range(0.05..2.0));
            g.push(row);
        }
        let u_hat: Vec<f64> = (0..m).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let problem = QpProblem::new(u_hat.clone(), g.clone(), d.clone());
        let sol = qp::solve(&problem).expect("feasible by construction");

        let oracle = dykstra_projection(&g, &d, &u_hat);
        for (a, b) in sol.u_star.iter().zip(&oracle) {
            max_mismatch = max_mismatch.max((a - b).abs());
        }

        // Coarse grid sanity: no feasible grid point may beat the solution.
        let objective = |u: &[f64]| -> f64 {
            u.iter()
                .zip(&u_hat)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        let half_width = u_hat
            .iter()
            .zip(&interior)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
            + 2.0;
        let n = 9usize;
        let mut idx = vec![0usize; m];
        let best_obj = sol.u_star.iter().zip(&u_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        'grid: loop {
            let point: Vec<f64> = (0..m)
                .map(|c| interior[c] - half_width + 2.0 * half_width * idx[c] as f64 / (n - 1) as f64)
                .collect();
            let feasible = (0..g.len()).all(|i| qp::dot(&g[i], &point) >= d[i]);
            if feasible && objective(&point) < best_obj - 1e-9 {
                grid_beats += 1;
            }
            let mut c = 0;
            loop {
                idx[c] += 1;
                if idx[c] < n {
                    break;
                }
                idx[c] = 0;
                c += 1;
                if c == m {
                    break 'grid;
                }
            }
        }
    }

    let mut false_negatives = 0usize;
    for _ in 0..200 {
        let m = rng.gen_range(1..=4);
        let r = rng.gen_range(2..=8);
        let mut g: Vec<Vec<f64>> = Vec::new();
        let mut lambda: Vec<f64> = Vec::new();
        for _ in 0..r - 1 {
            g.push((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect());
            lambda.push(rng.gen_range(0.2..2.0));
        }
        let last_lambda = rng.gen_range(0.2..2.0);
        let mut last = vec![0.0; m];
        for (row, l) in g.iter().zip(&lambda) {
            for c in 0..m {
                last[c] -= l * row[c] / last_lambda;
            }
        }
        g.push(last);
        lambda.push(last_lambda);
        let mut d: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cur: f64 = lambda.iter().zip(&d).map(|(l, v)| l * v).sum();
        let norm: f64 = lambda.iter().map(|l| l * l).sum();
        for (v, l) in d.iter_mut().zip(&lambda) {
            *v += (1.0 - cur) * l / norm;
        }
        let u_hat: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        if !matches!(
            qp::solve(&QpProblem::new(u_hat, g, d)),
            Err(qp::QpError::Infeasible { .. })
        ) {
            false_negatives += 1;
        }
    }

    let passed = max_mismatch <= 1e-6 && grid_beats == 0 && false_negatives == 0;
    CriterionReport {
        id: 7,
        name: "qp solver oracle equivalence",
        passed,
        details: format!(
            "1000 feasible problems: max |u* - projection| {max_mismatch:.3e} (<= 1e-6), grid improvements {grid_beats}; 200 certified-infeasible problems: false negatives {false_negatives}"
        ),
        runtime: start.elapsed(),
        runtime_limit: Some(Duration::from_secs(30)),
    }
}

/// Criterion 8: decentralized solves never beat the centralized deviation,
/// and a boundary state exhibits a strictly positive conservatism gap.
pub fn criterion_8() -> CriterionReport {
    let start = Instant::now();
    let (outcomes, states) = run_fuzz(5050);
    let worst_gap = outcomes
        .iter()
        .map(|o| o.conservatism_gap)
        .fold(f64::INFINITY, f64::min);

    // Boundary contrast: head-on pair close to h = 0 with an aggressive
    // nominal; the per-vehicle programs must both brake where the stacked
    // program can split the correction.
    let alpha = AlphaFunction::linear(1.0).unwrap();
    let bounds = paper_bounds();
    let cs = &constraint_sets_for(2)[0];
    let gap_at_boundary;
    let mut gap = 400.0;
    loop {
        let x = StackedState::new(vec![
            VehicleState::new(-gap / 2.0, 0.0, 0.0),
            VehicleState::new(gap / 2.0, 0.0, std::f64::consts::PI),
        ]);
        let h = cs.evaluate_all(&x).unwrap()[0].h;
        if h < 0.0 {
            gap += 1.0;
            continue;
        }
        if h <= 2.0 {
            let u_hat = [
                ControlInput::new(25.0, 0.0),
                ControlInput::new(25.0, 0.0),
            ];
            let mut stacked_dev = 0.0;
            for (i, nominal) in u_hat.iter().enumerate() {
                let (u, _) = decentralized_filter(cs, &alpha, &x, *nominal, i, &bounds).unwrap();
                stacked_dev += (u.v - nominal.v).powi(2) + (u.omega - nominal.omega).powi(2);
            }
            let flat = [25.0, 0.0, 25.0, 0.0];
            let (u_c, _) = centralized_filter(cs, &alpha, &x, &flat, &bounds).unwrap();
            let cen_dev: f64 = u_c
                .iter()
                .zip(&flat)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            gap_at_boundary = stacked_dev - cen_dev;
            break;
        }
        gap -= 1.0;
    }

    let strict = outcomes
        .iter()
        .map(|o| o.conservatism_gap)
        .fold(gap_at_boundary, f64::max);
    let passed = worst_gap >= -1e-8 && strict >= 1e-3;
    CriterionReport {
        id: 8,
        name: "decentralized conservatism",
        passed,
        details: format!(
            "{states} fuzzed states; worst deviation gap {worst_gap:.3e} (>= -1e-8), largest strict gap {strict:.3e} (>= 1e-3, boundary contrast {gap_at_boundary:.3e})"
        ),
        runtime: start.elapsed(),
        runtime_limit: None,
    }
}

/// Run the whole suite in order, reporting each criterion as it finishes.
pub fn run_all(mut progress: impl FnMut(&CriterionReport)) -> Vec<CriterionReport> {
    let criteria: [fn() -> CriterionReport; 8] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
    ];
    let mut reports = Vec::with_capacity(criteria.len());
    for run in criteria {
        let report = run();
        progress(&report);
        reports.push(report);
    }
    reports
}
