//! Fixed-step batch simulation: snapshot the state, compute nominal
//! inputs, apply the configured safety filter, integrate, log.
//!
//! The loop is deterministic: no randomness, fixed step, and in
//! decentralized mode the per-vehicle solves run over one immutable
//! snapshot and are joined in vehicle order regardless of thread count.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use crate::dynamics::{integrate_rk4, ControlBounds, ControlInput, StackedState, VehicleState};
use crate::safety::pair_distance_sq;
use crate::scenario::{
    build_circle_scenario, nominal_controller, FilterMode, GoalSpec, ScenarioConfig, ScenarioError,
};
use crate::supervisor::{
    admissible_membership, centralized_filter, decentralized_filter, AlphaFunction, ConstraintSet,
    SupervisorError, MEMBERSHIP_TOL,
};

/// Offset-point distance of the nominal go-to-goal law [m].
const NOMINAL_LAMBDA: f64 = 1.0;

/// One logged timestep.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: f64,
    pub poses: Vec<VehicleState>,
    pub nominal: Vec<ControlInput>,
    pub applied: Vec<ControlInput>,
    /// pairwise distances [m], in constraint order
    pub pair_distances: Vec<f64>,
    /// barrier values, in constraint order
    pub h_values: Vec<f64>,
    /// per-vehicle QP iteration counts; in centralized mode every vehicle
    /// carries the single stacked solve's count
    pub qp_iterations: Vec<usize>,
    /// the evading maneuver replaced an infeasible QP output this step
    pub fallback_applied: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub min_pair_distance: f64,
    pub min_h: f64,
    pub actuator_violation_count: usize,
    pub infeasible_count: usize,
    pub wall_time: f64,
    pub steps: usize,
    /// present when the run aborted early; partial logs are kept
    pub error: Option<String>,
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "steps                    = {}", self.steps)?;
        writeln!(f, "min_pair_distance [m]    = {:.6}", self.min_pair_distance)?;
        writeln!(f, "min_h                    = {:.6e}", self.min_h)?;
        writeln!(f, "actuator_violations      = {}", self.actuator_violation_count)?;
        writeln!(f, "infeasible_steps         = {}", self.infeasible_count)?;
        writeln!(f, "wall_time [s]            = {:.3}", self.wall_time)?;
        match &self.error {
            Some(e) => writeln!(f, "aborted                  = {e}"),
            None => writeln!(f, "aborted                  = no"),
        }
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
}

/// Worker threads for the decentralized fan-out: `CBF_THREADS` when set,
/// otherwise the logical core count.
pub fn worker_threads() -> usize {
    std::env::var("CBF_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|n| *n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn solve_decentralized_all(
    cs: &ConstraintSet,
    alpha: &AlphaFunction,
    x: &StackedState,
    nominal: &[ControlInput],
    bounds: &ControlBounds,
    threads: usize,
) -> Vec<Result<(ControlInput, usize), SupervisorError>> {
    let k = cs.k();
    if threads <= 1 || k < 4 {
        return (0..k)
            .map(|i| decentralized_filter(cs, alpha, x, nominal[i], i, bounds))
            .collect();
    }
    let mut results: Vec<Option<Result<(ControlInput, usize), SupervisorError>>> = Vec::new();
    results.resize_with(k, || None);
    let chunk = k.div_ceil(threads);
    std::thread::scope(|scope| {
        for (c, slots) in results.chunks_mut(chunk).enumerate() {
            scope.spawn(move || {
                for (off, slot) in slots.iter_mut().enumerate() {
                    let i = c * chunk + off;
                    *slot = Some(decentralized_filter(cs, alpha, x, nominal[i], i, bounds));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("worker filled slot")).collect()
}

/// Run a scenario to `t_end` (or to the first unrecoverable filter error).
///
/// Construction failures (invalid config, unsafe start) are hard errors;
/// mid-run filter errors abort the loop and are recorded in the summary
/// next to whatever was logged.
pub fn run(cfg: &ScenarioConfig) -> Result<RunResult, ScenarioError> {
    let (state0, goals) = build_circle_scenario(cfg)?;
    let cs = cfg.constraint_set()?;
    run_from(cfg, &cs, state0, &goals)
}

/// Simulation loop over an explicit initial state and goal set.
pub fn run_from(
    cfg: &ScenarioConfig,
    cs: &ConstraintSet,
    state0: StackedState,
    goals: &GoalSpec,
) -> Result<RunResult, ScenarioError> {
    cfg.validate()?;
    let start = Instant::now();
    let threads = worker_threads();
    let k = cfg.k;
    let steps = (cfg.t_end / cfg.dt + 1e-9).floor() as usize;
    let gamma = cs.maneuver().inputs();

    let mut records: Vec<StepRecord> = Vec::with_capacity(steps + 1);
    let mut infeasible_count = 0usize;
    let mut error: Option<String> = None;
    let mut x = state0;

    'steps: for step in 0..=steps {
        let t = step as f64 * cfg.dt;

        // Snapshot-derived telemetry; this is also where departure from the
        // safe set is detected.
        let mut h_values = Vec::with_capacity(cs.q());
        let mut pair_distances = Vec::with_capacity(cs.q());
        for (j, barrier) in cs.barriers().iter().enumerate() {
            let (i, l) = cs.zeta(j);
            pair_distances.push(pair_distance_sq(&x, i, l).sqrt());
            match barrier.value(&x) {
                Ok((h, _)) => {
                    if h < crate::supervisor::UNSAFE_TOL {
                        error = Some(format!(
                            "t = {t:.3}: {}",
                            SupervisorError::UnsafeState { constraint: j, h }
                        ));
                        break 'steps;
                    }
                    h_values.push(h);
                }
                Err(e) => {
                    error = Some(format!("t = {t:.3}: {e}"));
                    break 'steps;
                }
            }
        }

        let nominal: Vec<ControlInput> = (0..k)
            .map(|i| nominal_controller(x.vehicle(i), goals.goals[i], &cfg.bounds, NOMINAL_LAMBDA))
            .collect();

        let mut fallback_applied = false;
        let (applied, qp_iterations) = match cfg.mode {
            FilterMode::Centralized => {
                let mut u_hat = Vec::with_capacity(2 * k);
                for u in &nominal {
                    u_hat.push(u.v);
                    u_hat.push(u.omega);
                }
                match centralized_filter(cs, &cfg.alpha, &x, &u_hat, &cfg.bounds) {
                    Ok((u, iters)) => {
                        let applied: Vec<ControlInput> = (0..k)
                            .map(|i| ControlInput::new(u[2 * i], u[2 * i + 1]))
                            .collect();
                        (applied, vec![iters; k])
                    }
                    Err(SupervisorError::Infeasible { .. }) if cfg.fallback_maneuver => {
                        infeasible_count += 1;
                        fallback_applied = true;
                        (gamma.clone(), vec![0; k])
                    }
                    Err(e) => {
                        error = Some(format!("t = {t:.3}: {e}"));
                        break 'steps;
                    }
                }
            }
            FilterMode::Decentralized => {
                let results =
                    solve_decentralized_all(cs, &cfg.alpha, &x, &nominal, &cfg.bounds, threads);
                let mut applied = Vec::with_capacity(k);
                let mut iters = Vec::with_capacity(k);
                for (i, res) in results.into_iter().enumerate() {
                    match res {
                        Ok((u, it)) => {
                            applied.push(u);
                            iters.push(it);
                        }
                        Err(SupervisorError::Infeasible { .. }) if cfg.fallback_maneuver => {
                            infeasible_count += 1;
                            fallback_applied = true;
                            applied.push(gamma[i]);
                            iters.push(0);
                        }
                        Err(e) => {
                            error = Some(format!("t = {t:.3}: {e}"));
                            break 'steps;
                        }
                    }
                }
                (applied, iters)
            }
        };

        records.push(StepRecord {
            t,
            poses: x.vehicles().to_vec(),
            nominal,
            applied: applied.clone(),
            pair_distances,
            h_values,
            qp_iterations,
            fallback_applied,
        });

        if step < steps {
            x = integrate_rk4(&x, &applied, cfg.dt);
        }
    }

    let summary = summarize(&records, infeasible_count, &cfg.bounds, start.elapsed().as_secs_f64(), error);
    Ok(RunResult { records, summary })
}

fn summarize(
    records: &[StepRecord],
    infeasible_count: usize,
    bounds: &ControlBounds,
    wall_time: f64,
    error: Option<String>,
) -> RunSummary {
    let mut min_pair_distance = f64::INFINITY;
    let mut min_h = f64::INFINITY;
    let mut actuator_violation_count = 0;
    for r in records {
        for d in &r.pair_distances {
            min_pair_distance = min_pair_distance.min(*d);
        }
        for h in &r.h_values {
            min_h = min_h.min(*h);
        }
        for u in &r.applied {
            if !bounds.contains(*u, 1e-6) {
                actuator_violation_count += 1;
            }
        }
    }
    RunSummary {
        min_pair_distance,
        min_h,
        actuator_violation_count,
        infeasible_count,
        wall_time,
        steps: records.len().saturating_sub(1),
        error,
    }
}

/// One rule broken by one logged record.
#[derive(Debug, Clone, PartialEq)]
pub enum AuditViolation {
    Actuator { t: f64, vehicle: usize },
    CentralizedRow { t: f64, constraint: usize },
    DecentralizedRow { t: f64, constraint: usize, vehicle: usize },
}

#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn actuator_count(&self) -> usize {
        self.violations
            .iter()
            .filter(|v| matches!(v, AuditViolation::Actuator { .. }))
            .count()
    }
}

/// Re-check every logged applied input against the admissible-set
/// definitions. Decentralized rows are audited only for decentralized
/// runs; the centralized rows must hold in either mode.
pub fn audit(
    cs: &ConstraintSet,
    alpha: &AlphaFunction,
    bounds: &ControlBounds,
    mode: FilterMode,
    records: &[StepRecord],
) -> AuditReport {
    let mut report = AuditReport::default();
    for r in records {
        let x = StackedState::new(r.poses.clone());
        let mut u = Vec::with_capacity(2 * r.applied.len());
        for a in &r.applied {
            u.push(a.v);
            u.push(a.omega);
        }
        if r.fallback_applied {
            // The maneuver override is admissible by construction but not
            // the QP output; skip row checks, still check the box.
            for (i, a) in r.applied.iter().enumerate() {
                if !bounds.contains(*a, MEMBERSHIP_TOL) {
                    report
                        .violations
                        .push(AuditViolation::Actuator { t: r.t, vehicle: i });
                }
            }
            continue;
        }
        let membership = match admissible_membership(cs, alpha, &x, &u, bounds) {
            Ok(m) => m,
            Err(_) => continue,
        };
        for (i, ok) in membership.actuator_ok.iter().enumerate() {
            if !ok {
                report
                    .violations
                    .push(AuditViolation::Actuator { t: r.t, vehicle: i });
            }
        }
        for (j, ok) in membership.centralized_rows.iter().enumerate() {
            if !ok {
                report
                    .violations
                    .push(AuditViolation::CentralizedRow { t: r.t, constraint: j });
            }
        }
        if mode == FilterMode::Decentralized {
            for (j, pair) in membership.decentralized_rows.iter().enumerate() {
                for (vehicle, ok) in pair {
                    if !ok {
                        report.violations.push(AuditViolation::DecentralizedRow {
                            t: r.t,
                            constraint: j,
                            vehicle: *vehicle,
                        });
                    }
                }
            }
        }
    }
    report
}

/// Write the per-vehicle trajectory log. One row per record per vehicle.
pub fn write_trajectory_csv(path: &Path, records: &[StepRecord]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "t,vehicle,px,py,theta,v_nom,omega_nom,v_cmd,omega_cmd,qp_iterations,fallback"
    )?;
    for r in records {
        for (i, pose) in r.poses.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                i,
                pose.px,
                pose.py,
                pose.theta,
                r.nominal[i].v,
                r.nominal[i].omega,
                r.applied[i].v,
                r.applied[i].omega,
                r.qp_iterations[i],
                r.fallback_applied as u8
            )?;
        }
    }
    out.flush()
}

/// Write the pairwise metrics log. One row per record per constraint.
pub fn write_pairs_csv(
    path: &Path,
    cs: &ConstraintSet,
    records: &[StepRecord],
) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "t,i,j,distance,h")?;
    for r in records {
        for jdx in 0..r.pair_distances.len() {
            let (i, j) = cs.zeta(jdx);
            writeln!(
                out,
                "{},{},{},{},{}",
                r.t, i, j, r.pair_distances[jdx], r.h_values[jdx]
            )?;
        }
    }
    out.flush()
}
