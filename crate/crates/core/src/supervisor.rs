//! Composition of pairwise barrier constraints and the two safety filters.
//!
//! All constraints in a scenario are built from one shared evading
//! maneuver; that is what makes the stacked constraint system feasible
//! everywhere in the joint safe set, and what lets each vehicle solve its
//! own strengthened per-vehicle program without seeing the other vehicles'
//! nominal inputs.

use std::sync::Arc;

use crate::barrier::{BarrierError, BarrierSpec, EvadingManeuver};
use crate::dynamics::{ControlBounds, ControlInput, StackedState};
use crate::qp::{self, QpError, QpProblem};
use crate::safety::{SafetyFnSpec, SafetyKind};

/// States with any barrier below this are rejected rather than filtered;
/// the theory does not cover recovery from outside the safe set. The
/// threshold matches the forward-invariance tolerance that absorbs
/// fixed-step integration drift.
pub const UNSAFE_TOL: f64 = -1e-4;

/// Slack used by membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// Extended class-K gain shaping how hard the filter brakes near the
/// boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaFunction {
    /// `alpha(h) = kappa h`, `kappa > 0` [1/s]
    Linear { kappa: f64 },
}

impl AlphaFunction {
    pub fn linear(kappa: f64) -> Result<Self, SupervisorError> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(SupervisorError::InvalidConstraintSet(format!(
                "kappa must be finite and > 0, got {kappa}"
            )));
        }
        Ok(AlphaFunction::Linear { kappa })
    }

    pub fn eval(&self, h: f64) -> f64 {
        match self {
            AlphaFunction::Linear { kappa } => kappa * h,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SupervisorError {
    /// Some barrier is below `UNSAFE_TOL`: the state left the joint safe
    /// set and the filters refuse to run.
    UnsafeState { constraint: usize, h: f64 },
    /// The QP reported an empty constraint system. Inside the joint safe
    /// set this contradicts the shared-maneuver guarantee, so it signals
    /// either discretization drift or a mis-specified scenario.
    Infeasible {
        vehicle: Option<usize>,
        max_violation: f64,
    },
    IterationLimit { vehicle: Option<usize> },
    Barrier(BarrierError),
    InvalidConstraintSet(String),
}

impl std::fmt::Display for SupervisorError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SupervisorError::UnsafeState { constraint, h } => {
                write!(f, "state outside the safe set: h[{constraint}] = {h:.6e}")
            }
            SupervisorError::Infeasible {
                vehicle,
                max_violation,
            } => match vehicle {
                Some(i) => write!(
                    f,
                    "QP for vehicle {i} infeasible (violation {max_violation:.3e})"
                ),
                None => write!(f, "stacked QP infeasible (violation {max_violation:.3e})"),
            },
            SupervisorError::IterationLimit { vehicle } => match vehicle {
                Some(i) => write!(f, "QP for vehicle {i} hit its iteration limit"),
                None => write!(f, "stacked QP hit its iteration limit"),
            },
            SupervisorError::Barrier(e) => write!(f, "barrier evaluation failed: {e}"),
            SupervisorError::InvalidConstraintSet(msg) => {
                write!(f, "invalid constraint set: {msg}")
            }
        }
    }
}

impl std::error::Error for SupervisorError {}

impl From<BarrierError> for SupervisorError {
    fn from(e: BarrierError) -> Self {
        SupervisorError::Barrier(e)
    }
}

fn map_qp_error(e: QpError, vehicle: Option<usize>) -> SupervisorError {
    match e {
        QpError::Infeasible { max_violation } => SupervisorError::Infeasible {
            vehicle,
            max_violation,
        },
        QpError::IterationLimit => SupervisorError::IterationLimit { vehicle },
        QpError::Malformed(msg) => SupervisorError::InvalidConstraintSet(msg),
    }
}

/// One barrier evaluated at the current state: everything a constraint row
/// needs.
#[derive(Debug, Clone)]
pub struct ConstraintEval {
    pub h: f64,
    pub tau_star: f64,
    pub lie_f: f64,
    pub lie_g: Vec<f64>,
}

/// The `q = k(k-1)/2` pairwise constraints of a scenario, all referencing
/// one shared maneuver.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    barriers: Vec<BarrierSpec>,
    maneuver: Arc<EvadingManeuver>,
    k: usize,
    /// vehicles whose input affects constraint j
    zeta: Vec<(usize, usize)>,
    /// constraints affected by vehicle i
    a_sets: Vec<Vec<usize>>,
}

/// Build the full pairwise constraint set over `k` vehicles from one shared
/// maneuver. Pairs are ordered lexicographically: (0,1), (0,2), ..., (1,2),
/// ...
pub fn build_shared_maneuver_constraints(
    k: usize,
    kind: SafetyKind,
    d_s: f64,
    delta: f64,
    maneuver: EvadingManeuver,
) -> Result<ConstraintSet, SupervisorError> {
    if k < 2 {
        return Err(SupervisorError::InvalidConstraintSet(format!(
            "at least two vehicles required, got {k}"
        )));
    }
    if maneuver.len() != k {
        return Err(SupervisorError::InvalidConstraintSet(format!(
            "maneuver covers {} vehicles, scenario has {k}",
            maneuver.len()
        )));
    }
    maneuver.validate()?;
    let maneuver = Arc::new(maneuver);

    let mut barriers = Vec::with_capacity(k * (k - 1) / 2);
    let mut zeta = Vec::with_capacity(barriers.capacity());
    let mut a_sets = vec![Vec::new(); k];
    for i in 0..k {
        for j in i + 1..k {
            let safety = SafetyFnSpec::new(kind, i, j, d_s, delta)
                .map_err(|e| SupervisorError::InvalidConstraintSet(e.to_string()))?;
            let constraint = barriers.len();
            barriers.push(BarrierSpec::new(safety, Arc::clone(&maneuver))?);
            zeta.push((i, j));
            a_sets[i].push(constraint);
            a_sets[j].push(constraint);
        }
    }
    Ok(ConstraintSet {
        barriers,
        maneuver,
        k,
        zeta,
        a_sets,
    })
}

impl ConstraintSet {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of constraints q.
    pub fn q(&self) -> usize {
        self.barriers.len()
    }

    pub fn barrier(&self, j: usize) -> &BarrierSpec {
        &self.barriers[j]
    }

    pub fn barriers(&self) -> &[BarrierSpec] {
        &self.barriers
    }

    pub fn maneuver(&self) -> &Arc<EvadingManeuver> {
        &self.maneuver
    }

    /// Vehicles whose input affects constraint j.
    pub fn zeta(&self, j: usize) -> (usize, usize) {
        self.zeta[j]
    }

    /// Constraints affected by vehicle i.
    pub fn a_set(&self, i: usize) -> &[usize] {
        &self.a_sets[i]
    }

    /// Shared maneuver as a stacked input vector (length 2k).
    pub fn gamma_stacked(&self) -> Vec<f64> {
        self.maneuver.stacked()
    }

    /// Evaluate every barrier at the state.
    pub fn evaluate_all(&self, x: &StackedState) -> Result<Vec<ConstraintEval>, SupervisorError> {
        self.barriers
            .iter()
            .map(|b| {
                let eval = b.evaluate(x)?;
                Ok(ConstraintEval {
                    h: eval.value,
                    tau_star: eval.tau_star,
                    lie_f: eval.lie_f,
                    lie_g: eval.lie_g,
                })
            })
            .collect()
    }

    pub fn evaluate_one(
        &self,
        j: usize,
        x: &StackedState,
    ) -> Result<ConstraintEval, SupervisorError> {
        let eval = self.barriers[j].evaluate(x)?;
        Ok(ConstraintEval {
            h: eval.value,
            tau_star: eval.tau_star,
            lie_f: eval.lie_f,
            lie_g: eval.lie_g,
        })
    }

    /// Left-hand side of a centralized row at input `u`:
    /// `L_f h + L_g h u + alpha(h)`.
    pub fn centralized_slack(&self, alpha: &AlphaFunction, eval: &ConstraintEval, u: &[f64]) -> f64 {
        eval.lie_f + qp::dot(&eval.lie_g, u) + alpha.eval(eval.h)
    }

    /// Left-hand side of the per-vehicle strengthened row for vehicle `i`
    /// at input `u_i`.
    pub fn decentralized_slack(
        &self,
        alpha: &AlphaFunction,
        j: usize,
        eval: &ConstraintEval,
        i: usize,
        u_i: ControlInput,
    ) -> f64 {
        let gamma = self.gamma_stacked();
        let lg_dot_gamma = qp::dot(&eval.lie_g, &gamma);
        let lg_i = [eval.lie_g[2 * i], eval.lie_g[2 * i + 1]];
        let lg_i_dot_gamma_i = lg_i[0] * gamma[2 * i] + lg_i[1] * gamma[2 * i + 1];
        let zeta_size = 2; // pairwise constraints
        debug_assert!({
            let (a, b) = self.zeta[j];
            i == a || i == b
        });
        let rhs = decentralized_row_rhs(
            eval.lie_f,
            alpha.eval(eval.h),
            lg_dot_gamma,
            lg_i_dot_gamma_i,
            zeta_size,
        );
        lg_i[0] * u_i.v + lg_i[1] * u_i.omega - rhs
    }
}

/// Right-hand side of the per-vehicle strengthened row
/// `[L_g h]_i u_i >= rhs`, from the scalar pieces of the constraint:
///
/// `rhs = -(L_f h + alpha(h) + [L_g h]_{\i} gamma_{\i})
///        + (|zeta|-1)/|zeta| (L_f h + L_g h gamma + alpha(h))`
pub fn decentralized_row_rhs(
    lie_f: f64,
    alpha_h: f64,
    lg_dot_gamma: f64,
    lg_i_dot_gamma_i: f64,
    zeta_size: usize,
) -> f64 {
    let frac = (zeta_size as f64 - 1.0) / zeta_size as f64;
    -(lie_f + alpha_h + (lg_dot_gamma - lg_i_dot_gamma_i))
        + frac * (lie_f + lg_dot_gamma + alpha_h)
}

fn check_safe(evals: &[ConstraintEval]) -> Result<(), SupervisorError> {
    for (j, e) in evals.iter().enumerate() {
        if e.h < UNSAFE_TOL {
            return Err(SupervisorError::UnsafeState {
                constraint: j,
                h: e.h,
            });
        }
    }
    Ok(())
}

fn stacked_box_rows(k: usize, bounds: &ControlBounds) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut g = Vec::with_capacity(4 * k);
    let mut d = Vec::with_capacity(4 * k);
    for l in 0..k {
        for (coeffs, rhs) in bounds.polytope_rows() {
            let mut row = vec![0.0; 2 * k];
            row[2 * l] = coeffs[0];
            row[2 * l + 1] = coeffs[1];
            g.push(row);
            d.push(rhs);
        }
    }
    (g, d)
}

/// Project a stacked nominal input onto the admissible control space of all
/// q constraints at once. Requires the state to be in the joint safe set.
pub fn centralized_filter(
    cs: &ConstraintSet,
    alpha: &AlphaFunction,
    x: &StackedState,
    u_hat: &[f64],
    bounds: &ControlBounds,
) -> Result<(Vec<f64>, usize), SupervisorError> {
    assert_eq!(u_hat.len(), 2 * cs.k(), "stacked nominal must have length 2k");
    let evals = cs.evaluate_all(x)?;
    check_safe(&evals)?;

    let mut g = Vec::with_capacity(cs.q() + 4 * cs.k());
    let mut d = Vec::with_capacity(g.capacity());
    for e in &evals {
        g.push(e.lie_g.clone());
        d.push(-(e.lie_f + alpha.eval(e.h)));
    }
    let (bg, bd) = stacked_box_rows(cs.k(), bounds);
    g.extend(bg);
    d.extend(bd);

    // The shared maneuver is the feasibility certificate for this system;
    // hand it to the solver as the starting point.
    let sol = qp::solve_with_start(&QpProblem::new(u_hat.to_vec(), g, d), Some(&cs.gamma_stacked()))
        .map_err(|e| map_qp_error(e, None))?;
    Ok((sol.u_star, sol.iterations))
}

/// Solve vehicle `i`'s strengthened program. Uses only the vehicle poses
/// and the shared maneuver; other vehicles' nominal inputs never enter.
pub fn decentralized_filter(
    cs: &ConstraintSet,
    alpha: &AlphaFunction,
    x: &StackedState,
    u_hat_i: ControlInput,
    i: usize,
    bounds: &ControlBounds,
) -> Result<(ControlInput, usize), SupervisorError> {
    let gamma = cs.gamma_stacked();
    let mut g: Vec<Vec<f64>> = Vec::with_capacity(cs.a_set(i).len() + 4);
    let mut d: Vec<f64> = Vec::with_capacity(g.capacity());

    for &j in cs.a_set(i) {
        let e = cs.evaluate_one(j, x)?;
        if e.h < UNSAFE_TOL {
            return Err(SupervisorError::UnsafeState { constraint: j, h: e.h });
        }
        let lg_dot_gamma = qp::dot(&e.lie_g, &gamma);
        let lg_i = [e.lie_g[2 * i], e.lie_g[2 * i + 1]];
        let lg_i_dot_gamma_i = lg_i[0] * gamma[2 * i] + lg_i[1] * gamma[2 * i + 1];
        g.push(vec![lg_i[0], lg_i[1]]);
        d.push(decentralized_row_rhs(
            e.lie_f,
            alpha.eval(e.h),
            lg_dot_gamma,
            lg_i_dot_gamma_i,
            2,
        ));
    }
    for (coeffs, rhs) in bounds.polytope_rows() {
        g.push(coeffs.to_vec());
        d.push(rhs);
    }

    let gamma_i = [gamma[2 * i], gamma[2 * i + 1]];
    let sol = qp::solve_with_start(
        &QpProblem::new(vec![u_hat_i.v, u_hat_i.omega], g, d),
        Some(&gamma_i),
    )
    .map_err(|e| map_qp_error(e, Some(i)))?;
    Ok((ControlInput::new(sol.u_star[0], sol.u_star[1]), sol.iterations))
}

/// Membership of one stacked input in the admissible control spaces, with
/// `MEMBERSHIP_TOL` slack. Used by tests and the simulator's audit pass.
#[derive(Debug, Clone)]
pub struct MembershipReport {
    /// per vehicle: input inside the actuator box
    pub actuator_ok: Vec<bool>,
    /// per constraint: centralized row satisfied
    pub centralized_rows: Vec<bool>,
    /// per constraint, per vehicle of its pair: strengthened row satisfied
    pub decentralized_rows: Vec<[(usize, bool); 2]>,
}

impl MembershipReport {
    /// In the actuator box and every centralized row holds.
    pub fn centralized_ok(&self) -> bool {
        self.actuator_ok.iter().all(|b| *b) && self.centralized_rows.iter().all(|b| *b)
    }

    /// In the actuator box and every strengthened per-vehicle row holds.
    pub fn decentralized_ok(&self) -> bool {
        self.actuator_ok.iter().all(|b| *b)
            && self
                .decentralized_rows
                .iter()
                .all(|pair| pair.iter().all(|(_, ok)| *ok))
    }
}

/// Check a stacked input against every admissible-set definition at once.
pub fn admissible_membership(
    cs: &ConstraintSet,
    alpha: &AlphaFunction,
    x: &StackedState,
    u: &[f64],
    bounds: &ControlBounds,
) -> Result<MembershipReport, SupervisorError> {
    assert_eq!(u.len(), 2 * cs.k());
    let evals = cs.evaluate_all(x)?;

    let actuator_ok = (0..cs.k())
        .map(|l| bounds.contains(ControlInput::new(u[2 * l], u[2 * l + 1]), MEMBERSHIP_TOL))
        .collect();

    let centralized_rows = evals
        .iter()
        .map(|e| cs.centralized_slack(alpha, e, u) >= -MEMBERSHIP_TOL)
        .collect();

    let decentralized_rows = evals
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let (a, b) = cs.zeta(j);
            [a, b].map(|i| {
                let u_i = ControlInput::new(u[2 * i], u[2 * i + 1]);
                (
                    i,
                    cs.decentralized_slack(alpha, j, e, i, u_i) >= -MEMBERSHIP_TOL,
                )
            })
        })
        .collect();

    Ok(MembershipReport {
        actuator_ok,
        centralized_rows,
        decentralized_rows,
    })
}
