//! Scenario construction: vehicles on a circle aimed across the origin, a
//! go-to-goal nominal controller, and the built-in presets.

use crate::barrier::EvadingManeuver;
use crate::dynamics::{ControlBounds, ControlInput, StackedState, VehicleState};
use crate::safety::SafetyKind;
use crate::supervisor::{
    build_shared_maneuver_constraints, AlphaFunction, ConstraintSet, SupervisorError,
};

/// Which filter the simulator runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    Centralized,
    Decentralized,
}

impl std::fmt::Display for FilterMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FilterMode::Centralized => write!(f, "centralized"),
            FilterMode::Decentralized => write!(f, "decentralized"),
        }
    }
}

/// Everything a batch run needs.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub k: usize,
    /// circle radius [m]
    pub radius: f64,
    /// heading offset from pointing at the origin [rad]
    pub psi: f64,
    pub bounds: ControlBounds,
    /// minimum safety distance [m]
    pub d_s: f64,
    /// heading regularizer weight [m^2]
    pub delta: f64,
    pub alpha: AlphaFunction,
    pub maneuver: EvadingManeuver,
    pub safety: SafetyKind,
    /// integration step [s]
    pub dt: f64,
    /// run duration [s]
    pub t_end: f64,
    pub mode: FilterMode,
    /// on an infeasible QP, apply the evading maneuver for that step
    /// instead of aborting
    pub fallback_maneuver: bool,
}

#[derive(Debug)]
pub enum ScenarioError {
    InvalidConfig(String),
    /// The constructed initial state is outside the joint safe set.
    UnsafeStart { constraint: usize, h: f64 },
    Supervisor(SupervisorError),
}

impl std::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioError::InvalidConfig(msg) => write!(f, "invalid scenario: {msg}"),
            ScenarioError::UnsafeStart { constraint, h } => write!(
                f,
                "initial state outside the safe set: h[{constraint}] = {h:.6}"
            ),
            ScenarioError::Supervisor(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

impl From<SupervisorError> for ScenarioError {
    fn from(e: SupervisorError) -> Self {
        ScenarioError::Supervisor(e)
    }
}

/// Per-vehicle goal positions [m].
#[derive(Debug, Clone, PartialEq)]
pub struct GoalSpec {
    pub goals: Vec<(f64, f64)>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.k < 2 {
            return Err(ScenarioError::InvalidConfig(format!(
                "k must be >= 2, got {}",
                self.k
            )));
        }
        if !(self.dt > 0.0) {
            return Err(ScenarioError::InvalidConfig(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if self.t_end < 0.0 {
            return Err(ScenarioError::InvalidConfig(format!(
                "t_end must be >= 0, got {}",
                self.t_end
            )));
        }
        if !(self.radius > 0.0) {
            return Err(ScenarioError::InvalidConfig(format!(
                "radius must be > 0, got {}",
                self.radius
            )));
        }
        if self.maneuver.len() != self.k {
            return Err(ScenarioError::InvalidConfig(format!(
                "maneuver covers {} vehicles, scenario has {}",
                self.maneuver.len(),
                self.k
            )));
        }
        self.maneuver
            .validate()
            .map_err(|e| ScenarioError::InvalidConfig(e.to_string()))?;
        if !self.maneuver.strictly_interior(&self.bounds) {
            return Err(ScenarioError::InvalidConfig(
                "evading maneuver must map strictly inside the actuator box".into(),
            ));
        }
        let kind_ok = match self.maneuver {
            EvadingManeuver::Turn { .. } => {
                matches!(self.safety, SafetyKind::AdjustedSq | SafetyKind::AdjustedSqrt)
            }
            EvadingManeuver::Straight { .. } => {
                matches!(self.safety, SafetyKind::EuclideanSq | SafetyKind::PlainSqrt)
            }
        };
        if !kind_ok {
            return Err(ScenarioError::InvalidConfig(format!(
                "safety kind {:?} is not compatible with the maneuver family",
                self.safety
            )));
        }
        Ok(())
    }

    /// Constraint set with the scenario-wide shared maneuver.
    pub fn constraint_set(&self) -> Result<ConstraintSet, ScenarioError> {
        self.validate()?;
        Ok(build_shared_maneuver_constraints(
            self.k,
            self.safety,
            self.d_s,
            self.delta,
            self.maneuver.clone(),
        )?)
    }
}

/// Place the k vehicles on the circle and aim each one across the origin.
///
/// Vehicle i (1-based in the placement formula) starts at
/// `R (cos(i 2pi/k + pi), sin(i 2pi/k + pi))` with heading
/// `i 2pi/k + psi`; its goal is the antipodal point
/// `R (cos(i 2pi/k), sin(i 2pi/k))`.
///
/// Fails with `UnsafeStart` when any barrier is negative at the built
/// state, as happens for straight maneuvers with zero heading offset.
pub fn build_circle_scenario(
    cfg: &ScenarioConfig,
) -> Result<(StackedState, GoalSpec), ScenarioError> {
    cfg.validate()?;
    let k = cfg.k;
    let mut vehicles = Vec::with_capacity(k);
    let mut goals = Vec::with_capacity(k);
    for idx in 1..=k {
        let angle = idx as f64 * 2.0 * std::f64::consts::PI / k as f64;
        vehicles.push(VehicleState::new(
            cfg.radius * (angle + std::f64::consts::PI).cos(),
            cfg.radius * (angle + std::f64::consts::PI).sin(),
            angle + cfg.psi,
        ));
        goals.push((cfg.radius * angle.cos(), cfg.radius * angle.sin()));
    }
    let state = StackedState::new(vehicles);

    let cs = cfg.constraint_set()?;
    for (j, barrier) in cs.barriers().iter().enumerate() {
        let h = match barrier.value(&state) {
            Ok((h, _)) => h,
            Err(_) => f64::NEG_INFINITY,
        };
        if h < 0.0 {
            return Err(ScenarioError::UnsafeStart { constraint: j, h });
        }
    }
    Ok((state, GoalSpec { goals }))
}

/// Proportional gain of the offset-point tracking law [1/s].
const NOMINAL_KP: f64 = 1.0;

/// Go-to-goal law via the near-identity offset point: track the point
/// `p + lambda (cos theta, sin theta)` toward the goal with a proportional
/// planar velocity, map it back through the offset-point kinematics, then
/// saturate onto the actuator box.
pub fn nominal_controller(
    state: &VehicleState,
    goal: (f64, f64),
    bounds: &ControlBounds,
    lambda: f64,
) -> ControlInput {
    assert!(lambda > 0.0, "offset distance must be positive");
    let (sin_t, cos_t) = state.theta.sin_cos();
    let offset = (state.px + lambda * cos_t, state.py + lambda * sin_t);
    let wx = NOMINAL_KP * (goal.0 - offset.0);
    let wy = NOMINAL_KP * (goal.1 - offset.1);
    let raw = ControlInput::new(
        cos_t * wx + sin_t * wy,
        (-sin_t * wx + cos_t * wy) / lambda,
    );
    bounds.saturate(raw)
}

/// Built-in scenario presets. Bounds, distances, and maneuvers follow the
/// two- and twenty-vehicle circle scenarios; `dt` and `t_end` are library
/// defaults and are echoed into every log.
pub const PRESET_NAMES: [&str; 4] = [
    "paper-2veh-turn",
    "paper-2veh-straight",
    "paper-20veh-turn",
    "paper-20veh-straight",
];

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let bounds = ControlBounds::new(15.0, 25.0, 13.0_f64.to_radians()).unwrap();
    let v = 0.9 * bounds.v_min + 0.1 * bounds.v_max;
    let omega = 0.9 * bounds.omega_max;
    let alpha = AlphaFunction::linear(1.0).unwrap();
    let base = ScenarioConfig {
        k: 2,
        radius: 200.0,
        psi: 0.0,
        bounds,
        d_s: 5.0,
        delta: 0.01,
        alpha,
        maneuver: EvadingManeuver::Straight { speeds: vec![] },
        safety: SafetyKind::PlainSqrt,
        dt: 0.02,
        t_end: 40.0,
        mode: FilterMode::Decentralized,
        fallback_maneuver: false,
    };
    match name {
        "paper-2veh-turn" => Some(ScenarioConfig {
            maneuver: EvadingManeuver::Turn {
                sigmas: vec![1.1, 1.0],
                omega,
                speed: v,
            },
            safety: SafetyKind::AdjustedSqrt,
            ..base
        }),
        "paper-2veh-straight" => Some(ScenarioConfig {
            psi: 2.0_f64.to_radians(),
            maneuver: EvadingManeuver::Straight {
                speeds: vec![1.1 * v, v],
            },
            safety: SafetyKind::PlainSqrt,
            ..base
        }),
        "paper-20veh-turn" => Some(ScenarioConfig {
            k: 20,
            maneuver: EvadingManeuver::Turn {
                sigmas: vec![1.0; 20],
                omega,
                speed: v,
            },
            safety: SafetyKind::AdjustedSqrt,
            // The dense merge makes neighbor pairs fly nearly parallel,
            // where the turn barrier is ill-conditioned; the gentler gain
            // keeps those rows slack and the finer step bounds the
            // zero-order-hold drift.
            alpha: AlphaFunction::linear(0.2).unwrap(),
            dt: 0.01,
            t_end: 60.0,
            ..base
        }),
        "paper-20veh-straight" => Some(ScenarioConfig {
            k: 20,
            psi: 25.0_f64.to_radians(),
            maneuver: EvadingManeuver::Straight {
                speeds: (1..=20).map(|i| (1.0 + 0.01 * i as f64) * v).collect(),
            },
            safety: SafetyKind::PlainSqrt,
            alpha: AlphaFunction::linear(0.2).unwrap(),
            dt: 0.01,
            t_end: 60.0,
            ..base
        }),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn presets_exist_and_validate() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap_or_else(|| panic!("missing preset {name}"));
            cfg.validate().unwrap();
            assert!(cfg.maneuver.strictly_interior(&cfg.bounds));
        }
        assert!(preset("nonsense").is_none());
    }

    #[test]
    fn two_vehicle_circle_geometry() {
        let cfg = preset("paper-2veh-turn").unwrap();
        let (state, goals) = build_circle_scenario(&cfg).unwrap();
        // Vehicle 1 (index 0): angle 2pi/2 + pi = 2pi, so (200, 0) heading pi.
        let v1 = state.vehicle(0);
        assert!((v1.px - 200.0).abs() < 1e-9);
        assert!(v1.py.abs() < 1e-9);
        assert!((v1.theta - PI).abs() < 1e-12);
        // Vehicle 2: diametrically opposite, heading 2pi (pointing at origin).
        let v2 = state.vehicle(1);
        assert!((v2.px + 200.0).abs() < 1e-9);
        assert!((v2.theta - 2.0 * PI).abs() < 1e-12);
        // Goals are the antipodes of the starts.
        assert!((goals.goals[0].0 + 200.0).abs() < 1e-9);
        assert!((goals.goals[1].0 - 200.0).abs() < 1e-9);
    }

    #[test]
    fn straight_with_zero_offset_starts_unsafe() {
        let mut cfg = preset("paper-20veh-straight").unwrap();
        cfg.psi = 0.0;
        assert!(matches!(
            build_circle_scenario(&cfg),
            Err(ScenarioError::UnsafeStart { .. })
        ));
    }

    #[test]
    fn straight_with_paper_offset_starts_safe() {
        let cfg = preset("paper-20veh-straight").unwrap();
        let (state, _) = build_circle_scenario(&cfg).unwrap();
        let cs = cfg.constraint_set().unwrap();
        for b in cs.barriers() {
            assert!(b.value(&state).unwrap().0 >= 0.0);
        }
    }

    #[test]
    fn nominal_goal_straight_ahead() {
        let bounds = ControlBounds::new(1.0, 10.0, 1.0).unwrap();
        let s = VehicleState::new(0.0, 0.0, 0.0);
        let u = nominal_controller(&s, (5.0, 0.0), &bounds, 1.0);
        assert_eq!(u.omega, 0.0);
        // Offset point sits at (1, 0), so the raw speed is 4, inside bounds.
        assert!((u.v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn nominal_goal_at_offset_point_saturates_to_floor() {
        let bounds = ControlBounds::new(1.0, 10.0, 1.0).unwrap();
        let s = VehicleState::new(0.0, 0.0, 0.0);
        let u = nominal_controller(&s, (1.0, 0.0), &bounds, 1.0);
        assert_eq!(u.v, bounds.v_min);
        assert_eq!(u.omega, 0.0);
    }

    #[test]
    fn nominal_turns_left_toward_left_goal() {
        let bounds = ControlBounds::new(1.0, 10.0, 1.0).unwrap();
        let s = VehicleState::new(0.0, 0.0, 0.0);
        let u = nominal_controller(&s, (0.0, 50.0), &bounds, 1.0);
        assert!(u.omega > 0.0);
    }

    #[test]
    fn nominal_output_always_within_bounds() {
        let bounds = ControlBounds::new(2.0, 4.0, 0.3).unwrap();
        for gx in [-100.0, 0.0, 100.0] {
            for gy in [-100.0, 0.0, 100.0] {
                let s = VehicleState::new(3.0, -7.0, 1.1);
                let u = nominal_controller(&s, (gx, gy), &bounds, 1.0);
                assert!(bounds.contains(u, 0.0));
            }
        }
    }

    /// Rotating the pose and the goal together rotates the commanded planar
    /// velocity and leaves the turn rate unchanged.
    #[test]
    fn nominal_rotation_equivariance() {
        let bounds = ControlBounds::new(0.1, 100.0, 10.0).unwrap();
        let s = VehicleState::new(3.0, 4.0, 0.6);
        let goal = (20.0, -9.0);
        let base = nominal_controller(&s, goal, &bounds, 1.0);
        let rot = 1.234f64;
        let (sin_r, cos_r) = rot.sin_cos();
        let s2 = VehicleState::new(
            cos_r * s.px - sin_r * s.py,
            sin_r * s.px + cos_r * s.py,
            s.theta + rot,
        );
        let goal2 = (
            cos_r * goal.0 - sin_r * goal.1,
            sin_r * goal.0 + cos_r * goal.1,
        );
        let rotated = nominal_controller(&s2, goal2, &bounds, 1.0);
        assert!((base.v - rotated.v).abs() < 1e-9);
        assert!((base.omega - rotated.omega).abs() < 1e-9);
    }

    #[test]
    fn config_validation_catches_errors() {
        let mut cfg = preset("paper-2veh-turn").unwrap();
        cfg.dt = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = preset("paper-2veh-turn").unwrap();
        cfg.safety = SafetyKind::PlainSqrt;
        assert!(cfg.validate().is_err());

        let mut cfg = preset("paper-2veh-turn").unwrap();
        cfg.maneuver = EvadingManeuver::Turn {
            sigmas: vec![1.0, 1.0],
            omega: cfg.bounds.omega_max, // on the boundary, not interior
            speed: 16.0,
        };
        assert!(cfg.validate().is_err());
    }
}
