//! Unicycle vehicle model, stacked multi-vehicle state, and trajectory
//! propagation (numeric RK4 and exact arcs under constant inputs).

/// Planar pose of one unicycle vehicle.
///
/// Heading is not wrapped; downstream formulas only consume it through
/// `sin`/`cos`, and wrapping would break finite-difference checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    /// x position [m]
    pub px: f64,
    /// y position [m]
    pub py: f64,
    /// heading [rad]
    pub theta: f64,
}

impl VehicleState {
    pub fn new(px: f64, py: f64, theta: f64) -> Self {
        Self { px, py, theta }
    }
}

/// Control input of one vehicle: translational speed and turn rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    /// speed [m/s]
    pub v: f64,
    /// turn rate [rad/s]
    pub omega: f64,
}

impl ControlInput {
    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

/// Ordered poses of all vehicles in a scenario. The vehicle count is fixed
/// for the lifetime of the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedState {
    vehicles: Vec<VehicleState>,
}

impl StackedState {
    pub fn new(vehicles: Vec<VehicleState>) -> Self {
        Self { vehicles }
    }

    /// Number of vehicles k.
    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn vehicle(&self, i: usize) -> &VehicleState {
        &self.vehicles[i]
    }

    pub fn vehicle_mut(&mut self, i: usize) -> &mut VehicleState {
        &mut self.vehicles[i]
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    /// Flatten to `[px_0, py_0, theta_0, px_1, ...]` (length 3k).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.vehicles.len());
        for v in &self.vehicles {
            out.push(v.px);
            out.push(v.py);
            out.push(v.theta);
        }
        out
    }

    /// Inverse of [`StackedState::to_flat`]. Panics if the length is not a
    /// multiple of 3.
    pub fn from_flat(flat: &[f64]) -> Self {
        assert!(flat.len().is_multiple_of(3), "flat state length must be 3k");
        let vehicles = flat
            .chunks_exact(3)
            .map(|c| VehicleState::new(c[0], c[1], c[2]))
            .collect();
        Self { vehicles }
    }
}

/// Box actuator limits shared by every vehicle, `v in [v_min, v_max]`,
/// `|omega| <= omega_max`, with `v_min > 0` strictly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBounds {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

/// Violation of the `ControlBounds` invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct InvalidBounds(pub String);

impl std::fmt::Display for InvalidBounds {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid control bounds: {}", self.0)
    }
}

impl std::error::Error for InvalidBounds {}

impl ControlBounds {
    pub fn new(v_min: f64, v_max: f64, omega_max: f64) -> Result<Self, InvalidBounds> {
        if !(v_min.is_finite() && v_max.is_finite() && omega_max.is_finite()) {
            return Err(InvalidBounds("bounds must be finite".into()));
        }
        if v_min <= 0.0 {
            return Err(InvalidBounds(format!("v_min must be > 0, got {v_min}")));
        }
        if v_max < v_min {
            return Err(InvalidBounds(format!(
                "v_max {v_max} must be >= v_min {v_min}"
            )));
        }
        if omega_max < 0.0 {
            return Err(InvalidBounds(format!(
                "omega_max must be >= 0, got {omega_max}"
            )));
        }
        Ok(Self {
            v_min,
            v_max,
            omega_max,
        })
    }

    /// Linear polytope rows `a . (v, omega) >= b` for one vehicle:
    /// `v >= v_min`, `-v >= -v_max`, `omega >= -omega_max`, `-omega >= -omega_max`.
    pub fn polytope_rows(&self) -> [([f64; 2], f64); 4] {
        [
            ([1.0, 0.0], self.v_min),
            ([-1.0, 0.0], -self.v_max),
            ([0.0, 1.0], -self.omega_max),
            ([0.0, -1.0], -self.omega_max),
        ]
    }

    /// True when the input satisfies the box within `tol`.
    pub fn contains(&self, u: ControlInput, tol: f64) -> bool {
        u.v >= self.v_min - tol && u.v <= self.v_max + tol && u.omega.abs() <= self.omega_max + tol
    }

    /// True when the input is strictly inside the box.
    pub fn contains_strictly(&self, u: ControlInput) -> bool {
        u.v > self.v_min && u.v < self.v_max && u.omega.abs() < self.omega_max
    }

    /// Clamp an input onto the box.
    pub fn saturate(&self, u: ControlInput) -> ControlInput {
        ControlInput::new(
            u.v.clamp(self.v_min, self.v_max),
            u.omega.clamp(-self.omega_max, self.omega_max),
        )
    }
}

/// Turn rates below this magnitude are treated as straight-line motion.
pub const OMEGA_STRAIGHT_EPS: f64 = 1e-12;

/// State derivative of the unicycle model: `(v cos theta, v sin theta, omega)`.
/// The model is driftless; the drift term is identically zero.
pub fn unicycle_flow(state: &VehicleState, input: &ControlInput) -> (f64, f64, f64) {
    (
        input.v * state.theta.cos(),
        input.v * state.theta.sin(),
        input.omega,
    )
}

/// One classical 4th-order Runge-Kutta step of the whole stack with the
/// inputs held constant over `dt`.
pub fn integrate_rk4(state: &StackedState, inputs: &[ControlInput], dt: f64) -> StackedState {
    assert_eq!(
        inputs.len(),
        state.len(),
        "one input per vehicle is required"
    );
    let deriv = |s: &StackedState| -> Vec<(f64, f64, f64)> {
        s.vehicles()
            .iter()
            .zip(inputs)
            .map(|(v, u)| unicycle_flow(v, u))
            .collect()
    };
    let advance = |s: &StackedState, k: &[(f64, f64, f64)], h: f64| -> StackedState {
        let vehicles = s
            .vehicles()
            .iter()
            .zip(k)
            .map(|(v, d)| VehicleState::new(v.px + h * d.0, v.py + h * d.1, v.theta + h * d.2))
            .collect();
        StackedState::new(vehicles)
    };

    let k1 = deriv(state);
    let k2 = deriv(&advance(state, &k1, dt / 2.0));
    let k3 = deriv(&advance(state, &k2, dt / 2.0));
    let k4 = deriv(&advance(state, &k3, dt));

    let vehicles = state
        .vehicles()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let dx = (k1[i].0 + 2.0 * k2[i].0 + 2.0 * k3[i].0 + k4[i].0) / 6.0;
            let dy = (k1[i].1 + 2.0 * k2[i].1 + 2.0 * k3[i].1 + k4[i].1) / 6.0;
            let dth = (k1[i].2 + 2.0 * k2[i].2 + 2.0 * k3[i].2 + k4[i].2) / 6.0;
            VehicleState::new(v.px + dt * dx, v.py + dt * dy, v.theta + dt * dth)
        })
        .collect();
    StackedState::new(vehicles)
}

/// Exact pose after `tau` seconds of constant `(v, omega)`.
///
/// For a turning vehicle the motion is a circular arc around
/// `(px - (v/omega) sin theta, py + (v/omega) cos theta)`; for
/// `|omega| < OMEGA_STRAIGHT_EPS` the exact straight-line limit is used.
pub fn analytic_arc(state: &VehicleState, input: &ControlInput, tau: f64) -> VehicleState {
    let (v, omega) = (input.v, input.omega);
    if omega.abs() < OMEGA_STRAIGHT_EPS {
        return VehicleState::new(
            state.px + tau * v * state.theta.cos(),
            state.py + tau * v * state.theta.sin(),
            state.theta,
        );
    }
    let r = v / omega;
    let b0 = state.px - r * state.theta.sin();
    let c0 = state.py + r * state.theta.cos();
    let phase = omega * tau + state.theta;
    VehicleState::new(b0 + r * phase.sin(), c0 - r * phase.cos(), phase)
}

/// Propagate every vehicle of the stack along its own constant input.
pub fn analytic_arc_stacked(state: &StackedState, inputs: &[ControlInput], tau: f64) -> StackedState {
    assert_eq!(inputs.len(), state.len());
    StackedState::new(
        state
            .vehicles()
            .iter()
            .zip(inputs)
            .map(|(s, u)| analytic_arc(s, u, tau))
            .collect(),
    )
}
