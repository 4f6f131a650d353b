//! Safety functions: the raw pairwise separation constraints whose
//! nonnegativity defines "safe now". These are not valid barriers under
//! actuator limits by themselves; the `barrier` module builds barriers
//! from them.

use crate::dynamics::StackedState;

/// Which safety function variant a pairwise constraint uses.
///
/// The `Adjusted*` variants add the heading regularizer
/// `-delta + delta cos(theta_i)` (theta of the lower-indexed vehicle of the
/// pair), which keeps the turn-maneuver barrier differentiable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafetyKind {
    /// `d_ij(x) - D_s^2` [m^2]
    EuclideanSq,
    /// `d_ij(x) - delta + delta cos(theta_i) - D_s^2` [m^2]
    AdjustedSq,
    /// `sqrt(d_ij(x) - delta + delta cos(theta_i)) - D_s` [m]
    AdjustedSqrt,
    /// `sqrt(d_ij(x)) - D_s` [m]
    PlainSqrt,
}

impl SafetyKind {
    pub fn uses_delta(self) -> bool {
        matches!(self, SafetyKind::AdjustedSq | SafetyKind::AdjustedSqrt)
    }

    fn is_sqrt(self) -> bool {
        matches!(self, SafetyKind::AdjustedSqrt | SafetyKind::PlainSqrt)
    }
}

/// One pairwise safety constraint between vehicles `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyFnSpec {
    pub kind: SafetyKind,
    pub i: usize,
    pub j: usize,
    /// minimum safety distance D_s [m]
    pub d_s: f64,
    /// heading regularizer weight [m^2]; only the Adjusted variants use it
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SafetyError {
    /// The construction arguments violate the type invariants.
    InvalidSpec(String),
    /// A square-root variant was evaluated where its radicand is negative,
    /// i.e. the configuration left the validity region of the closed form.
    NegativeRadicand { radicand: f64 },
    /// A square-root variant was differentiated exactly at radicand zero.
    DegenerateGradient,
}

impl std::fmt::Display for SafetyError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SafetyError::InvalidSpec(msg) => write!(f, "invalid safety spec: {msg}"),
            SafetyError::NegativeRadicand { radicand } => {
                write!(f, "negative radicand {radicand} in sqrt safety function")
            }
            SafetyError::DegenerateGradient => {
                write!(f, "sqrt safety function gradient degenerate at radicand 0")
            }
        }
    }
}

impl std::error::Error for SafetyError {}

impl SafetyFnSpec {
    pub fn new(
        kind: SafetyKind,
        i: usize,
        j: usize,
        d_s: f64,
        delta: f64,
    ) -> Result<Self, SafetyError> {
        if i >= j {
            return Err(SafetyError::InvalidSpec(format!(
                "pair must satisfy i < j, got ({i}, {j})"
            )));
        }
        if !(d_s > 0.0) {
            return Err(SafetyError::InvalidSpec(format!("d_s must be > 0, got {d_s}")));
        }
        if delta < 0.0 {
            return Err(SafetyError::InvalidSpec(format!(
                "delta must be >= 0, got {delta}"
            )));
        }
        if kind.uses_delta() && delta == 0.0 {
            return Err(SafetyError::InvalidSpec(
                "adjusted variants require delta > 0".into(),
            ));
        }
        Ok(Self { kind, i, j, d_s, delta })
    }

    /// Radicand (or full value for the squared variants) before the `- D_s`
    /// normalization: `d_ij` plus the heading adjustment when applicable.
    fn adjusted_distance_sq(&self, x: &StackedState) -> f64 {
        let d = pair_distance_sq(x, self.i, self.j);
        if self.kind.uses_delta() {
            d - self.delta + self.delta * x.vehicle(self.i).theta.cos()
        } else {
            d
        }
    }

    /// Evaluate the safety function. `[m^2]` for the squared variants,
    /// `[m]` for the sqrt variants.
    pub fn rho(&self, x: &StackedState) -> Result<f64, SafetyError> {
        let base = self.adjusted_distance_sq(x);
        if self.kind.is_sqrt() {
            if base < 0.0 {
                return Err(SafetyError::NegativeRadicand { radicand: base });
            }
            Ok(base.sqrt() - self.d_s)
        } else {
            Ok(base - self.d_s * self.d_s)
        }
    }

    /// Analytic gradient of `rho` with respect to the stacked state
    /// (length 3k). Nonzero only in the pose coordinates of the pair.
    pub fn rho_gradient(&self, x: &StackedState) -> Result<Vec<f64>, SafetyError> {
        let k = x.len();
        let (i, j) = (self.i, self.j);
        let (vi, vj) = (x.vehicle(i), x.vehicle(j));
        let dx = vi.px - vj.px;
        let dy = vi.py - vj.py;

        // Gradient of the radicand (adjusted squared distance).
        let mut g = vec![0.0; 3 * k];
        g[3 * i] = 2.0 * dx;
        g[3 * i + 1] = 2.0 * dy;
        g[3 * j] = -2.0 * dx;
        g[3 * j + 1] = -2.0 * dy;
        if self.kind.uses_delta() {
            g[3 * i + 2] = -self.delta * vi.theta.sin();
        }

        if self.kind.is_sqrt() {
            let base = self.adjusted_distance_sq(x);
            if base < 0.0 {
                return Err(SafetyError::NegativeRadicand { radicand: base });
            }
            if base == 0.0 {
                return Err(SafetyError::DegenerateGradient);
            }
            let scale = 0.5 / base.sqrt();
            for v in &mut g {
                *v *= scale;
            }
        }
        Ok(g)
    }
}

/// Squared planar distance between vehicles `i` and `j` [m^2].
pub fn pair_distance_sq(x: &StackedState, i: usize, j: usize) -> f64 {
    let (a, b) = (x.vehicle(i), x.vehicle(j));
    let dx = a.px - b.px;
    let dy = a.py - b.py;
    dx * dx + dy * dy
}
