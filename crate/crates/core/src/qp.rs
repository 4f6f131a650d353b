//! Strictly convex dense quadratic programs
//! `min 1/2 ||u - u_hat||^2  s.t.  G u >= d`,
//! solved by a primal active-set method.
//!
//! The problems this library generates are tiny (a few dozen variables, a
//! few hundred rows at most), so everything is dense and allocation per
//! solve is not a concern. When no feasible starting point is known, a
//! least-infeasibility Newton descent on the squared constraint violations
//! serves as phase one and doubles as the infeasibility detector.

/// Componentwise feasibility tolerance on `G u >= d`.
pub const FEAS_TOL: f64 = 1e-8;
/// Tolerance on KKT stationarity and multiplier signs.
pub const KKT_TOL: f64 = 1e-9;

/// `min 1/2 ||u - u_hat||^2` subject to `g_matrix u >= d_vector`.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub u_hat: Vec<f64>,
    /// row-major r x m constraint matrix
    pub g_matrix: Vec<Vec<f64>>,
    pub d_vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u_star: Vec<f64>,
    /// indices of the constraints active at the solution, ascending
    pub active_set: Vec<usize>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpError {
    /// No point satisfies every constraint within `FEAS_TOL`. Carries the
    /// violation remaining at the least-infeasible point found.
    Infeasible { max_violation: f64 },
    /// Defensive cap of `100 r` iterations was hit.
    IterationLimit,
    /// The problem arrays are inconsistent or contain non-finite entries.
    Malformed(String),
}

impl std::fmt::Display for QpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QpError::Infeasible { max_violation } => {
                write!(f, "infeasible constraint system (violation {max_violation:.3e})")
            }
            QpError::IterationLimit => write!(f, "active-set iteration limit reached"),
            QpError::Malformed(msg) => write!(f, "malformed QP: {msg}"),
        }
    }
}

impl std::error::Error for QpError {}

impl QpProblem {
    pub fn new(u_hat: Vec<f64>, g_matrix: Vec<Vec<f64>>, d_vector: Vec<f64>) -> Self {
        Self {
            u_hat,
            g_matrix,
            d_vector,
        }
    }

    fn validate(&self) -> Result<(), QpError> {
        let m = self.u_hat.len();
        if m == 0 {
            return Err(QpError::Malformed("empty variable vector".into()));
        }
        if self.g_matrix.len() != self.d_vector.len() {
            return Err(QpError::Malformed(format!(
                "{} rows vs {} right-hand sides",
                self.g_matrix.len(),
                self.d_vector.len()
            )));
        }
        if self.g_matrix.is_empty() {
            return Err(QpError::Malformed("at least one constraint required".into()));
        }
        for (idx, row) in self.g_matrix.iter().enumerate() {
            if row.len() != m {
                return Err(QpError::Malformed(format!(
                    "row {idx} has {} entries, expected {m}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(QpError::Malformed(format!("row {idx} is not finite")));
            }
        }
        if self.u_hat.iter().any(|v| !v.is_finite())
            || self.d_vector.iter().any(|v| !v.is_finite())
        {
            return Err(QpError::Malformed("non-finite data".into()));
        }
        Ok(())
    }

    fn residual(&self, u: &[f64], row: usize) -> f64 {
        dot(&self.g_matrix[row], u) - self.d_vector[row]
    }

    fn max_violation(&self, u: &[f64]) -> f64 {
        (0..self.g_matrix.len())
            .map(|i| -self.residual(u, i))
            .fold(0.0, f64::max)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `L L^T x = rhs` for a symmetric positive definite `a` (row-major,
/// n x n), with escalating diagonal jitter on breakdown.
fn solve_spd(a: &[f64], rhs: &[f64], n: usize) -> Option<Vec<f64>> {
    let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
    let base = (trace / n as f64).max(1.0);
    for jitter_pow in [0.0, 1e-13, 1e-11, 1e-9] {
        let jitter = base * jitter_pow;
        let mut l = a.to_vec();
        let mut ok = true;
        for i in 0..n {
            l[i * n + i] += jitter;
        }
        // In-place Cholesky.
        'outer: for i in 0..n {
            for j in 0..=i {
                let mut sum = l[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        ok = false;
                        break 'outer;
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        if !ok {
            continue;
        }
        let mut x = rhs.to_vec();
        for i in 0..n {
            for k in 0..i {
                x[i] -= l[i * n + k] * x[k];
            }
            x[i] /= l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= l[k * n + i] * x[k];
            }
            x[i] /= l[i * n + i];
        }
        return Some(x);
    }
    None
}

/// Phase one: minimize `1/2 sum max(0, d_i - g_i u)^2` by Newton steps with
/// an exact piecewise-quadratic line search. Returns a feasible point or
/// the least-infeasible point found.
///
/// Newton with exact line search can zigzag between pieces at a linear
/// rate, so every few iterations the current point is polished by
/// projecting onto the affine hull of the violated rows, which is where
/// the zigzag limit lies.
fn phase_one(p: &QpProblem, start: &[f64], cap: usize) -> Result<Vec<f64>, QpError> {
    let m = p.u_hat.len();
    let r = p.g_matrix.len();
    let mut u = start.to_vec();

    for iter in 0..cap {
        if iter % 4 == 3 {
            if let Some(polished) = violated_set_projection(p, &u) {
                if p.max_violation(&polished) <= FEAS_TOL {
                    return Ok(polished);
                }
            }
        }
        let residuals: Vec<f64> = (0..r).map(|i| p.residual(&u, i)).collect();
        let max_violation = residuals.iter().fold(0.0f64, |acc, &v| acc.max(-v));
        if max_violation <= FEAS_TOL {
            return Ok(u);
        }

        // Gradient and generalized Hessian over the violated set.
        let mut grad = vec![0.0; m];
        let mut hess = vec![0.0; m * m];
        for i in 0..r {
            if residuals[i] < 0.0 {
                let row = &p.g_matrix[i];
                for a in 0..m {
                    grad[a] += residuals[i] * row[a];
                    for b in 0..m {
                        hess[a * m + b] += row[a] * row[b];
                    }
                }
            }
        }
        let grad_scale = grad.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if grad_scale <= 1e-12 * max_violation.max(1.0) {
            // Stationary point of the violation objective: certified least
            // infeasible.
            return Err(QpError::Infeasible { max_violation });
        }

        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let step = match solve_spd(&hess, &rhs, m) {
            Some(s) => s,
            None => return Err(QpError::Infeasible { max_violation }),
        };

        let alpha = exact_violation_line_search(p, &u, &step, &residuals);
        if alpha <= 0.0 {
            return Err(QpError::Infeasible { max_violation });
        }
        for a in 0..m {
            u[a] += alpha * step[a];
        }
    }
    let max_violation = p.max_violation(&u);
    if max_violation <= FEAS_TOL {
        Ok(u)
    } else {
        Err(QpError::Infeasible { max_violation })
    }
}

/// Least-norm correction landing exactly on the violated rows' affine hull:
/// `u + G_V^T (G_V G_V^T)^-1 (d_V - G_V u)`.
fn violated_set_projection(p: &QpProblem, u: &[f64]) -> Option<Vec<f64>> {
    let m = u.len();
    let violated: Vec<usize> = (0..p.g_matrix.len())
        .filter(|&i| p.residual(u, i) < -FEAS_TOL * 0.5)
        .collect();
    if violated.is_empty() || violated.len() > m {
        return None;
    }
    let w = violated.len();
    let mut gram = vec![0.0; w * w];
    let mut rhs = vec![0.0; w];
    for (a, &ia) in violated.iter().enumerate() {
        for (b, &ib) in violated.iter().enumerate() {
            gram[a * w + b] = dot(&p.g_matrix[ia], &p.g_matrix[ib]);
        }
        rhs[a] = -p.residual(u, ia);
    }
    let coeff = solve_spd(&gram, &rhs, w)?;
    let mut out = u.to_vec();
    for (a, &ia) in violated.iter().enumerate() {
        for c in 0..m {
            out[c] += coeff[a] * p.g_matrix[ia][c];
        }
    }
    Some(out)
}

/// Exact minimizer of `alpha -> 1/2 sum max(0, -(res_i - alpha s_i))^2`
/// along a descent direction, walking the breakpoints where constraints
/// change between violated and satisfied.
fn exact_violation_line_search(p: &QpProblem, u: &[f64], step: &[f64], residuals: &[f64]) -> f64 {
    let r = p.g_matrix.len();
    let slopes: Vec<f64> = (0..r).map(|i| dot(&p.g_matrix[i], step)).collect();
    let _ = u;

    // Violation of row i along the ray: viol_i(alpha) = -(res_i + alpha s_i),
    // active while positive.
    let mut breakpoints: Vec<(f64, usize)> = Vec::new();
    for i in 0..r {
        if slopes[i] != 0.0 {
            let a = -residuals[i] / slopes[i];
            if a > 0.0 && a.is_finite() {
                breakpoints.push((a, i));
            }
        }
    }
    breakpoints.sort_by(|a, b| a.0.total_cmp(&b.0));

    // F'(alpha) = sum_{active} (res_i + alpha s_i) s_i = c + alpha q over a
    // segment with fixed active set.
    let mut c = 0.0;
    let mut q = 0.0;
    for i in 0..r {
        let active_now = residuals[i] < 0.0 || (residuals[i] == 0.0 && slopes[i] < 0.0);
        if active_now {
            c += residuals[i] * slopes[i];
            q += slopes[i] * slopes[i];
        }
    }

    let mut lo = 0.0;
    let mut bp_iter = breakpoints.into_iter().peekable();
    loop {
        let hi = bp_iter.peek().map(|(a, _)| *a).unwrap_or(f64::INFINITY);
        if c + lo * q >= 0.0 {
            return lo;
        }
        if q > 0.0 {
            let vertex = -c / q;
            if vertex <= hi {
                return vertex.max(lo);
            }
        } else if hi.is_infinite() {
            // Descent never ends; the objective is unbounded below along
            // this ray only if it never flattens, which cannot happen for a
            // sum of squares. Treat as no progress.
            return lo;
        }
        // Cross the next breakpoint: toggle every row hitting zero there.
        let crossing = bp_iter.peek().map(|(a, _)| *a).unwrap_or(f64::INFINITY);
        while let Some(&(a, i)) = bp_iter.peek() {
            if a > crossing {
                break;
            }
            bp_iter.next();
            if slopes[i] > 0.0 {
                // Violation shrank to zero: row leaves the active sum.
                c -= residuals[i] * slopes[i];
                q -= slopes[i] * slopes[i];
            } else {
                // Row becomes violated past this point.
                c += residuals[i] * slopes[i];
                q += slopes[i] * slopes[i];
            }
        }
        lo = crossing;
    }
}

/// Equality-constrained projection of `u_hat` onto `{G_W u = d_W}`:
/// `x = u_hat + G_W^T lambda`, `(G_W G_W^T) lambda = d_W - G_W u_hat`.
fn eq_projection(p: &QpProblem, working: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = p.u_hat.len();
    if working.is_empty() {
        return Some((p.u_hat.clone(), Vec::new()));
    }
    let w = working.len();
    let mut gram = vec![0.0; w * w];
    let mut rhs = vec![0.0; w];
    for (a, &ia) in working.iter().enumerate() {
        for (b, &ib) in working.iter().enumerate() {
            gram[a * w + b] = dot(&p.g_matrix[ia], &p.g_matrix[ib]);
        }
        rhs[a] = p.d_vector[ia] - dot(&p.g_matrix[ia], &p.u_hat);
    }
    let lambda = solve_spd(&gram, &rhs, w)?;
    let mut x = p.u_hat.clone();
    for (a, &ia) in working.iter().enumerate() {
        for c in 0..m {
            x[c] += lambda[a] * p.g_matrix[ia][c];
        }
    }
    Some((x, lambda))
}

/// Solve the QP. The unique minimizer is returned together with the active
/// set and the iteration count; infeasible systems are detected in phase
/// one and reported, never silently projected.
pub fn solve(p: &QpProblem) -> Result<QpSolution, QpError> {
    solve_with_start(p, None)
}

/// [`solve`] with a caller-supplied starting point. When the caller holds a
/// feasibility certificate (the shared evading maneuver, for the filters)
/// passing it skips phase one entirely; an infeasible hint merely seeds it.
pub fn solve_with_start(p: &QpProblem, start: Option<&[f64]>) -> Result<QpSolution, QpError> {
    p.validate()?;
    let m = p.u_hat.len();
    let r = p.g_matrix.len();
    let cap = 100 * r;
    if let Some(s) = start {
        if s.len() != m {
            return Err(QpError::Malformed(format!(
                "start point has length {}, expected {m}",
                s.len()
            )));
        }
    }

    let mut iterations = 0usize;
    let mut u = if p.max_violation(&p.u_hat) <= FEAS_TOL {
        p.u_hat.clone()
    } else if let Some(s) = start.filter(|s| p.max_violation(s) <= FEAS_TOL) {
        s.to_vec()
    } else {
        phase_one(p, start.unwrap_or(&p.u_hat), cap)?
    };

    let mut working: Vec<usize> = Vec::new();
    loop {
        iterations += 1;
        if iterations > cap {
            return Err(QpError::IterationLimit);
        }

        let (x, lambda) = match eq_projection(p, &working) {
            Some(v) => v,
            None => return Err(QpError::IterationLimit),
        };
        let step_norm = x
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = u.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));

        if step_norm <= 1e-12 * scale {
            // Stationary on the working set; check multiplier signs.
            match lambda
                .iter()
                .enumerate()
                .filter(|(_, l)| **l < -KKT_TOL)
                .min_by(|a, b| a.1.total_cmp(b.1))
            {
                None => {
                    let mut active = working.clone();
                    active.sort_unstable();
                    return Ok(QpSolution {
                        u_star: x,
                        active_set: active,
                        iterations,
                    });
                }
                Some((drop_pos, _)) => {
                    working.remove(drop_pos);
                    continue;
                }
            }
        }

        // Step toward the projection, stopping at the first blocking row.
        let direction: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a - b).collect();
        let mut beta = 1.0f64;
        let mut blocker: Option<usize> = None;
        for i in 0..r {
            if working.contains(&i) {
                continue;
            }
            let slope = dot(&p.g_matrix[i], &direction);
            if slope < -1e-14 {
                let gap = p.residual(&u, i);
                let ratio = (gap / -slope).max(0.0);
                if ratio < beta {
                    beta = ratio;
                    blocker = Some(i);
                }
            }
        }
        for (c, du) in direction.iter().enumerate() {
            u[c] += beta * du;
        }
        if let Some(b) = blocker {
            working.push(b);
            if working.len() > m {
                // Cannot happen for independent rows; defensive.
                return Err(QpError::IterationLimit);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn box_rows_6() -> (Vec<Vec<f64>>, Vec<f64>) {
        // v_i in [1, 2], |omega_i| <= 1 for three vehicles, variable order
        // (v1, w1, v2, w2, v3, w3).
        let mut g = Vec::new();
        let mut d = Vec::new();
        for vehicle in 0..3 {
            let (vi, wi) = (2 * vehicle, 2 * vehicle + 1);
            let mut row = vec![0.0; 6];
            row[vi] = 1.0;
            g.push(row.clone());
            d.push(1.0);
            let mut row = vec![0.0; 6];
            row[vi] = -1.0;
            g.push(row);
            d.push(-2.0);
            let mut row = vec![0.0; 6];
            row[wi] = 1.0;
            g.push(row.clone());
            d.push(-1.0);
            let mut row = vec![0.0; 6];
            row[wi] = -1.0;
            g.push(row);
            d.push(-1.0);
        }
        (g, d)
    }

    #[test]
    fn nominal_already_feasible() {
        let p = QpProblem::new(
            vec![0.5, -0.25],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, -1.0],
        );
        let sol = solve(&p).unwrap();
        assert_eq!(sol.u_star, vec![0.5, -0.25]);
        assert!(sol.active_set.is_empty());
    }

    #[test]
    fn single_active_constraint() {
        let p = QpProblem::new(vec![0.0], vec![vec![1.0]], vec![1.0]);
        let sol = solve(&p).unwrap();
        assert!((sol.u_star[0] - 1.0).abs() < 1e-12);
        assert_eq!(sol.active_set, vec![0]);
    }

    /// The three-vehicle rows that require opposite turn directions from
    /// vehicle 1 admit no joint solution inside the actuator box.
    #[test]
    fn coupled_rows_infeasible() {
        let (mut g, mut d) = box_rows_6();
        g.push(vec![-0.4, -0.4, -0.4, -0.4, 0.0, 0.0]);
        d.push(0.0);
        g.push(vec![-0.4, 0.4, 0.0, 0.0, -0.4, 0.4]);
        d.push(0.0);
        let p = QpProblem::new(vec![1.5, 0.0, 1.5, 0.0, 1.5, 0.0], g, d);
        assert!(matches!(solve(&p), Err(QpError::Infeasible { .. })));
    }

    #[test]
    fn either_row_alone_is_feasible() {
        for row in [
            vec![-0.4, -0.4, -0.4, -0.4, 0.0, 0.0],
            vec![-0.4, 0.4, 0.0, 0.0, -0.4, 0.4],
        ] {
            let (mut g, mut d) = box_rows_6();
            g.push(row);
            d.push(0.0);
            let p = QpProblem::new(vec![1.5, 0.0, 1.5, 0.0, 1.5, 0.0], g, d);
            let sol = solve(&p).unwrap();
            assert!(p.max_violation(&sol.u_star) <= FEAS_TOL);
        }
    }

    #[test]
    fn non_binding_constraint_is_a_no_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let m = rng.gen_range(1..=4);
            let mut g: Vec<Vec<f64>> = Vec::new();
            let mut d = Vec::new();
            let interior: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for _ in 0..rng.gen_range(1..=8) {
                let row: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let slack = rng.gen_range(0.1..2.0);
                d.push(dot(&row, &interior) - slack);
                g.push(row);
            }
            let u_hat: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let base = solve(&QpProblem::new(u_hat.clone(), g.clone(), d.clone())).unwrap();

            // A row satisfied strictly at the solution cannot move it.
            let mut row: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if row.iter().all(|v| v.abs() < 1e-3) {
                row[0] = 1.0;
            }
            let rhs = dot(&row, &base.u_star) - rng.gen_range(0.5..1.5);
            g.push(row);
            d.push(rhs);
            let sol = solve(&QpProblem::new(u_hat, g, d)).unwrap();
            for (a, b) in sol.u_star.iter().zip(&base.u_star) {
                assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn solution_is_the_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..50 {
            let m = rng.gen_range(1..=4);
            let r = rng.gen_range(1..=12);
            let interior: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut g: Vec<Vec<f64>> = Vec::new();
            let mut d = Vec::new();
            for _ in 0..r {
                let row: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let slack = rng.gen_range(0.05..2.0);
                d.push(dot(&row, &interior) - slack);
                g.push(row);
            }
            let u_hat: Vec<f64> = (0..m).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let p = QpProblem::new(u_hat.clone(), g.clone(), d.clone());
            let sol = solve(&p).unwrap();
            assert!(p.max_violation(&sol.u_star) <= FEAS_TOL);

            let deviation: f64 = sol
                .u_star
                .iter()
                .zip(&u_hat)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            // No random feasible point may be closer to u_hat.
            for _ in 0..1000 {
                let candidate: Vec<f64> = interior
                    .iter()
                    .map(|c| c + rng.gen_range(-1.5..1.5))
                    .collect();
                if (0..g.len()).all(|i| dot(&g[i], &candidate) >= d[i]) {
                    let dev: f64 = candidate
                        .iter()
                        .zip(&u_hat)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    assert!(dev >= deviation - 1e-9);
                }
            }
        }
    }

    #[test]
    fn kkt_conditions_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..200 {
            let m = rng.gen_range(1..=4);
            let r = rng.gen_range(1..=12);
            let interior: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut g: Vec<Vec<f64>> = Vec::new();
            let mut d = Vec::new();
            for _ in 0..r {
                let row: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                d.push(dot(&row, &interior) - rng.gen_range(0.05..2.0));
                g.push(row);
            }
            let u_hat: Vec<f64> = (0..m).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let p = QpProblem::new(u_hat.clone(), g, d);
            let sol = solve(&p).unwrap();

            // Stationarity: u* - u_hat must lie in the cone of active rows.
            // Recompute multipliers from the active set and check them.
            if sol.active_set.is_empty() {
                for (a, b) in sol.u_star.iter().zip(&u_hat) {
                    assert!((a - b).abs() <= KKT_TOL);
                }
            } else {
                let w = sol.active_set.len();
                let mut gram = vec![0.0; w * w];
                let mut rhs = vec![0.0; w];
                for (a, &ia) in sol.active_set.iter().enumerate() {
                    for (b, &ib) in sol.active_set.iter().enumerate() {
                        gram[a * w + b] = dot(&p.g_matrix[ia], &p.g_matrix[ib]);
                    }
                    rhs[a] = dot(
                        &p.g_matrix[ia],
                        &sol.u_star
                            .iter()
                            .zip(&u_hat)
                            .map(|(x, h)| x - h)
                            .collect::<Vec<_>>(),
                    );
                }
                let lambda = solve_spd(&gram, &rhs, w).unwrap();
                let mut recon = vec![0.0; m];
                for (a, &ia) in sol.active_set.iter().enumerate() {
                    for c in 0..m {
                        recon[c] += lambda[a] * p.g_matrix[ia][c];
                    }
                }
                for c in 0..m {
                    let resid = (sol.u_star[c] - u_hat[c]) - recon[c];
                    assert!(resid.abs() <= 1e-7, "stationarity residual {resid}");
                }
                for l in &lambda {
                    assert!(*l >= -1e-7, "negative multiplier {l}");
                }
                for &ia in &sol.active_set {
                    assert!(p.residual(&sol.u_star, ia).abs() <= 1e-7);
                }
            }
        }
    }

    /// Scaling each row by a positive constant leaves the feasible set and
    /// therefore the minimizer unchanged.
    #[test]
    fn row_scaling_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..50 {
            let m = rng.gen_range(1..=3);
            let interior: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut g: Vec<Vec<f64>> = Vec::new();
            let mut d = Vec::new();
            for _ in 0..rng.gen_range(2..=8) {
                let row: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                d.push(dot(&row, &interior) - rng.gen_range(0.05..2.0));
                g.push(row);
            }
            let u_hat: Vec<f64> = (0..m).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let base = solve(&QpProblem::new(u_hat.clone(), g.clone(), d.clone())).unwrap();

            let mut g2 = g.clone();
            let mut d2 = d.clone();
            for i in 0..g2.len() {
                let s = rng.gen_range(0.1..10.0);
                for v in &mut g2[i] {
                    *v *= s;
                }
                d2[i] *= s;
            }
            let scaled = solve(&QpProblem::new(u_hat, g2, d2)).unwrap();
            for (a, b) in scaled.u_star.iter().zip(&base.u_star) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn farkas_certified_infeasibility_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for _ in 0..100 {
            let m = rng.gen_range(1..=4);
            let r = rng.gen_range(2..=8);
            // Build rows whose positive combination is zero while the same
            // combination of right-hand sides is positive: no solution.
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
            // Choose d with lambda . d = 1 > 0.
            let mut d: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cur: f64 = lambda.iter().zip(&d).map(|(l, v)| l * v).sum();
            let norm: f64 = lambda.iter().map(|l| l * l).sum();
            for (v, l) in d.iter_mut().zip(&lambda) {
                *v += (1.0 - cur) * l / norm;
            }
            let u_hat: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let p = QpProblem::new(u_hat, g, d);
            assert!(
                matches!(solve(&p), Err(QpError::Infeasible { .. })),
                "certified-infeasible problem not flagged"
            );
        }
    }

    #[test]
    fn malformed_problems_rejected() {
        assert!(matches!(
            solve(&QpProblem::new(vec![], vec![], vec![])),
            Err(QpError::Malformed(_))
        ));
        assert!(matches!(
            solve(&QpProblem::new(vec![0.0], vec![vec![1.0, 2.0]], vec![0.0])),
            Err(QpError::Malformed(_))
        ));
        assert!(matches!(
            solve(&QpProblem::new(vec![0.0], vec![vec![f64::NAN]], vec![0.0])),
            Err(QpError::Malformed(_))
        ));
    }
}
