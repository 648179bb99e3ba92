//! Dual ADMM for one convexified subproblem.
//!
//! The subproblem is
//!
//! ```text
//! min  p1_hat(s) - <g1, s> + p2(u) - <g2, u> + p3_hat(v)
//! s.t. f - s - u = 0,  s - v = 0
//! ```
//!
//! with `p1_hat = p1 + 1/(2 sigma_tilde) ||. - s_anchor||^2` and
//! `p3_hat(v) = sum_i (lambda3 - g_h[i]) ||v(:,i)||`. ADMM runs on its dual in
//! the variables `(x, y, z, x_hat, y_hat)`; the primal `(s, u, v)` are the
//! multipliers. With zero gradients and `sigma_tilde = inf` this is exactly
//! the convex destriping model.

use std::fmt::Write as _;

use log::{debug, trace};

use crate::error::{DestripeError, Result};
use crate::imagecore::ImageMatrix;
use crate::prox::{moreau_split, prox_p1_hat, prox_p2, prox_p3_hat};
use crate::scad::{convex_objective, objective_g, LinearizationGradients, ModelParams};

/// Relative slack of the descent inequality, `1e-8 (1 + |g(s_anchor)|)`.
pub const DESCENT_SLACK: f64 = 1e-8;

/// Upper end of the admissible dual step interval, `(1 + sqrt 5) / 2`.
pub const TAU_MAX: f64 = 1.618_033_988_749_895;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DadmmConfig {
    /// Augmented Lagrangian penalty.
    pub sigma: f64,
    /// Multiplier step, strictly inside `(0, (1 + sqrt 5)/2)`.
    pub tau: f64,
    /// KKT tolerance used in convex mode.
    pub tol: f64,
    pub max_iter: usize,
    /// Rebalance `sigma` by a factor 2 every 50 sweeps when the primal and
    /// dual residuals drift apart.
    pub adaptive_sigma: bool,
    /// Record one [`TraceRow`] per sweep.
    pub trace: bool,
    /// In subproblem mode, also require the outer descent inequality
    /// `g(s) + ||s - s_anchor||^2 / (4 sigma_tilde) <= g(s_anchor)` before
    /// stopping. The inexactness inequality alone does not imply it when the
    /// iterate is still far from the subproblem solution.
    pub descent_safeguard: bool,
}

impl Default for DadmmConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            tau: 1.618,
            tol: 2e-4,
            max_iter: 500,
            adaptive_sigma: false,
            trace: false,
            descent_safeguard: true,
        }
    }
}

impl DadmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(DestripeError::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        check_tau(self.tau)?;
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(DestripeError::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(DestripeError::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < TAU_MAX) {
        return Err(DestripeError::InvalidParameter(format!(
            "tau must lie in (0, (1+sqrt 5)/2), got {tau}"
        )));
    }
    Ok(())
}

/// Full iterate of the dual ADMM together with the frozen data of the
/// subproblem it solves.
#[derive(Debug, Clone, PartialEq)]
pub struct DadmmState {
    pub x: ImageMatrix,
    pub y: ImageMatrix,
    pub z: ImageMatrix,
    pub x_hat: ImageMatrix,
    pub y_hat: ImageMatrix,
    pub s: ImageMatrix,
    pub u: ImageMatrix,
    pub v: ImageMatrix,
    pub g1: ImageMatrix,
    pub g2: ImageMatrix,
    pub g_h: Vec<f64>,
    pub s_anchor: ImageMatrix,
    /// Proximal parameter of the outer loop; `f64::INFINITY` removes the
    /// proximal term.
    pub sigma_tilde: f64,
}

impl DadmmState {
    /// All-zero iterate for the given subproblem data.
    pub fn zeros(
        grads: LinearizationGradients,
        s_anchor: ImageMatrix,
        sigma_tilde: f64,
    ) -> Result<Self> {
        let (m, n) = s_anchor.shape();
        let z = ImageMatrix::zeros(m, n);
        let state = Self {
            x: z.clone(),
            y: z.clone(),
            z: z.clone(),
            x_hat: z.clone(),
            y_hat: z.clone(),
            s: z.clone(),
            u: z.clone(),
            v: z,
            g1: grads.g1,
            g2: grads.g2,
            g_h: grads.g_h,
            s_anchor,
            sigma_tilde,
        };
        state.validate()?;
        Ok(state)
    }

    /// Iterate whose primal part sits at the anchor, `(s, u, v) =
    /// (s_anchor, f - s_anchor, s_anchor)`, with zero dual variables.
    pub fn at_anchor(
        grads: LinearizationGradients,
        s_anchor: ImageMatrix,
        sigma_tilde: f64,
        f: &ImageMatrix,
    ) -> Result<Self> {
        f.check_same_shape(&s_anchor, "DadmmState::at_anchor")?;
        let mut state = Self::zeros(grads, s_anchor, sigma_tilde)?;
        state.s = state.s_anchor.clone();
        state.u = f.sub(&state.s_anchor);
        state.v = state.s_anchor.clone();
        Ok(state)
    }

    /// Zero iterate of the convex model (no gradients, no proximal term).
    pub fn convex(rows: usize, cols: usize) -> Self {
        Self::zeros(
            LinearizationGradients::zeros(rows, cols),
            ImageMatrix::zeros(rows, cols),
            f64::INFINITY,
        )
        .expect("zero state is valid")
    }

    /// Keeps the iterate but swaps in new subproblem data (used to warm-start
    /// the next outer iteration).
    pub fn rebind(
        mut self,
        grads: LinearizationGradients,
        s_anchor: ImageMatrix,
        sigma_tilde: f64,
    ) -> Result<Self> {
        self.g1 = grads.g1;
        self.g2 = grads.g2;
        self.g_h = grads.g_h;
        self.s_anchor = s_anchor;
        self.sigma_tilde = sigma_tilde;
        self.validate()?;
        Ok(self)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.s.shape()
    }

    pub fn is_convex_mode(&self) -> bool {
        self.sigma_tilde.is_infinite()
    }

    fn validate(&self) -> Result<()> {
        let op = "DadmmState";
        for m in [
            &self.y,
            &self.z,
            &self.x_hat,
            &self.y_hat,
            &self.s,
            &self.u,
            &self.v,
            &self.g1,
            &self.g2,
            &self.s_anchor,
        ] {
            self.x.check_same_shape(m, op)?;
        }
        if self.g_h.len() != self.x.cols() {
            return Err(crate::error::dim_err(op, "g_h length differs from column count"));
        }
        if !(self.sigma_tilde > 0.0) {
            return Err(DestripeError::InvalidParameter(format!(
                "sigma_tilde must be positive, got {}",
                self.sigma_tilde
            )));
        }
        Ok(())
    }
}

/// Every residual of one iterate plus the aggregate measures and the inner
/// stopping test.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `-x + y + g1 - z`
    pub r1: ImageMatrix,
    /// `-x + g2 - x_hat`
    pub r2: ImageMatrix,
    /// `-y - y_hat`
    pub r3: ImageMatrix,
    /// `s + u - f`
    pub r_x: ImageMatrix,
    /// `v - s`
    pub r_y: ImageMatrix,
    /// `s - Prox_{p1_hat}(s + z)`
    pub r_z: ImageMatrix,
    /// `u - Prox_{p2}(u + x_hat)`
    pub r_xhat: ImageMatrix,
    /// `v - Prox_{p3_hat}(v + y_hat)`
    pub r_yhat: ImageMatrix,
    pub r_p: f64,
    pub r_d: f64,
    pub r_c: f64,
    pub pert: f64,
    pub stop_lhs: f64,
    pub stop_rhs: f64,
    /// False when `sigma_tilde` is infinite and the inexactness test does not
    /// apply.
    pub stop_applicable: bool,
}

impl ResidualReport {
    /// `max{R_p, R_d, R_c}`
    pub fn kkt(&self) -> f64 {
        self.r_p.max(self.r_d).max(self.r_c)
    }

    /// `max{R_p, R_d}`, the outer-loop measure.
    pub fn kkt_outer(&self) -> f64 {
        self.r_p.max(self.r_d)
    }

    /// Whether the inexactness inequality `stop_lhs <= stop_rhs` holds.
    pub fn inexactness_met(&self) -> bool {
        self.stop_applicable && self.stop_lhs <= self.stop_rhs
    }
}

/// Solves `[2I -I; -I 2I] [x; y] = [a; b]` blockwise.
pub fn solve_xy_block(rhs_a: &ImageMatrix, rhs_b: &ImageMatrix) -> Result<(ImageMatrix, ImageMatrix)> {
    rhs_a.check_same_shape(rhs_b, "solve_xy_block")?;
    let third = 1.0 / 3.0;
    let x = rhs_a.zip_map(rhs_b, |a, b| (2.0 * a + b) * third);
    let y = rhs_a.zip_map(rhs_b, |a, b| (a + 2.0 * b) * third);
    Ok((x, y))
}

/// One sweep of the dual ADMM, returning the new iterate.
pub fn dadmm_step(
    state: &DadmmState,
    f: &ImageMatrix,
    params: &ModelParams,
    sigma: f64,
    tau: f64,
) -> Result<DadmmState> {
    let mut next = state.clone();
    step_in_place(&mut next, f, params, sigma, tau)?;
    Ok(next)
}

pub(crate) fn step_in_place(
    st: &mut DadmmState,
    f: &ImageMatrix,
    params: &ModelParams,
    sigma: f64,
    tau: f64,
) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(DestripeError::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    check_tau(tau)?;
    st.s.check_same_shape(f, "dadmm_step")?;
    let inv = 1.0 / sigma;
    let (m, n) = f.shape();

    // (1) (x, y) block
    let mut rhs_a = ImageMatrix::zeros(m, n);
    let mut rhs_b = ImageMatrix::zeros(m, n);
    {
        let ra = rhs_a.as_mut_slice();
        let rb = rhs_b.as_mut_slice();
        let (s, u, v, fv) = (st.s.as_slice(), st.u.as_slice(), st.v.as_slice(), f.as_slice());
        let (z, xh, yh) = (st.z.as_slice(), st.x_hat.as_slice(), st.y_hat.as_slice());
        let (g1, g2) = (st.g1.as_slice(), st.g2.as_slice());
        for k in 0..m * n {
            ra[k] = inv * (s[k] + u[k] - fv[k]) - (z[k] + xh[k] - g1[k] - g2[k]);
            rb[k] = inv * (v[k] - s[k]) + (z[k] - yh[k] - g1[k]);
        }
    }
    let (x, y) = solve_xy_block(&rhs_a, &rhs_b)?;
    st.x = x;
    st.y = y;

    // (2) conjugate proxes through the Moreau identity
    let w2 = ImageMatrix::from_fn(m, n, |i, j| {
        st.u[(i, j)] - sigma * st.x[(i, j)] + sigma * st.g2[(i, j)]
    });
    let (_, x_hat) = moreau_split(|w| prox_p2(w, sigma * params.lambda2), &w2, sigma)?;
    let w3 = st.v.zip_map(&st.y, |v, y| v - sigma * y);
    let g_h = &st.g_h;
    let (_, y_hat) = moreau_split(|w| prox_p3_hat(w, sigma, params.lambda3, g_h), &w3, sigma)?;
    let w1 = ImageMatrix::from_fn(m, n, |i, j| {
        st.s[(i, j)] + sigma * (st.y[(i, j)] - st.x[(i, j)] + st.g1[(i, j)])
    });
    let anchor = &st.s_anchor;
    let sigma_tilde = st.sigma_tilde;
    let (_, z) = moreau_split(
        |w| prox_p1_hat(w, sigma, sigma_tilde, anchor, params.lambda1),
        &w1,
        sigma,
    )?;
    st.x_hat = x_hat;
    st.y_hat = y_hat;
    st.z = z;

    // (3) multiplier updates
    let ts = tau * sigma;
    {
        let (x, y, z) = (st.x.as_slice(), st.y.as_slice(), st.z.as_slice());
        let (xh, yh) = (st.x_hat.as_slice(), st.y_hat.as_slice());
        let (g1, g2) = (st.g1.as_slice(), st.g2.as_slice());
        let s = st.s.as_mut_slice();
        for k in 0..m * n {
            s[k] += ts * (-x[k] + y[k] + g1[k] - z[k]);
        }
        let u = st.u.as_mut_slice();
        for k in 0..m * n {
            u[k] += ts * (-x[k] + g2[k] - xh[k]);
        }
        let v = st.v.as_mut_slice();
        for k in 0..m * n {
            v[k] += ts * (-y[k] - yh[k]);
        }
    }
    Ok(())
}

/// Residuals, KKT measures and the inexactness test for one iterate.
pub fn compute_residuals(
    state: &DadmmState,
    f: &ImageMatrix,
    params: &ModelParams,
) -> Result<ResidualReport> {
    let st = state;
    st.s.check_same_shape(f, "compute_residuals")?;
    let (m, n) = f.shape();

    let r1 = ImageMatrix::from_fn(m, n, |i, j| {
        -st.x[(i, j)] + st.y[(i, j)] + st.g1[(i, j)] - st.z[(i, j)]
    });
    let r2 = ImageMatrix::from_fn(m, n, |i, j| -st.x[(i, j)] + st.g2[(i, j)] - st.x_hat[(i, j)]);
    let r3 = st.y.zip_map(&st.y_hat, |y, yh| -y - yh);
    let r_x = ImageMatrix::from_fn(m, n, |i, j| st.s[(i, j)] + st.u[(i, j)] - f[(i, j)]);
    let r_y = st.v.sub(&st.s);

    let p1_pt = prox_p1_hat(&st.s.add(&st.z), 1.0, st.sigma_tilde, &st.s_anchor, params.lambda1)?;
    let r_z = st.s.sub(&p1_pt);
    let p2_pt = prox_p2(&st.u.add(&st.x_hat), params.lambda2)?;
    let r_xhat = st.u.sub(&p2_pt);
    let p3_pt = prox_p3_hat(&st.v.add(&st.y_hat), 1.0, params.lambda3, &st.g_h)?;
    let r_yhat = st.v.sub(&p3_pt);

    let pert = (st.s.dot(&r1)
        + st.u.dot(&r2)
        + st.v.dot(&r3)
        + r_z.dot(&p1_pt)
        + r_xhat.dot(&p2_pt)
        + r_yhat.dot(&p3_pt))
    .abs();

    let scale = 1.0 + f.norm();
    let r_p = (r_x.norm() + r_y.norm()) / scale;
    let r_d = (r2.norm() + r1.norm() + r3.norm()) / scale;
    let r_c = (r_z.norm() + r_xhat.norm() + r_yhat.norm()) / scale;

    let inexact = 2.0 * params.p1(&r_z)?
        + 2.0 * params.p2(&r_x.sub(&r_xhat))?
        + 2.0 * params.p3(&r_y.sub(&r_yhat))
        + pert;
    let (stop_lhs, stop_rhs, stop_applicable) = if st.sigma_tilde.is_finite() {
        (
            inexact + r_z.norm_sq() / (2.0 * st.sigma_tilde),
            st.s.sub(&st.s_anchor).norm_sq() / (4.0 * st.sigma_tilde),
            true,
        )
    } else {
        (inexact, 0.0, false)
    };

    Ok(ResidualReport {
        r1,
        r2,
        r3,
        r_x,
        r_y,
        r_z,
        r_xhat,
        r_yhat,
        r_p,
        r_d,
        r_c,
        pert,
        stop_lhs,
        stop_rhs,
        stop_applicable,
    })
}

/// One line of the per-sweep trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub r_p: f64,
    pub r_d: f64,
    pub r_c: f64,
    pub stop_lhs: f64,
    pub stop_rhs: f64,
    pub objective: f64,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "iteration,R_p,R_d,R_c,stop_lhs,stop_rhs,objective";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.iteration, self.r_p, self.r_d, self.r_c, self.stop_lhs, self.stop_rhs, self.objective
        )
    }
}

/// Renders trace rows as CSV text with a header line.
pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TraceRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv());
    }
    out
}

/// Result of [`dadmm_solve`].
#[derive(Debug, Clone)]
pub struct DadmmOutcome {
    pub state: DadmmState,
    pub report: ResidualReport,
    /// Sweeps performed.
    pub iterations: usize,
    /// Whether the stopping rule fired before the sweep cap.
    pub converged: bool,
    /// Penalty in effect at exit (differs from the configured one only with
    /// adaptive sigma).
    pub final_sigma: f64,
    pub trace: Vec<TraceRow>,
}

/// Runs dual ADMM sweeps until the stopping rule or the sweep cap.
///
/// With finite `sigma_tilde` the rule is the inexactness inequality
/// `stop_lhs <= stop_rhs` (plus the descent inequality when
/// `descent_safeguard` is set) and a cold start begins at the anchor; with
/// `sigma_tilde = inf` it is `max{R_p, R_d, R_c} < tol` and a cold start is
/// all zeros. Hitting the cap is reported through `converged = false`, not as
/// an error.
#[allow(clippy::too_many_arguments)]
pub fn dadmm_solve(
    f: &ImageMatrix,
    params: &ModelParams,
    config: &DadmmConfig,
    grads: LinearizationGradients,
    s_anchor: ImageMatrix,
    sigma_tilde: f64,
    warm_start: Option<DadmmState>,
) -> Result<DadmmOutcome> {
    config.validate()?;
    params.validate()?;
    if !f.is_finite() {
        return Err(DestripeError::NonFinite("dadmm_solve"));
    }
    f.check_same_shape(&s_anchor, "dadmm_solve")?;
    let state = match warm_start {
        Some(st) => st.rebind(grads, s_anchor, sigma_tilde)?,
        None if sigma_tilde.is_finite() => DadmmState::at_anchor(grads, s_anchor, sigma_tilde, f)?,
        None => DadmmState::zeros(grads, s_anchor, sigma_tilde)?,
    };
    run_from(state, f, params, config)
}

/// Shorthand for the convex model solved from a zero start.
pub fn dadmm_solve_convex(
    f: &ImageMatrix,
    params: &ModelParams,
    config: &DadmmConfig,
) -> Result<DadmmOutcome> {
    let (m, n) = f.shape();
    dadmm_solve(
        f,
        params,
        config,
        LinearizationGradients::zeros(m, n),
        ImageMatrix::zeros(m, n),
        f64::INFINITY,
        None,
    )
}

/// Stopping test of one sweep. `anchor_g` is `g(s_anchor)` when the descent
/// safeguard is active.
fn stop_met(
    report: &ResidualReport,
    state: &DadmmState,
    f: &ImageMatrix,
    params: &ModelParams,
    tol: f64,
    anchor_g: Option<f64>,
) -> Result<bool> {
    if state.is_convex_mode() {
        return Ok(report.kkt() < tol);
    }
    if !report.inexactness_met() {
        return Ok(false);
    }
    match anchor_g {
        Some(g0) => {
            let step = state.s.sub(&state.s_anchor).norm_sq() / (4.0 * state.sigma_tilde);
            Ok(objective_g(&state.s, f, params)? + step <= g0 + DESCENT_SLACK * (1.0 + g0.abs()))
        }
        None => Ok(true),
    }
}

fn trace_objective(st: &DadmmState, f: &ImageMatrix, params: &ModelParams) -> Result<f64> {
    if st.is_convex_mode() {
        convex_objective(&st.s, f, params)
    } else {
        objective_g(&st.s, f, params)
    }
}

fn run_from(
    mut state: DadmmState,
    f: &ImageMatrix,
    params: &ModelParams,
    config: &DadmmConfig,
) -> Result<DadmmOutcome> {
    let anchor_g = if config.descent_safeguard && !state.is_convex_mode() {
        Some(objective_g(&state.s_anchor, f, params)?)
    } else {
        None
    };
    let mut sigma = config.sigma;
    let mut trace = Vec::new();
    let mut report = compute_residuals(&state, f, params)?;
    if config.trace {
        trace.push(make_row(0, &report, trace_objective(&state, f, params)?));
    }
    if stop_met(&report, &state, f, params, config.tol, anchor_g)? {
        return Ok(DadmmOutcome {
            state,
            report,
            iterations: 0,
            converged: true,
            final_sigma: sigma,
            trace,
        });
    }
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=config.max_iter {
        step_in_place(&mut state, f, params, sigma, config.tau)?;
        report = compute_residuals(&state, f, params)?;
        iterations = it;
        if config.trace {
            trace.push(make_row(it, &report, trace_objective(&state, f, params)?));
        }
        trace!(
            "sweep {it}: R_p={:.3e} R_d={:.3e} R_c={:.3e} lhs={:.3e} rhs={:.3e}",
            report.r_p,
            report.r_d,
            report.r_c,
            report.stop_lhs,
            report.stop_rhs
        );
        if stop_met(&report, &state, f, params, config.tol, anchor_g)? {
            converged = true;
            break;
        }
        if config.adaptive_sigma && it % 50 == 0 {
            sigma = rebalance_sigma(sigma, &report);
        }
    }
    debug!(
        "dadmm finished after {iterations} sweeps (converged: {converged}, kkt {:.3e})",
        report.kkt()
    );
    Ok(DadmmOutcome {
        state,
        report,
        iterations,
        converged,
        final_sigma: sigma,
        trace,
    })
}

/// Factor-2 penalty update balancing the two residual families.
///
/// `R_d` measures violation of the dual constraints, which the `(s, u, v)`
/// ascent step drives down at rate `sigma`; `R_p` measures the primal
/// feasibility carried by the multipliers, which a smaller `sigma` tightens.
pub(crate) fn rebalance_sigma(sigma: f64, report: &ResidualReport) -> f64 {
    const RATIO: f64 = 5.0;
    if report.r_d > RATIO * report.r_p {
        sigma * 2.0
    } else if report.r_p > RATIO * report.r_d {
        sigma * 0.5
    } else {
        sigma
    }
}

fn make_row(iteration: usize, r: &ResidualReport, objective: f64) -> TraceRow {
    TraceRow {
        iteration,
        r_p: r.r_p,
        r_d: r.r_d,
        r_c: r.r_c,
        stop_lhs: r.stop_lhs,
        stop_rhs: r.stop_rhs,
        objective,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(0.4, 0.6, 0.5).unwrap()
    }

    #[test]
    fn xy_block_examples() {
        let z = ImageMatrix::zeros(2, 2);
        let (x, y) = solve_xy_block(&z, &z).unwrap();
        assert_eq!((x.norm(), y.norm()), (0.0, 0.0));

        let three = ImageMatrix::filled(1, 1, 3.0);
        let (x, y) = solve_xy_block(&three, &three).unwrap();
        assert_eq!((x[(0, 0)], y[(0, 0)]), (3.0, 3.0));

        let (x, y) = solve_xy_block(&three, &ImageMatrix::zeros(1, 1)).unwrap();
        assert!((x[(0, 0)] - 2.0).abs() < 1e-15 && (y[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(solve_xy_block(&three, &z).is_err());
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let f = ImageMatrix::zeros(4, 5);
        let st = DadmmState::convex(4, 5);
        let next = dadmm_step(&st, &f, &params(), 1.0, 1.618).unwrap();
        assert_eq!(next, st);
        let rep = compute_residuals(&st, &f, &params()).unwrap();
        assert_eq!(rep.kkt(), 0.0);
        assert_eq!(rep.pert, 0.0);
    }

    #[test]
    fn step_rejects_bad_parameters() {
        let f = ImageMatrix::zeros(3, 3);
        let st = DadmmState::convex(3, 3);
        assert!(dadmm_step(&st, &f, &params(), 0.0, 1.0).is_err());
        assert!(dadmm_step(&st, &f, &params(), 1.0, 1.62).is_err());
        assert!(dadmm_step(&st, &f, &params(), 1.0, 0.0).is_err());
        let cfg = DadmmConfig {
            tau: 2.0,
            ..DadmmConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_input_returns_immediately() {
        let f = ImageMatrix::zeros(6, 6);
        let out = dadmm_solve_convex(&f, &params(), &DadmmConfig::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
        assert_eq!(out.state.s.norm(), 0.0);
    }

    #[test]
    fn convex_mode_marks_inexactness_not_applicable() {
        let f = ImageMatrix::from_fn(4, 4, |i, j| (i * j) as f64 * 0.1);
        let st = DadmmState::convex(4, 4);
        let rep = compute_residuals(&st, &f, &params()).unwrap();
        assert!(!rep.stop_applicable);
        assert_eq!(rep.stop_rhs, 0.0);
        assert!(!rep.inexactness_met());
    }

    #[test]
    fn trace_csv_layout() {
        let rows = [TraceRow {
            iteration: 3,
            r_p: 1.0,
            r_d: 0.5,
            r_c: 0.25,
            stop_lhs: 0.0,
            stop_rhs: 0.0,
            objective: 2.0,
        }];
        let csv = trace_to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), TraceRow::CSV_HEADER);
        assert_eq!(lines.next().unwrap().split(',').count(), 7);
    }
}
