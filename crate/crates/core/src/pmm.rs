//! Inexact proximal majorization-minimization (PMM) outer loop.
//!
//! Each outer iteration freezes the gradients of the concave part at `s^k`,
//! adds `1/(2 sigma_tilde_k) ||s - s^k||^2` and hands the resulting convex
//! problem to [`dadmm_solve`]. The inner solve stops on the inexactness
//! inequality, which is what makes `g(s^{k+1}) + 1/(4 sigma_tilde_k)
//! ||s^{k+1} - s^k||^2 <= g(s^k)` hold; every step is checked against it.

use std::fmt::Write as _;
use std::time::Instant;

use log::{debug, info, warn};

use crate::baselines::{convex_dadmm_solve, padmm_solve, ConvexHistory};
pub use crate::dadmm::DESCENT_SLACK;
use crate::dadmm::{dadmm_solve, DadmmConfig, DadmmState};
use crate::error::{DestripeError, Result};
use crate::imagecore::ImageMatrix;
use crate::scad::{linearization_gradients, objective_g, ModelParams};

/// Proximal parameters `sigma_tilde_k` of the outer loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaTildeSchedule {
    Constant(f64),
    /// `max(floor, start * ratio^k)` with `0 < ratio <= 1`.
    Geometric { start: f64, ratio: f64, floor: f64 },
}

impl SigmaTildeSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            Self::Constant(v) => v,
            Self::Geometric { start, ratio, floor } => (start * ratio.powi(k as i32)).max(floor),
        }
    }

    /// Largest value the schedule takes.
    pub fn max_value(&self) -> f64 {
        match *self {
            Self::Constant(v) => v,
            Self::Geometric { start, floor, .. } => start.max(floor),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Constant(v) => v.is_finite() && v > 0.0,
            Self::Geometric { start, ratio, floor } => {
                start.is_finite()
                    && start > 0.0
                    && floor.is_finite()
                    && floor > 0.0
                    && ratio > 0.0
                    && ratio <= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(DestripeError::InvalidParameter(format!(
                "sigma_tilde schedule must be positive and convergent: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmmConfig {
    pub sigma_tilde: SigmaTildeSchedule,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub inner_max_iter: usize,
    pub sigma: f64,
    pub tau: f64,
    pub adaptive_sigma: bool,
    /// Start each inner solve from the previous inner state.
    pub warm_start: bool,
    /// Keep the per-sweep inner traces in the history.
    pub trace: bool,
    /// See [`DadmmConfig::descent_safeguard`].
    pub descent_safeguard: bool,
}

impl Default for PmmConfig {
    fn default() -> Self {
        Self {
            sigma_tilde: SigmaTildeSchedule::Constant(1.0),
            outer_tol: 2e-4,
            outer_max_iter: 5,
            inner_max_iter: 100,
            sigma: 1.0,
            tau: 1.618,
            adaptive_sigma: false,
            warm_start: true,
            trace: false,
            descent_safeguard: true,
        }
    }
}

impl PmmConfig {
    pub fn validate(&self) -> Result<()> {
        self.sigma_tilde.validate()?;
        if !(self.outer_tol.is_finite() && self.outer_tol > 0.0) {
            return Err(DestripeError::InvalidParameter(format!(
                "outer tolerance must be positive, got {}",
                self.outer_tol
            )));
        }
        if self.outer_max_iter == 0 || self.inner_max_iter == 0 {
            return Err(DestripeError::InvalidParameter(
                "iteration caps must be at least 1".into(),
            ));
        }
        self.inner_config().validate()
    }

    /// Inner solver settings; the tolerance only matters in convex mode.
    pub fn inner_config(&self) -> DadmmConfig {
        DadmmConfig {
            sigma: self.sigma,
            tau: self.tau,
            tol: self.outer_tol,
            max_iter: self.inner_max_iter,
            adaptive_sigma: self.adaptive_sigma,
            trace: self.trace,
            descent_safeguard: self.descent_safeguard,
        }
    }
}

/// One outer iteration as recorded in [`PmmHistory`].
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    /// Outer index `k` (the step goes from `s^k` to `s^{k+1}`).
    pub iteration: usize,
    pub sigma_tilde: f64,
    /// `g(s^k)`
    pub objective_prev: f64,
    /// `g(s^{k+1})`
    pub objective: f64,
    /// `||s^{k+1} - s^k||`
    pub step_norm: f64,
    pub inner_iterations: usize,
    /// Whether the inner loop met the inexactness inequality before its cap.
    pub inner_converged: bool,
    pub r_p: f64,
    pub r_d: f64,
    pub stop_lhs: f64,
    pub stop_rhs: f64,
    /// `g(s^k) - g(s^{k+1}) - 1/(4 sigma_tilde_k) ||s^{k+1} - s^k||^2`;
    /// nonnegative up to the slack when the descent inequality holds.
    pub descent_margin: f64,
    pub accepted: bool,
    /// Not written to CSV, so histories stay reproducible.
    pub wall_time_s: f64,
}

impl OuterRecord {
    pub fn descent_tolerance(&self) -> f64 {
        DESCENT_SLACK * (1.0 + self.objective_prev.abs())
    }

    pub fn descent_holds(&self) -> bool {
        self.descent_margin >= -self.descent_tolerance()
    }
}


#[derive(Debug, Clone, PartialEq, Eq, Copy)]
pub enum PmmStop {
    /// `max{R_p, R_d} < outer_tol`
    Tolerance,
    /// Outer iteration cap reached.
    IterationCap,
    /// The last inner solve hit its cap and its step would have increased
    /// the objective; the step was discarded.
    RejectedStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmmHistory {
    pub records: Vec<OuterRecord>,
    pub stop: PmmStop,
    /// Inner traces, one per outer iteration, when tracing is on.
    pub inner_traces: Vec<Vec<crate::dadmm::TraceRow>>,
    /// `g(s^0)`
    pub initial_objective: f64,
    /// Sweeps spent computing `s^0` (convex warm start), zero otherwise.
    pub init_iterations: usize,
}

impl PmmHistory {
    pub fn outer_iterations(&self) -> usize {
        self.records.len()
    }

    /// Inner sweeps of the PMM loop proper.
    pub fn inner_iterations(&self) -> usize {
        self.records.iter().map(|r| r.inner_iterations).sum()
    }

    /// Inner sweeps plus the sweeps spent on `s^0`.
    pub fn total_sweeps(&self) -> usize {
        self.inner_iterations() + self.init_iterations
    }

    pub fn converged(&self) -> bool {
        self.stop == PmmStop::Tolerance
    }

    /// `max{R_p, R_d}` of the last accepted step.
    pub fn kkt(&self) -> f64 {
        self.records
            .iter()
            .rev()
            .find(|r| r.accepted)
            .map_or(f64::NAN, |r| r.r_p.max(r.r_d))
    }

    pub fn final_objective(&self) -> f64 {
        self.records
            .iter()
            .rev()
            .find(|r| r.accepted)
            .map_or(self.initial_objective, |r| r.objective)
    }

    pub const CSV_HEADER: &'static str = "iteration,sigma_tilde,objective_prev,objective,step_norm,inner_iterations,inner_converged,R_p,R_d,stop_lhs,stop_rhs,descent_margin,accepted";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{},{},{:e},{:e},{:e},{:e},{:e},{}",
                r.iteration,
                r.sigma_tilde,
                r.objective_prev,
                r.objective,
                r.step_norm,
                r.inner_iterations,
                r.inner_converged,
                r.r_p,
                r.r_d,
                r.stop_lhs,
                r.stop_rhs,
                r.descent_margin,
                r.accepted
            );
        }
        out
    }
}

/// Runs the PMM loop from `s^0 = 0`.
pub fn pmm_solve(
    f: &ImageMatrix,
    params: &ModelParams,
    config: &PmmConfig,
) -> Result<(ImageMatrix, PmmHistory)> {
    let (m, n) = f.shape();
    pmm_solve_from(f, params, config, ImageMatrix::zeros(m, n))
}

/// Runs the PMM loop from a caller-supplied starting point.
pub fn pmm_solve_from(
    f: &ImageMatrix,
    params: &ModelParams,
    config: &PmmConfig,
    s0: ImageMatrix,
) -> Result<(ImageMatrix, PmmHistory)> {
    config.validate()?;
    params.validate()?;
    if !f.is_finite() || !s0.is_finite() {
        return Err(DestripeError::NonFinite("pmm_solve"));
    }
    f.check_same_shape(&s0, "pmm_solve")?;
    let inner_cfg = config.inner_config();

    let mut s = s0;
    let mut g_prev = objective_g(&s, f, params)?;
    let mut history = PmmHistory {
        records: Vec::new(),
        stop: PmmStop::IterationCap,
        inner_traces: Vec::new(),
        initial_objective: g_prev,
        init_iterations: 0,
    };
    let mut warm: Option<DadmmState> = None;

    for k in 0..config.outer_max_iter {
        let clock = Instant::now();
        let sigma_tilde = config.sigma_tilde.at(k);
        let grads = linearization_gradients(&s, f, params)?;
        let start = if config.warm_start { warm.take() } else { None };
        let out = dadmm_solve(f, params, &inner_cfg, grads, s.clone(), sigma_tilde, start)?;

        let s_next = out.state.s.clone();
        let g_next = objective_g(&s_next, f, params)?;
        let step_sq = s_next.sub(&s).norm_sq();
        let margin = g_prev - g_next - step_sq / (4.0 * sigma_tilde);
        let mut record = OuterRecord {
            iteration: k,
            sigma_tilde,
            objective_prev: g_prev,
            objective: g_next,
            step_norm: step_sq.sqrt(),
            inner_iterations: out.iterations,
            inner_converged: out.converged,
            r_p: out.report.r_p,
            r_d: out.report.r_d,
            stop_lhs: out.report.stop_lhs,
            stop_rhs: out.report.stop_rhs,
            descent_margin: margin,
            accepted: true,
            wall_time_s: 0.0,
        };
        if config.trace {
            history.inner_traces.push(out.trace.clone());
        }

        if !record.descent_holds() {
            if out.converged {
                return Err(DestripeError::DescentViolation {
                    iteration: k,
                    lhs: g_next + step_sq / (4.0 * sigma_tilde),
                    rhs: g_prev + record.descent_tolerance(),
                });
            }
            warn!(
                "outer iteration {k}: inner cap reached and step fails descent by {:.3e}; keeping s^{k}",
                -margin
            );
            record.accepted = false;
            record.wall_time_s = clock.elapsed().as_secs_f64();
            history.records.push(record);
            history.stop = PmmStop::RejectedStep;
            return Ok((s, history));
        }

        record.wall_time_s = clock.elapsed().as_secs_f64();
        info!(
            "outer {k}: g = {g_next:.6e}, step = {:.3e}, inner = {} ({}), R_p = {:.2e}, R_d = {:.2e}",
            record.step_norm,
            out.iterations,
            if out.converged { "criterion met" } else { "cap" },
            out.report.r_p,
            out.report.r_d
        );
        let outer_kkt = out.report.kkt_outer();
        history.records.push(record);
        s = s_next;
        g_prev = g_next;
        warm = Some(out.state);
        if outer_kkt < config.outer_tol {
            history.stop = PmmStop::Tolerance;
            break;
        }
    }
    debug!(
        "pmm stopped ({:?}) after {} outer / {} inner iterations",
        history.stop,
        history.outer_iterations(),
        history.inner_iterations()
    );
    Ok((s, history))
}

/// Which model and solver [`destripe`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Nonconvex SCAD model, PMM outer loop with dual ADMM inside.
    Nonconvex,
    /// Convex model, dual ADMM.
    ConvexDadmm,
    /// Convex model, primal ADMM.
    ConvexPadmm,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Nonconvex => "nonconvex",
            Self::ConvexDadmm => "dADMM",
            Self::ConvexPadmm => "pADMM",
        }
    }
}

/// Where the nonconvex method starts.
///
/// From `s^0 = 0` the linearized SCAD weights treat every stripe jump as an
/// edge once stripes are large against `alpha * lambda`, and the loop tends to
/// stay near zero. Starting from the convex solution avoids that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PmmStart {
    Zero,
    /// `s^0` is the convex dual ADMM solution, computed with the convex
    /// solver settings.
    Convex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DestripeConfig {
    pub method: Method,
    /// Starting point of the nonconvex method.
    pub start: PmmStart,
    /// Outer loop settings (nonconvex model).
    pub pmm: PmmConfig,
    /// Solver settings for the convex baselines.
    pub convex: DadmmConfig,
}

impl Default for DestripeConfig {
    fn default() -> Self {
        Self {
            method: Method::Nonconvex,
            start: PmmStart::Convex,
            pmm: PmmConfig::default(),
            convex: DadmmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveHistory {
    Pmm(PmmHistory),
    Convex(ConvexHistory),
}

impl SolveHistory {
    /// The KKT measure of the method's own stopping rule.
    pub fn kkt(&self) -> f64 {
        match self {
            Self::Pmm(h) => h.kkt(),
            Self::Convex(h) => h.kkt,
        }
    }

    pub fn outer_iterations(&self) -> usize {
        match self {
            Self::Pmm(h) => h.outer_iterations(),
            Self::Convex(_) => 1,
        }
    }

    /// All inner sweeps, including a convex warm start.
    pub fn inner_iterations(&self) -> usize {
        match self {
            Self::Pmm(h) => h.total_sweeps(),
            Self::Convex(h) => h.iterations,
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            Self::Pmm(h) => h.converged(),
            Self::Convex(h) => h.converged,
        }
    }

    pub fn to_csv(&self) -> String {
        match self {
            Self::Pmm(h) => h.to_csv(),
            Self::Convex(h) => h.to_csv(),
        }
    }
}

/// Destriped image `u = f - s` with the stripe estimate and solver history.
#[derive(Debug, Clone)]
pub struct DestripeOutcome {
    pub u: ImageMatrix,
    pub s: ImageMatrix,
    pub history: SolveHistory,
}

pub fn destripe(f: &ImageMatrix, params: &ModelParams, config: &DestripeConfig) -> Result<DestripeOutcome> {
    let (s, history) = match config.method {
        Method::Nonconvex => {
            let (s, h) = match config.start {
                PmmStart::Zero => pmm_solve(f, params, &config.pmm)?,
                PmmStart::Convex => {
                    let (s0, init) = convex_dadmm_solve(f, params, &config.convex)?;
                    let (s, mut h) = pmm_solve_from(f, params, &config.pmm, s0)?;
                    h.init_iterations = init.iterations;
                    (s, h)
                }
            };
            (s, SolveHistory::Pmm(h))
        }
        Method::ConvexDadmm => {
            let (s, h) = convex_dadmm_solve(f, params, &config.convex)?;
            (s, SolveHistory::Convex(h))
        }
        Method::ConvexPadmm => {
            let (s, h) = padmm_solve(f, params, &config.convex)?;
            (s, SolveHistory::Convex(h))
        }
    };
    let u = f.sub(&s).with_peak(f.peak());
    Ok(DestripeOutcome { u, s, history })
}
