//! Weight selection by exhaustive search over `(lambda1, lambda3)`.
//!
//! `lambda2` stays at 1: scaling all three weights by the same positive factor
//! does not move the convex minimizer, so one weight can be pinned.

use std::fmt::Write as _;

use anyhow::{ensure, Result};
use destripe_core::metrics::evaluate;
use destripe_core::{destripe, DestripeConfig, ImageMatrix, ModelParams};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lambda1: Vec<f64>,
    pub lambda3: Vec<f64>,
}

impl GridSpec {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.lambda1
            .iter()
            .flat_map(|&a| self.lambda3.iter().map(move |&b| (a, b)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            !self.lambda1.is_empty() && !self.lambda3.is_empty(),
            "the weight grid is empty"
        );
        for &l in self.lambda1.iter().chain(&self.lambda3) {
            ensure!(l.is_finite() && l > 0.0, "grid weights must be positive, got {l}");
        }
        Ok(())
    }

    pub fn params(lambda1: f64, lambda3: f64) -> Result<ModelParams> {
        Ok(ModelParams::new(lambda1, 1.0, lambda3)?)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lambda1: vec![5.0, 10.0, 20.0, 50.0],
            lambda3: vec![2.0, 3.0, 5.0, 10.0],
        }
    }
}

/// Score of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScore {
    pub lambda1: f64,
    pub lambda3: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub kkt: f64,
    pub outer_iter: usize,
    pub inner_iter: usize,
    pub converged: bool,
}

/// Index of the best score: highest PSNR, then highest SSIM, then smallest
/// `lambda1`, then smallest `lambda3`. NaN scores never win.
pub fn select_best(scores: &[GridScore]) -> Option<usize> {
    let better = |a: &GridScore, b: &GridScore| {
        if a.psnr != b.psnr {
            return a.psnr > b.psnr;
        }
        if a.ssim != b.ssim {
            return a.ssim > b.ssim;
        }
        if a.lambda1 != b.lambda1 {
            return a.lambda1 < b.lambda1;
        }
        a.lambda3 < b.lambda3
    };
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if s.psnr.is_nan() || s.ssim.is_nan() {
            continue;
        }
        if best.is_none_or(|b| better(s, &scores[b])) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub scores: Vec<GridScore>,
    pub best: usize,
}

impl GridResult {
    pub fn best_score(&self) -> &GridScore {
        &self.scores[self.best]
    }

    pub fn best_params(&self) -> Result<ModelParams> {
        let b = self.best_score();
        GridSpec::params(b.lambda1, b.lambda3)
    }

    pub const CSV_HEADER: &'static str =
        "lambda1,lambda2,lambda3,psnr,ssim,kkt,outer_iter,inner_iter,converged,selected";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (i, s) in self.scores.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},1,{},{},{},{},{},{},{},{}",
                s.lambda1,
                s.lambda3,
                s.psnr,
                s.ssim,
                s.kkt,
                s.outer_iter,
                s.inner_iter,
                s.converged,
                i == self.best
            );
        }
        out
    }
}

/// Runs `config` at every grid point on `f` and scores the result against
/// `truth`. Points run in parallel on the current rayon pool; the score order
/// follows the grid order.
pub fn grid_search(
    f: &ImageMatrix,
    truth: &ImageMatrix,
    config: &DestripeConfig,
    grid: &GridSpec,
) -> Result<GridResult> {
    grid.validate()?;
    ensure!(
        f.shape() == truth.shape(),
        "ground truth is {:?} but the input is {:?}",
        truth.shape(),
        f.shape()
    );
    let scores = grid
        .points()
        .into_par_iter()
        .map(|(l1, l3)| -> Result<GridScore> {
            let p = GridSpec::params(l1, l3)?;
            let out = destripe(f, &p, config)?;
            let m = evaluate(&out.u, truth)?;
            Ok(GridScore {
                lambda1: l1,
                lambda3: l3,
                psnr: m.psnr,
                ssim: m.ssim,
                kkt: out.history.kkt(),
                outer_iter: out.history.outer_iterations(),
                inner_iter: out.history.inner_iterations(),
                converged: out.history.converged(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = select_best(&scores).ok_or_else(|| anyhow::anyhow!("no grid point produced a finite score"))?;
    Ok(GridResult { scores, best })
}
