//! Run configuration: a flat key-value file overlaid by command-line flags.
//!
//! The file is flat TOML (no tables). Recognized keys:
//!
//! ```text
//! model          = "nonconvex" | "convex"
//! solver         = "pmm" | "dadmm" | "padmm"
//! lambda1        = 20.0        # vertical smoothness of the stripes
//! lambda2        = 1.0         # horizontal smoothness of the image
//! lambda3        = 3.0         # column group sparsity
//! alpha          = 3.7         # SCAD shape
//! sigma          = 1.0         # ADMM penalty
//! tau            = 1.618       # dual step length factor
//! adaptive_sigma = false
//! tol            = 2e-4        # convex stopping tolerance
//! max_iter       = 500         # convex sweep cap
//! outer_tol      = 2e-4
//! outer_max_iter = 5
//! inner_max_iter = 100
//! sigma_tilde    = 1.0         # proximal parameter (first value when decaying)
//! sigma_tilde_ratio = 1.0      # < 1 gives a geometric schedule
//! sigma_tilde_floor = 1.0
//! start          = "convex" | "zero"   # nonconvex starting point
//! orientation    = "vertical" | "horizontal"
//! input          = "f.png"
//! output         = "u.png"
//! stripes        = "s.f64"
//! history        = "history.csv"
//! seed           = 0
//! ```
//!
//! Unknown keys are rejected. Flags always win over the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use destripe_core::dadmm::DadmmConfig;
use destripe_core::pmm::{PmmConfig, SigmaTildeSchedule};
use destripe_core::{DestripeConfig, Method, ModelParams, PmmStart};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Convex,
    Nonconvex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Pmm,
    Dadmm,
    Padmm,
}

/// Stripe direction. Horizontal stripes are handled by rotating the image a
/// quarter turn, solving, and rotating back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Vertical,
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StartPoint {
    Zero,
    Convex,
}

/// Everything a single destriping run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub solver: Solver,
    pub params: ModelParams,
    pub pmm: PmmConfig,
    pub convex: DadmmConfig,
    pub start: PmmStart,
    pub orientation: Orientation,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub stripes: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: Model::Nonconvex,
            solver: Solver::Pmm,
            params: ModelParams::new(20.0, 1.0, 3.0).expect("default weights are valid"),
            pmm: PmmConfig::default(),
            convex: DadmmConfig::default(),
            start: PmmStart::Convex,
            orientation: Orientation::Vertical,
            input: None,
            output: None,
            stripes: None,
            history: None,
            seed: 0,
        }
    }
}

/// One layer of settings; every field is optional so layers can be stacked.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    #[arg(long, value_enum)]
    pub solver: Option<Solver>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub lambda3: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub adaptive_sigma: Option<bool>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub outer_tol: Option<f64>,
    #[arg(long)]
    pub outer_max_iter: Option<usize>,
    #[arg(long)]
    pub inner_max_iter: Option<usize>,
    #[arg(long)]
    pub sigma_tilde: Option<f64>,
    #[arg(long)]
    pub sigma_tilde_ratio: Option<f64>,
    #[arg(long)]
    pub sigma_tilde_floor: Option<f64>,
    #[arg(long, value_enum)]
    pub start: Option<StartPoint>,
    #[arg(long, value_enum)]
    pub orientation: Option<Orientation>,
    #[arg(long, short = 'i')]
    pub input: Option<PathBuf>,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub stripes: Option<PathBuf>,
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigLayer {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(self, top: ConfigLayer) -> ConfigLayer {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigLayer { $($f: top.$f.or(self.$f)),* } };
        }
        pick!(
            model, solver, lambda1, lambda2, lambda3, alpha, sigma, tau, adaptive_sigma, tol,
            max_iter, outer_tol, outer_max_iter, inner_max_iter, sigma_tilde, sigma_tilde_ratio,
            sigma_tilde_floor, start, orientation, input, output, stripes, history, seed
        )
    }

    /// Applies the layer on top of the defaults and validates the result.
    pub fn resolve(self) -> Result<RunConfig> {
        let d = RunConfig::default();
        let model = self.model.unwrap_or(match self.solver {
            Some(Solver::Dadmm | Solver::Padmm) => Model::Convex,
            _ => d.model,
        });
        let solver = self.solver.unwrap_or(match model {
            Model::Convex => Solver::Dadmm,
            Model::Nonconvex => Solver::Pmm,
        });
        let params = ModelParams::with_alpha(
            self.lambda1.unwrap_or(d.params.lambda1),
            self.lambda2.unwrap_or(d.params.lambda2),
            self.lambda3.unwrap_or(d.params.lambda3),
            self.alpha.unwrap_or(d.params.alpha),
        )?;
        let sigma = self.sigma.unwrap_or(d.convex.sigma);
        let tau = self.tau.unwrap_or(d.convex.tau);
        let adaptive_sigma = self.adaptive_sigma.unwrap_or(false);
        let convex = DadmmConfig {
            sigma,
            tau,
            adaptive_sigma,
            tol: self.tol.unwrap_or(d.convex.tol),
            max_iter: self.max_iter.unwrap_or(d.convex.max_iter),
            ..d.convex
        };
        let st0 = self.sigma_tilde.unwrap_or(1.0);
        let ratio = self.sigma_tilde_ratio.unwrap_or(1.0);
        let sigma_tilde = if ratio == 1.0 {
            SigmaTildeSchedule::Constant(st0)
        } else {
            SigmaTildeSchedule::Geometric {
                start: st0,
                ratio,
                floor: self.sigma_tilde_floor.unwrap_or(st0.min(1.0)),
            }
        };
        let pmm = PmmConfig {
            sigma_tilde,
            sigma,
            tau,
            adaptive_sigma,
            outer_tol: self.outer_tol.unwrap_or(d.pmm.outer_tol),
            outer_max_iter: self.outer_max_iter.unwrap_or(d.pmm.outer_max_iter),
            inner_max_iter: self.inner_max_iter.unwrap_or(d.pmm.inner_max_iter),
            ..d.pmm
        };
        let start = match self.start {
            Some(StartPoint::Zero) => PmmStart::Zero,
            Some(StartPoint::Convex) => PmmStart::Convex,
            None => d.start,
        };
        let cfg = RunConfig {
            model,
            solver,
            params,
            pmm,
            convex,
            start,
            orientation: self.orientation.unwrap_or_default(),
            input: self.input,
            output: self.output,
            stripes: self.stripes,
            history: self.history,
            seed: self.seed.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn method(&self) -> Result<Method> {
        Ok(match (self.model, self.solver) {
            (Model::Nonconvex, Solver::Pmm) => Method::Nonconvex,
            (Model::Convex, Solver::Dadmm) => Method::ConvexDadmm,
            (Model::Convex, Solver::Padmm) => Method::ConvexPadmm,
            (m, s) => bail!(
                "solver {s:?} does not fit model {m:?} (pmm needs nonconvex; dadmm and padmm need convex)"
            ),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.method()?;
        self.params.validate()?;
        self.pmm.validate()?;
        self.convex.validate()?;
        Ok(())
    }

    pub fn destripe_config(&self) -> Result<DestripeConfig> {
        Ok(DestripeConfig {
            method: self.method()?,
            start: self.start,
            pmm: self.pmm.clone(),
            convex: self.convex.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = ConfigLayer::parse("lambda1 = 4.0\nlambda3 = 2.0\nsolver = \"padmm\"\n").unwrap();
        let flags = ConfigLayer {
            lambda1: Some(9.0),
            ..ConfigLayer::default()
        };
        let cfg = file.overlay(flags).resolve().unwrap();
        assert_eq!(cfg.params.lambda1, 9.0);
        assert_eq!(cfg.params.lambda3, 2.0);
        assert_eq!(cfg.model, Model::Convex);
        assert_eq!(cfg.method().unwrap(), Method::ConvexPadmm);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_pairs() {
        assert!(ConfigLayer::parse("lambda4 = 1.0").is_err());
        let bad = ConfigLayer {
            model: Some(Model::Nonconvex),
            solver: Some(Solver::Dadmm),
            ..ConfigLayer::default()
        };
        assert!(bad.resolve().is_err());
        let neg = ConfigLayer {
            lambda2: Some(-1.0),
            ..ConfigLayer::default()
        };
        assert!(neg.resolve().is_err());
    }

    #[test]
    fn geometric_schedule_from_ratio() {
        let cfg = ConfigLayer::parse("sigma_tilde = 8.0\nsigma_tilde_ratio = 0.5\nsigma_tilde_floor = 2.0")
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(cfg.pmm.sigma_tilde.at(0), 8.0);
        assert_eq!(cfg.pmm.sigma_tilde.at(5), 2.0);
    }
}
