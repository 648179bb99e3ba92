//! Subcommand bodies. Each returns the process exit status on success.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use destripe_core::dadmm::trace_to_csv;
use destripe_core::metrics::evaluate;
use destripe_core::pmm::{PmmConfig, SigmaTildeSchedule, SolveHistory};
use destripe_core::synth::{degrade, generate_stripes, synthetic_scene, StripeMode, StripeProfile, StripeSpec};
use destripe_core::{destripe, DestripeOutcome, ImageMatrix};

use crate::bench::{run_suite, select_cases, SuiteConfig};
use crate::config::{ConfigLayer, Orientation, RunConfig};
use crate::grid::{grid_search, GridSpec};
use crate::io::{read_matrix, write_matrix};

/// Exit status: success.
pub const EXIT_OK: u8 = 0;
/// Exit status: bad arguments or configuration.
pub const EXIT_USAGE: u8 = 1;
/// Exit status: the run itself failed.
pub const EXIT_RUNTIME: u8 = 2;
/// Exit status: a solver stopped on its iteration cap and `--strict` was set.
pub const EXIT_CAPPED: u8 = 3;

/// Marks an error as a usage problem (exit status 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(UsageError(format!("{e:#}")))
}

/// Reads an input, optionally forcing its peak.
pub fn load(path: &Path, peak: Option<f64>) -> Result<ImageMatrix> {
    let m = read_matrix(path)?;
    Ok(match peak {
        Some(p) => m.with_peak(p),
        None => m,
    })
}

/// Builds the run configuration from an optional file and the flag layer.
pub fn resolve_config(file: Option<&Path>, flags: ConfigLayer) -> Result<RunConfig> {
    let base = match file {
        Some(p) => ConfigLayer::from_file(p).map_err(usage)?,
        None => ConfigLayer::default(),
    };
    base.overlay(flags).resolve().map_err(usage)
}

/// Solves with the stripe direction handled by rotation.
pub fn run_oriented(f: &ImageMatrix, cfg: &RunConfig) -> Result<DestripeOutcome> {
    let dcfg = cfg.destripe_config()?;
    Ok(match cfg.orientation {
        Orientation::Vertical => destripe(f, &cfg.params, &dcfg)?,
        Orientation::Horizontal => {
            let out = destripe(&f.rotate90_ccw(), &cfg.params, &dcfg)?;
            DestripeOutcome {
                u: out.u.rotate90_cw(),
                s: out.s.rotate90_cw(),
                history: out.history,
            }
        }
    })
}

fn sibling(path: &Path, suffix: &str, ext: Option<&str>) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = ext
        .map(str::to_string)
        .or_else(|| path.extension().and_then(|e| e.to_str()).map(str::to_string))
        .unwrap_or_else(|| "f64".into());
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn required(p: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    p.clone()
        .ok_or_else(|| usage(anyhow::anyhow!("missing {what} (set --{what} or `{what} = ...` in the config)")))
}

pub fn cmd_destripe(cfg: &RunConfig, peak: Option<f64>, strict: bool) -> Result<u8> {
    let input = required(&cfg.input, "input")?;
    let output = required(&cfg.output, "output")?;
    let stripes = cfg.stripes.clone().unwrap_or_else(|| sibling(&output, "_stripes", None));
    let history = cfg.history.clone().unwrap_or_else(|| sibling(&output, "_history", Some("csv")));

    let f = load(&input, peak)?;
    let clock = Instant::now();
    let out = run_oriented(&f, cfg)?;
    let elapsed = clock.elapsed().as_secs_f64();

    write_matrix(&output, &out.u)?;
    write_matrix(&stripes, &out.s)?;
    std::fs::write(&history, out.history.to_csv())
        .with_context(|| format!("writing {}", history.display()))?;

    let h = &out.history;
    println!(
        "{}: kkt {:.3e}, outer {}, inner {}, {} in {:.2} s",
        cfg.method()?.label(),
        h.kkt(),
        h.outer_iterations(),
        h.inner_iterations(),
        if h.converged() { "converged" } else { "stopped at cap" },
        elapsed
    );
    if let SolveHistory::Pmm(p) = h {
        println!("stop reason: {:?}", p.stop);
    }
    Ok(if strict && !h.converged() { EXIT_CAPPED } else { EXIT_OK })
}

/// Stripe settings of the `degrade` command.
#[derive(Debug, Clone)]
pub struct DegradeArgs {
    pub clean: Option<PathBuf>,
    pub scene_size: Option<(usize, usize)>,
    pub scale: f64,
    pub spec: StripeSpec,
    pub output: PathBuf,
    pub stripes: Option<PathBuf>,
    pub clean_out: Option<PathBuf>,
    pub peak: Option<f64>,
}

impl DegradeArgs {
    pub fn stripe_spec(
        period: Option<usize>,
        density: Option<f64>,
        amplitude: f64,
        smooth: bool,
        seed: u64,
    ) -> Result<StripeSpec> {
        let mode = match (period, density) {
            (Some(p), None) => StripeMode::Periodic { period: p },
            (None, Some(d)) => StripeMode::Nonperiodic { density: d },
            (None, None) => StripeMode::Periodic { period: 4 },
            (Some(_), Some(_)) => return Err(usage(anyhow::anyhow!("give --period or --density, not both"))),
        };
        let spec = StripeSpec {
            mode,
            amplitude,
            profile: if smooth { StripeProfile::Smooth } else { StripeProfile::Constant },
            seed,
        };
        spec.validate().map_err(|e| usage(e.into()))?;
        Ok(spec)
    }
}

pub fn cmd_degrade(a: &DegradeArgs) -> Result<u8> {
    let u = match (&a.clean, a.scene_size) {
        (Some(p), None) => load(p, a.peak)?,
        (None, Some((m, n))) => synthetic_scene(m, n, a.spec.seed).scale(a.scale).with_peak(a.scale),
        _ => return Err(usage(anyhow::anyhow!("give exactly one of --clean and --scene"))),
    };
    let s = generate_stripes(&a.spec, u.rows(), u.cols())?;
    let f = degrade(&u, &s)?;
    write_matrix(&a.output, &f)?;
    if let Some(p) = &a.stripes {
        write_matrix(p, &s)?;
    }
    if let Some(p) = &a.clean_out {
        write_matrix(p, &u)?;
    }
    let m = evaluate(&f, &u)?;
    println!("degraded: psnr {:.4} dB, ssim {:.6}", m.psnr, m.ssim);
    Ok(EXIT_OK)
}

pub fn cmd_evaluate(estimate: &Path, reference: &Path, peak: Option<f64>, csv_out: Option<&Path>) -> Result<u8> {
    let est = load(estimate, peak)?;
    let reference = load(reference, peak)?;
    let m = evaluate(&est, &reference)?;
    println!("mse {}\npsnr {}\nssim {}", m.mse, m.psnr, m.ssim);
    if let Some(p) = csv_out {
        std::fs::write(p, format!("mse,psnr,ssim\n{},{},{}\n", m.mse, m.psnr, m.ssim))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(EXIT_OK)
}

/// Settings of the `benchmark` command that are not part of [`SuiteConfig`].
#[derive(Debug, Clone)]
pub struct BenchOutputs {
    pub csv: PathBuf,
    pub table: Option<PathBuf>,
    pub grid: Option<PathBuf>,
    pub threads: usize,
    pub strict: bool,
}

pub fn cmd_benchmark(cfg: &SuiteConfig, out: &BenchOutputs) -> Result<u8> {
    cfg.validate().map_err(usage)?;
    let report = run_suite(cfg, out.threads)?;
    std::fs::write(&out.csv, report.to_csv()).with_context(|| format!("writing {}", out.csv.display()))?;
    let table = report.to_table();
    print!("{table}");
    if let Some(p) = &out.table {
        std::fs::write(p, &table).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &out.grid {
        std::fs::write(p, report.grid_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    if report.any_failed() {
        for e in report.errors() {
            log::error!("{e}");
        }
        return Ok(EXIT_RUNTIME);
    }
    Ok(if out.strict && report.any_capped() { EXIT_CAPPED } else { EXIT_OK })
}

/// Builds a suite from command-line pieces.
pub fn suite_from_args(
    size: usize,
    scene_seed: u64,
    scale: f64,
    cases: &[String],
    grid: GridSpec,
    sigma_tilde: f64,
    timing: bool,
) -> Result<SuiteConfig> {
    let cases = if cases.is_empty() {
        crate::bench::default_cases()
    } else {
        select_cases(cases).map_err(usage)?
    };
    Ok(SuiteConfig {
        size,
        scene_seed,
        scale,
        cases,
        grid,
        pmm: PmmConfig {
            sigma_tilde: SigmaTildeSchedule::Constant(sigma_tilde),
            ..PmmConfig::default()
        },
        timing,
        ..SuiteConfig::default()
    })
}

pub fn cmd_grid_search(cfg: &RunConfig, truth: &Path, grid: &GridSpec, peak: Option<f64>, out: Option<&Path>) -> Result<u8> {
    grid.validate().map_err(usage)?;
    let input = required(&cfg.input, "input")?;
    let f = load(&input, peak)?;
    let truth = load(truth, peak)?;
    let (f, truth) = match cfg.orientation {
        Orientation::Vertical => (f, truth),
        Orientation::Horizontal => (f.rotate90_ccw(), truth.rotate90_ccw()),
    };
    let res = grid_search(&f, &truth, &cfg.destripe_config()?, grid)?;
    let b = res.best_score();
    println!(
        "best: lambda1 {} lambda2 1 lambda3 {} (psnr {:.4}, ssim {:.6})",
        b.lambda1, b.lambda3, b.psnr, b.ssim
    );
    if let Some(p) = out {
        std::fs::write(p, res.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_trace(cfg: &RunConfig, peak: Option<f64>, out: &Path) -> Result<u8> {
    let input = required(&cfg.input, "input")?;
    let f = load(&input, peak)?;
    let mut cfg = cfg.clone();
    cfg.pmm.trace = true;
    cfg.convex.trace = true;
    let res = run_oriented(&f, &cfg)?;
    let text = match &res.history {
        SolveHistory::Convex(h) => trace_to_csv(&h.trace),
        SolveHistory::Pmm(h) => {
            let mut s = String::from("outer,");
            s.push_str(destripe_core::dadmm::TraceRow::CSV_HEADER);
            s.push('\n');
            for (k, rows) in h.inner_traces.iter().enumerate() {
                for r in rows {
                    let _ = write!(s, "{k},{}", r.to_csv());
                    if !s.ends_with('\n') {
                        s.push('\n');
                    }
                }
            }
            s
        }
    };
    std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} sweeps to {}", res.history.inner_iterations(), out.display());
    Ok(EXIT_OK)
}
