//! Synthetic benchmark: three nonperiodic and three periodic stripe cases on
//! a seeded scene, each solved by primal ADMM, dual ADMM (both on the convex
//! model) and the nonconvex method, with weights tuned per method by grid
//! search against the clean scene.
//!
//! The nonconvex method starts from the dual ADMM solution at the same grid
//! point. Its time and sweep count include that warm start.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use destripe_core::baselines::{convex_dadmm_solve, padmm_solve, ConvexHistory};
use destripe_core::dadmm::DadmmConfig;
use destripe_core::metrics::{evaluate, MetricReport};
use destripe_core::pmm::{pmm_solve_from, PmmConfig, PmmHistory, PmmStop};
use destripe_core::synth::{degrade, generate_stripes, synthetic_scene, StripeMode, StripeProfile, StripeSpec};
use destripe_core::ImageMatrix;
use rayon::prelude::*;

use crate::grid::{select_best, GridScore, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Nonperiodic,
    Periodic,
}

impl NoiseMode {
    pub fn label(self) -> &'static str {
        match self {
            Self::Nonperiodic => "nonperiodic",
            Self::Periodic => "periodic",
        }
    }
}

/// One degradation of the benchmark scene. Stripe amplitudes are given for
/// unit-range data and scaled with the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchCase {
    pub name: &'static str,
    pub mode: NoiseMode,
    /// 1-based index within its noise mode.
    pub index: usize,
    pub stripes: StripeSpec,
}

pub fn default_cases() -> Vec<BenchCase> {
    let case = |name, mode, index, stripe_mode, amplitude, profile, seed| BenchCase {
        name,
        mode,
        index,
        stripes: StripeSpec {
            mode: stripe_mode,
            amplitude,
            profile,
            seed,
        },
    };
    use NoiseMode::{Nonperiodic as N, Periodic as P};
    use StripeProfile::{Constant, Smooth};
    vec![
        case("np1", N, 1, StripeMode::Nonperiodic { density: 0.1 }, 0.1, Constant, 4),
        case("np2", N, 2, StripeMode::Nonperiodic { density: 0.2 }, 0.2, Constant, 5),
        case("np3", N, 3, StripeMode::Nonperiodic { density: 0.3 }, 0.3, Smooth, 6),
        case("p1", P, 1, StripeMode::Periodic { period: 4 }, 0.1, Constant, 1),
        case("p2", P, 2, StripeMode::Periodic { period: 6 }, 0.2, Constant, 2),
        case("p3", P, 3, StripeMode::Periodic { period: 8 }, 0.3, Smooth, 3),
    ]
}

/// Looks cases up by name (`np1` ... `p3`).
pub fn select_cases(names: &[String]) -> Result<Vec<BenchCase>> {
    let all = default_cases();
    names
        .iter()
        .map(|n| {
            all.iter()
                .find(|c| c.name == n)
                .cloned()
                .with_context(|| format!("unknown case {n:?} (known: np1 np2 np3 p1 p2 p3)"))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub size: usize,
    pub scene_seed: u64,
    /// Intensity scale of the scene; 255 gives 8-bit data.
    pub scale: f64,
    pub cases: Vec<BenchCase>,
    pub grid: GridSpec,
    pub pmm: PmmConfig,
    pub convex: DadmmConfig,
    /// Record wall-clock times. Off makes the CSV reproducible byte for byte.
    pub timing: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            size: 128,
            scene_seed: 11,
            scale: 255.0,
            cases: default_cases(),
            grid: GridSpec::default(),
            pmm: PmmConfig::default(),
            convex: DadmmConfig::default(),
            timing: true,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.size >= 2, "scene size must be at least 2");
        ensure!(self.scale.is_finite() && self.scale > 0.0, "scale must be positive");
        ensure!(!self.cases.is_empty(), "the suite has no cases");
        self.grid.validate()?;
        self.pmm.validate()?;
        self.convex.validate()?;
        for c in &self.cases {
            c.stripes.validate()?;
        }
        Ok(())
    }

    /// Clean scene and degraded image of one case.
    pub fn instance(&self, case: &BenchCase) -> Result<(ImageMatrix, ImageMatrix)> {
        let u = synthetic_scene(self.size, self.size, self.scene_seed)
            .scale(self.scale)
            .with_peak(self.scale);
        let spec = StripeSpec {
            amplitude: case.stripes.amplitude * self.scale,
            ..case.stripes
        };
        let s = generate_stripes(&spec, self.size, self.size)?;
        let f = degrade(&u, &s)?;
        Ok((u, f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchMethod {
    Padmm,
    Dadmm,
    Nonconvex,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 3] = [Self::Padmm, Self::Dadmm, Self::Nonconvex];

    pub fn label(self) -> &'static str {
        match self {
            Self::Padmm => "pADMM",
            Self::Dadmm => "dADMM",
            Self::Nonconvex => "nonconvex",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunHistory {
    Convex(ConvexHistory),
    Pmm(PmmHistory),
}

/// One solve at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub metrics: MetricReport,
    pub kkt: f64,
    pub outer_iter: usize,
    pub inner_iter: usize,
    pub converged: bool,
    pub time_s: f64,
    pub history: RunHistory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPointRuns {
    pub lambda1: f64,
    pub lambda3: f64,
    /// Indexed like [`BenchMethod::ALL`]; errors are kept as messages.
    pub runs: [std::result::Result<MethodRun, String>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub case: BenchCase,
    pub degraded: MetricReport,
    pub points: Vec<GridPointRuns>,
    /// Selected grid point per method, `None` when every point failed.
    pub best: [Option<usize>; 3],
}

impl CaseResult {
    pub fn selected(&self, method: BenchMethod) -> Option<(&GridPointRuns, &MethodRun)> {
        let k = BenchMethod::ALL.iter().position(|&m| m == method).expect("known method");
        let p = &self.points[self.best[k]?];
        p.runs[k].as_ref().ok().map(|r| (p, r))
    }

    fn failed(&self) -> bool {
        self.points.iter().any(|p| p.runs.iter().any(|r| r.is_err()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub cases: Vec<CaseResult>,
    pub timing: bool,
}

/// A row of the result table.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub noise_mode: String,
    pub case: usize,
    pub method: String,
    pub failed: bool,
    pub kkt: Option<f64>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub time_s: Option<f64>,
    pub outer_iter: Option<usize>,
    pub inner_iter: Option<usize>,
}

pub const CSV_HEADER: &str = "noise_mode,case,method,kkt,psnr,ssim,time_s,outer_iter,inner_iter";

fn field<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn parse_field<T: std::str::FromStr>(s: &str) -> Result<Option<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    if s == "NA" {
        Ok(None)
    } else {
        Ok(Some(s.parse::<T>().with_context(|| format!("bad value {s:?}"))?))
    }
}

impl BenchRow {
    fn csv_line(&self) -> String {
        let kkt = if self.failed { "FAILED".to_string() } else { field(self.kkt) };
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.noise_mode,
            self.case,
            self.method,
            kkt,
            field(self.psnr),
            field(self.ssim),
            field(self.time_s),
            field(self.outer_iter),
            field(self.inner_iter)
        )
    }
}

/// Reads rows written by [`BenchReport::to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<BenchRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    ensure!(header.join(",") == CSV_HEADER, "unexpected header {header:?}");
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        ensure!(rec.len() == 9, "row has {} fields", rec.len());
        let failed = &rec[3] == "FAILED";
        rows.push(BenchRow {
            noise_mode: rec[0].to_string(),
            case: rec[1].parse()?,
            method: rec[2].to_string(),
            failed,
            kkt: if failed { None } else { parse_field(&rec[3])? },
            psnr: parse_field(&rec[4])?,
            ssim: parse_field(&rec[5])?,
            time_s: parse_field(&rec[6])?,
            outer_iter: parse_field(&rec[7])?,
            inner_iter: parse_field(&rec[8])?,
        });
    }
    Ok(rows)
}

impl BenchReport {
    /// Four rows per case: degraded, pADMM, dADMM, nonconvex.
    pub fn rows(&self) -> Vec<BenchRow> {
        let mut rows = Vec::new();
        for c in &self.cases {
            let base = |method: &str| BenchRow {
                noise_mode: c.case.mode.label().to_string(),
                case: c.case.index,
                method: method.to_string(),
                failed: false,
                kkt: None,
                psnr: None,
                ssim: None,
                time_s: None,
                outer_iter: None,
                inner_iter: None,
            };
            rows.push(BenchRow {
                psnr: Some(c.degraded.psnr),
                ssim: Some(c.degraded.ssim),
                ..base("degraded")
            });
            for m in BenchMethod::ALL {
                rows.push(match c.selected(m) {
                    Some((_, r)) => BenchRow {
                        kkt: Some(r.kkt),
                        psnr: Some(r.metrics.psnr),
                        ssim: Some(r.metrics.ssim),
                        time_s: self.timing.then_some(r.time_s),
                        outer_iter: Some(r.outer_iter),
                        inner_iter: Some(r.inner_iter),
                        ..base(m.label())
                    },
                    None => BenchRow {
                        failed: true,
                        ..base(m.label())
                    },
                });
            }
            if c.failed() {
                for r in rows.iter_mut().rev().take(3) {
                    r.failed = true;
                }
            }
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in self.rows() {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }

    /// Aligned plain-text version of the CSV.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>4}  {:<10} {:>10} {:>8} {:>7} {:>8} {:>5} {:>6}",
            "noise_mode", "case", "method", "KKT", "PSNR", "SSIM", "time_s", "outer", "inner"
        );
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        for r in self.rows() {
            if r.failed {
                let _ = writeln!(out, "{:<12} {:>4}  {:<10} {:>10}", r.noise_mode, r.case, r.method, "FAILED");
                continue;
            }
            let _ = writeln!(
                out,
                "{:<12} {:>4}  {:<10} {:>10} {:>8} {:>7} {:>8} {:>5} {:>6}",
                r.noise_mode,
                r.case,
                r.method,
                opt(r.kkt.map(|v| format!("{v:.2e}"))),
                opt(r.psnr.map(|v| format!("{v:.2}"))),
                opt(r.ssim.map(|v| format!("{v:.4}"))),
                opt(r.time_s.map(|v| format!("{v:.2}"))),
                opt(r.outer_iter.map(|v| v.to_string())),
                opt(r.inner_iter.map(|v| v.to_string())),
            );
        }
        out
    }

    pub const GRID_CSV_HEADER: &'static str =
        "noise_mode,case,method,lambda1,lambda2,lambda3,psnr,ssim,kkt,outer_iter,inner_iter,converged,selected";

    /// Every grid point of every case and method.
    pub fn grid_csv(&self) -> String {
        let mut out = String::from(Self::GRID_CSV_HEADER);
        out.push('\n');
        for c in &self.cases {
            for (k, m) in BenchMethod::ALL.iter().enumerate() {
                for (i, p) in c.points.iter().enumerate() {
                    let prefix = format!("{},{},{},{},1,{}", c.case.mode.label(), c.case.index, m.label(), p.lambda1, p.lambda3);
                    let selected = c.best[k] == Some(i);
                    match &p.runs[k] {
                        Ok(r) => {
                            let _ = writeln!(
                                out,
                                "{prefix},{},{},{},{},{},{},{selected}",
                                r.metrics.psnr, r.metrics.ssim, r.kkt, r.outer_iter, r.inner_iter, r.converged
                            );
                        }
                        Err(_) => {
                            let _ = writeln!(out, "{prefix},FAILED,NA,NA,NA,NA,NA,false");
                        }
                    }
                }
            }
        }
        out
    }

    /// Any solve anywhere in the suite failed.
    pub fn any_failed(&self) -> bool {
        self.cases.iter().any(|c| c.failed())
    }

    /// Some selected run stopped on an iteration cap instead of its tolerance.
    pub fn any_capped(&self) -> bool {
        self.cases
            .iter()
            .flat_map(|c| BenchMethod::ALL.map(|m| c.selected(m)))
            .flatten()
            .any(|(_, r)| !r.converged)
    }

    /// All error messages, labelled by case, method and grid point.
    pub fn errors(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.cases {
            for p in &c.points {
                for (m, r) in BenchMethod::ALL.iter().zip(&p.runs) {
                    if let Err(e) = r {
                        out.push(format!(
                            "{} {} lambda1={} lambda3={}: {e}",
                            c.case.name,
                            m.label(),
                            p.lambda1,
                            p.lambda3
                        ));
                    }
                }
            }
        }
        out
    }
}

fn run_point(cfg: &SuiteConfig, u: &ImageMatrix, f: &ImageMatrix, l1: f64, l3: f64) -> GridPointRuns {
    let p = match GridSpec::params(l1, l3) {
        Ok(p) => p,
        Err(e) => {
            let msg = e.to_string();
            return GridPointRuns {
                lambda1: l1,
                lambda3: l3,
                runs: [Err(msg.clone()), Err(msg.clone()), Err(msg)],
            };
        }
    };
    let score = |s: &ImageMatrix| evaluate(&f.sub(s).with_peak(f.peak()), u);

    let padmm = (|| -> Result<MethodRun> {
        let clock = Instant::now();
        let (s, h) = padmm_solve(f, &p, &cfg.convex)?;
        let time_s = clock.elapsed().as_secs_f64();
        Ok(MethodRun {
            metrics: score(&s)?,
            kkt: h.kkt,
            outer_iter: 1,
            inner_iter: h.iterations,
            converged: h.converged,
            time_s,
            history: RunHistory::Convex(h),
        })
    })();

    let clock = Instant::now();
    let dual = convex_dadmm_solve(f, &p, &cfg.convex);
    let dual_time = clock.elapsed().as_secs_f64();
    let (dadmm, nonconvex) = match dual {
        Ok((s_dual, h)) => {
            let d = (|| -> Result<MethodRun> {
                Ok(MethodRun {
                    metrics: score(&s_dual)?,
                    kkt: h.kkt,
                    outer_iter: 1,
                    inner_iter: h.iterations,
                    converged: h.converged,
                    time_s: dual_time,
                    history: RunHistory::Convex(h.clone()),
                })
            })();
            let nc = (|| -> Result<MethodRun> {
                let clock = Instant::now();
                let (s, mut ph) = pmm_solve_from(f, &p, &cfg.pmm, s_dual)?;
                let time_s = dual_time + clock.elapsed().as_secs_f64();
                ph.init_iterations = h.iterations;
                Ok(MethodRun {
                    metrics: score(&s)?,
                    kkt: ph.kkt(),
                    outer_iter: ph.outer_iterations(),
                    inner_iter: ph.total_sweeps(),
                    converged: ph.stop == PmmStop::Tolerance,
                    time_s,
                    history: RunHistory::Pmm(ph),
                })
            })();
            (d, nc)
        }
        Err(e) => {
            let warm = anyhow::anyhow!("convex warm start failed: {e}");
            (Err(e.into()), Err(warm))
        }
    };
    let msg = |r: Result<MethodRun>| r.map_err(|e| format!("{e:#}"));
    GridPointRuns {
        lambda1: l1,
        lambda3: l3,
        runs: [msg(padmm), msg(dadmm), msg(nonconvex)],
    }
}

/// Runs the suite on a pool of `threads` workers (0 means rayon's default).
/// Results do not depend on the pool size.
pub fn run_suite(cfg: &SuiteConfig, threads: usize) -> Result<BenchReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let instances = cfg
        .cases
        .iter()
        .map(|c| cfg.instance(c))
        .collect::<Result<Vec<_>>>()?;
    let points = cfg.grid.points();
    let jobs: Vec<(usize, f64, f64)> = (0..cfg.cases.len())
        .flat_map(|c| points.iter().map(move |&(a, b)| (c, a, b)))
        .collect();
    let results: Vec<GridPointRuns> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, l1, l3)| {
                let (u, f) = &instances[c];
                log::info!("case {} lambda1={l1} lambda3={l3}", cfg.cases[c].name);
                run_point(cfg, u, f, l1, l3)
            })
            .collect()
    });

    let mut results = results.into_iter();
    let mut cases = Vec::with_capacity(cfg.cases.len());
    for (case, (u, f)) in cfg.cases.iter().zip(&instances) {
        let pts: Vec<GridPointRuns> = results.by_ref().take(points.len()).collect();
        let mut best = [None; 3];
        for (k, slot) in best.iter_mut().enumerate() {
            let scores: Vec<GridScore> = pts
                .iter()
                .map(|p| match &p.runs[k] {
                    Ok(r) => GridScore {
                        lambda1: p.lambda1,
                        lambda3: p.lambda3,
                        psnr: r.metrics.psnr,
                        ssim: r.metrics.ssim,
                        kkt: r.kkt,
                        outer_iter: r.outer_iter,
                        inner_iter: r.inner_iter,
                        converged: r.converged,
                    },
                    Err(_) => GridScore {
                        lambda1: p.lambda1,
                        lambda3: p.lambda3,
                        psnr: f64::NAN,
                        ssim: f64::NAN,
                        kkt: f64::NAN,
                        outer_iter: 0,
                        inner_iter: 0,
                        converged: false,
                    },
                })
                .collect();
            *slot = select_best(&scores);
        }
        cases.push(CaseResult {
            case: case.clone(),
            degraded: evaluate(f, u)?,
            points: pts,
            best,
        });
    }
    if cases.is_empty() {
        bail!("no cases ran");
    }
    Ok(BenchReport {
        cases,
        timing: cfg.timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SuiteConfig {
        SuiteConfig {
            size: 16,
            cases: select_cases(&["p1".to_string()]).unwrap(),
            grid: GridSpec {
                lambda1: vec![5.0],
                lambda3: vec![3.0],
            },
            timing: false,
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn one_case_gives_four_rows() {
        let report = run_suite(&tiny(), 1).unwrap();
        let rows = report.rows();
        assert_eq!(rows.len(), 4);
        let methods: Vec<_> = rows.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(methods, ["degraded", "pADMM", "dADMM", "nonconvex"]);
        assert!(!report.any_failed());
    }

    #[test]
    fn csv_round_trip() {
        let report = run_suite(&tiny(), 1).unwrap();
        let text = report.to_csv();
        let rows = parse_csv(&text).unwrap();
        assert_eq!(rows, report.rows());
    }

    #[test]
    fn unknown_case_name() {
        assert!(select_cases(&["q7".to_string()]).is_err());
    }
}
