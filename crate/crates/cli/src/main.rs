use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use destripe_cli::commands::{
    cmd_benchmark, cmd_degrade, cmd_destripe, cmd_evaluate, cmd_grid_search, cmd_trace, resolve_config,
    suite_from_args, BenchOutputs, DegradeArgs, UsageError, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE,
};
use destripe_cli::config::ConfigLayer;
use destripe_cli::grid::GridSpec;

#[derive(Parser)]
#[command(name = "destripe", version, about = "Remove column stripe noise from grayscale images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Flat key-value config file; flags override it.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Intensity peak for inputs that do not carry one (CSV).
    #[arg(long)]
    peak: Option<f64>,
    #[command(flatten)]
    layer: ConfigLayer,
}

#[derive(clap::Args)]
struct GridArgs {
    /// Comma-separated lambda1 values.
    #[arg(long = "grid-lambda1", value_delimiter = ',', default_values_t = GridSpec::default().lambda1)]
    grid_lambda1: Vec<f64>,
    /// Comma-separated lambda3 values.
    #[arg(long = "grid-lambda3", value_delimiter = ',', default_values_t = GridSpec::default().lambda3)]
    grid_lambda3: Vec<f64>,
}

impl GridArgs {
    fn spec(&self) -> GridSpec {
        GridSpec {
            lambda1: self.grid_lambda1.clone(),
            lambda3: self.grid_lambda3.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate and remove stripes from one image.
    Destripe {
        #[command(flatten)]
        common: Common,
        /// Exit with status 3 when a solver stops on its iteration cap.
        #[arg(long)]
        strict: bool,
    },
    /// Add synthetic stripes to a clean image or a generated scene.
    Degrade {
        /// Clean input image.
        #[arg(long, conflicts_with = "scene")]
        clean: Option<PathBuf>,
        /// Generate a scene of this size instead, e.g. 128x128.
        #[arg(long, value_parser = parse_size)]
        scene: Option<(usize, usize)>,
        /// Intensity scale of a generated scene.
        #[arg(long, default_value_t = 255.0)]
        scale: f64,
        /// Stripe every n-th column.
        #[arg(long)]
        period: Option<usize>,
        /// Stripe this fraction of randomly chosen columns.
        #[arg(long)]
        density: Option<f64>,
        /// Largest stripe offset, in image units.
        #[arg(long, default_value_t = 25.0)]
        amplitude: f64,
        /// Let offsets vary slowly down each column.
        #[arg(long)]
        smooth: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short = 'o')]
        output: PathBuf,
        /// Where to write the stripe component.
        #[arg(long)]
        stripes: Option<PathBuf>,
        /// Where to write the clean image (useful with --scene).
        #[arg(long)]
        clean_out: Option<PathBuf>,
        #[arg(long)]
        peak: Option<f64>,
    },
    /// Compare an estimate against a reference (MSE, PSNR, global SSIM).
    Evaluate {
        estimate: PathBuf,
        reference: PathBuf,
        #[arg(long)]
        peak: Option<f64>,
        /// Also write the metrics as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the synthetic benchmark suite.
    Benchmark {
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 11)]
        scene_seed: u64,
        #[arg(long, default_value_t = 255.0)]
        scale: f64,
        /// Subset of cases (np1 np2 np3 p1 p2 p3); all when omitted.
        #[arg(long, value_delimiter = ',')]
        cases: Vec<String>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 1.0)]
        sigma_tilde: f64,
        /// Result CSV.
        #[arg(long, short = 'o', default_value = "benchmark.csv")]
        output: PathBuf,
        /// Also write the aligned table here.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Write every grid point's score here.
        #[arg(long)]
        grid_out: Option<PathBuf>,
        /// Write NA for times so repeated runs give identical files.
        #[arg(long)]
        no_timing: bool,
        #[arg(long)]
        strict: bool,
    },
    /// Tune lambda1 and lambda3 (lambda2 = 1) against a ground truth.
    GridSearch {
        #[command(flatten)]
        common: Common,
        /// Clean reference image.
        #[arg(long)]
        truth: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Score table CSV.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Write per-sweep residuals of one solve.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "trace.csv")]
        trace_out: PathBuf,
    },
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or("expected ROWSxCOLS")?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

fn threads() -> usize {
    std::env::var("DESTRIPE_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Destripe { common, strict } => {
            let cfg = resolve_config(common.config.as_deref(), common.layer)?;
            cmd_destripe(&cfg, common.peak, strict)
        }
        Command::Degrade {
            clean,
            scene,
            scale,
            period,
            density,
            amplitude,
            smooth,
            seed,
            output,
            stripes,
            clean_out,
            peak,
        } => {
            let spec = DegradeArgs::stripe_spec(period, density, amplitude, smooth, seed)?;
            cmd_degrade(&DegradeArgs {
                clean,
                scene_size: scene,
                scale,
                spec,
                output,
                stripes,
                clean_out,
                peak,
            })
        }
        Command::Evaluate {
            estimate,
            reference,
            peak,
            csv,
        } => cmd_evaluate(&estimate, &reference, peak, csv.as_deref()),
        Command::Benchmark {
            size,
            scene_seed,
            scale,
            cases,
            grid,
            sigma_tilde,
            output,
            table,
            grid_out,
            no_timing,
            strict,
        } => {
            let suite = suite_from_args(size, scene_seed, scale, &cases, grid.spec(), sigma_tilde, !no_timing)?;
            cmd_benchmark(
                &suite,
                &BenchOutputs {
                    csv: output,
                    table,
                    grid: grid_out,
                    threads: threads(),
                    strict,
                },
            )
        }
        Command::GridSearch {
            common,
            truth,
            grid,
            scores,
        } => {
            let cfg = resolve_config(common.config.as_deref(), common.layer)?;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads()).build()?;
            pool.install(|| cmd_grid_search(&cfg, &truth, &grid.spec(), common.peak, scores.as_deref()))
        }
        Command::Trace { common, trace_out } => {
            let cfg = resolve_config(common.config.as_deref(), common.layer)?;
            cmd_trace(&cfg, common.peak, &trace_out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
    }
}
