//! `sdd`: simulate VAR(1) pairs, estimate inverse spectral density
//! differences, and score estimates against ground truth.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sdd::pipeline::Method;
use sdd::tuning::{DEFAULT_GAMMA, DEFAULT_PATH_LEN};
use sdd::varsim::DEFAULT_BURN_IN;
use sdd::SddError;

use config::{
    EstimateRun, EvaluateConfig, ExperimentConfig, PanelLayout, RunConfig, SimulateConfig,
};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "sdd", version, about = "Sparse differences of inverse spectral densities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a two-condition VAR(1) setting and its ground truth.
    Simulate(SimulateArgs),
    /// Estimate the inverse spectral density difference of two panels.
    Estimate(EstimateArgs),
    /// Score estimates against ground truth.
    Evaluate(EvaluateArgs),
    /// Simulate, estimate and evaluate in one go.
    Experiment(ExperimentArgs),
    /// Re-run a previous invocation from its manifest.json.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sdd,
    Naive,
    Hard,
    All,
}

fn methods(args: &[MethodArg]) -> Vec<Method> {
    let mut out = Vec::new();
    for a in args {
        let add: &[Method] = match a {
            MethodArg::Sdd => &[Method::Sdd],
            MethodArg::Naive => &[Method::Naive],
            MethodArg::Hard => &[Method::Hard],
            MethodArg::All => &Method::ALL,
        };
        for m in add {
            if !out.contains(m) {
                out.push(*m);
            }
        }
    }
    out
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation setting (1, 2 or 3).
    #[arg(long, default_value_t = 1)]
    setting: u8,
    /// Observations per condition.
    #[arg(short, long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    /// Frequencies on the ground-truth grid.
    #[arg(long, default_value_t = 100)]
    grid_count: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TuningArgs {
    /// Override the smoothing bandwidth M (default ceil(n^(2/3))).
    #[arg(long)]
    bandwidth: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_PATH_LEN)]
    path_len: usize,
    /// eBIC gamma.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Worker threads; 0 picks one per frequency up to the core count.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "sdd")]
    method: Vec<MethodArg>,
    /// Frequencies on the default grid when none are requested.
    #[arg(long, default_value_t = 100)]
    grid_count: usize,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    condition1: PathBuf,
    #[arg(long)]
    condition2: PathBuf,
    /// Treat CSV rows as channels instead of time points.
    #[arg(long)]
    rows_are_channels: bool,
    /// Comma-separated frequencies: radians in [0, pi], or Hz with --fs.
    #[arg(long, value_delimiter = ',', conflicts_with = "band")]
    freqs: Option<Vec<f64>>,
    /// Named band: theta, beta, gamma or high-gamma (needs --fs).
    #[arg(long)]
    band: Option<String>,
    /// Sampling rate in Hz.
    #[arg(long)]
    fs: Option<f64>,
    #[command(flatten)]
    tuning: TuningArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Output directory of `sdd estimate`.
    #[arg(long)]
    estimates: PathBuf,
    /// Output directory of `sdd simulate`.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = sdd::metrics::DEFAULT_EDGE_TOL)]
    edge_tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 1)]
    setting: u8,
    #[arg(short, long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[command(flatten)]
    tuning: TuningArgs,
    #[arg(long, default_value_t = sdd::metrics::DEFAULT_EDGE_TOL)]
    edge_tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Write into this directory instead of the recorded one.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn absolute(p: PathBuf) -> PathBuf {
    std::path::absolute(&p).unwrap_or(p)
}

fn to_config(command: Command) -> Result<RunConfig, (PathBuf, Option<PathBuf>)> {
    Ok(match command {
        Command::Simulate(a) => RunConfig::Simulate(SimulateConfig {
            setting: a.setting,
            n: a.n,
            seed: a.seed,
            burn_in: a.burn_in,
            grid_count: a.grid_count,
            out: a.out,
        }),
        Command::Estimate(a) => RunConfig::Estimate(EstimateRun {
            condition1: absolute(a.condition1),
            condition2: absolute(a.condition2),
            layout: if a.rows_are_channels {
                PanelLayout::RowsAreChannels
            } else {
                PanelLayout::RowsAreTime
            },
            freqs: a.freqs,
            band: a.band,
            fs: a.fs,
            bandwidth: a.tuning.bandwidth,
            path_len: a.tuning.path_len,
            gamma: a.tuning.gamma,
            jobs: a.tuning.jobs,
            methods: methods(&a.tuning.method),
            grid_count: a.tuning.grid_count,
            out: a.out,
        }),
        Command::Evaluate(a) => RunConfig::Evaluate(EvaluateConfig {
            estimates: absolute(a.estimates),
            truth: absolute(a.truth),
            edge_tol: a.edge_tol,
            out: a.out,
        }),
        Command::Experiment(a) => RunConfig::Experiment(ExperimentConfig {
            setting: a.setting,
            n: a.n,
            seed: a.seed,
            burn_in: a.burn_in,
            grid_count: a.tuning.grid_count,
            bandwidth: a.tuning.bandwidth,
            path_len: a.tuning.path_len,
            gamma: a.tuning.gamma,
            jobs: a.tuning.jobs,
            methods: methods(&a.tuning.method),
            edge_tol: a.edge_tol,
            out: a.out,
        }),
        Command::Replay(a) => return Err((a.manifest, a.out)),
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<SddError>())
        .any(SddError::is_numerical);
    if numerical {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match to_config(cli.command) {
        Ok(config) => commands::run(&config),
        Err((manifest, out)) => commands::replay(&manifest, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
