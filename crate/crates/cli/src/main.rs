use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod output;

#[derive(Parser, Debug)]
#[command(
    name = "flashgate",
    version,
    about = "Token selection, action-reuse gating and cost estimates for VLA traces"
)]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, env = "FLASHGATE_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rank the tokens of a matrix by contribution score and keep the top k.
    Select(SelectArgs),
    /// Replay a trace through the reuse gate.
    Gate(GateArgs),
    /// Estimate FLOPs per step, in units of 1e12.
    Flops(FlopsArgs),
    /// Replay a trace over a grid of thresholds and write CSV.
    Sweep(SweepArgs),
    /// Write a synthetic JSONL trace.
    Synth(SynthArgs),
    /// Per-layer sparsity of the last query's attention.
    Analyze(AnalyzeArgs),
}

#[derive(clap::Args, Debug)]
struct SelectArgs {
    /// FVTS tensor holding an N x D matrix or a stack of them.
    #[arg(long)]
    tensor: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = flashgate::linalg::DEFAULT_RANK_TOLERANCE)]
    rank_tol: f64,
    /// Matrix within a stacked tensor.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Mode {
    #[default]
    Default,
    Literal,
}

#[derive(clap::Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Default)]
    mode: Mode,
    /// Token budget for steps that reference a tensor instead of a set.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = flashgate::linalg::DEFAULT_RANK_TOLERANCE)]
    rank_tol: f64,
}

#[derive(clap::Args, Debug)]
struct GateArgs {
    #[command(flatten)]
    replay: ReplayArgs,
    #[arg(long, default_value_t = 2.0)]
    epsilon1: f64,
    #[arg(long, default_value_t = 3.0)]
    delta: f64,
    /// Per-step decisions as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct ArchArgs {
    #[arg(long, default_value_t = flashgate::flops::DEFAULT_HIDDEN)]
    d: u64,
    #[arg(long, default_value_t = flashgate::flops::DEFAULT_FFN)]
    m: u64,
    #[arg(long = "L", default_value_t = flashgate::flops::DEFAULT_LAYERS)]
    layers: u64,
    #[arg(long = "Lp", default_value_t = flashgate::flops::DEFAULT_PRUNE_LAYER)]
    prune_layer: u64,
}

#[derive(clap::Args, Debug)]
struct FlopsArgs {
    #[arg(long, default_value_t = flashgate::flops::DEFAULT_TOKENS)]
    n: u64,
    /// Tokens kept after pruning; defaults to n.
    #[arg(long)]
    np: Option<u64>,
    #[arg(long = "R", default_value_t = 0.0)]
    reuse_rate: f64,
    #[command(flatten)]
    arch: ArchArgs,
    /// Also print the cost before pruning and before reuse.
    #[arg(long)]
    breakdown: bool,
}

#[derive(clap::Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    replay: ReplayArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    epsilon1: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    delta: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = flashgate::flops::DEFAULT_TOKENS)]
    n: u64,
    /// Tokens kept after pruning; defaults to the size of the trace's first set.
    #[arg(long)]
    np: Option<u64>,
    #[command(flatten)]
    arch: ArchArgs,
}

#[derive(clap::Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    length: usize,
    #[arg(long, default_value_t = 7)]
    action_dim: usize,
    #[arg(long, default_value_t = 0.8)]
    plateau_fraction: f64,
    #[arg(long, default_value_t = 20.0)]
    plateau_run_length: f64,
    #[arg(long, default_value_t = 0.5)]
    angle_noise_deg: f64,
    #[arg(long, default_value_t = 256)]
    token_universe: usize,
    #[arg(long, default_value_t = 192)]
    token_budget: usize,
    #[arg(long, default_value_t = 1)]
    token_churn: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct AnalyzeArgs {
    /// FVTS tensor shaped layers x heads x queries x keys.
    #[arg(long)]
    tensor: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Select(a) => commands::select(a),
        Command::Gate(a) => commands::gate(a),
        Command::Flops(a) => commands::flops(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Synth(a) => commands::synth(a, cli.seed),
        Command::Analyze(a) => commands::analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
