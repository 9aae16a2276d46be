use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const DEFAULT_SEED: u64 = 20261016;

#[derive(Debug, Parser)]
#[command(name = "ssr-lab", version, about = "Skew stickiness ratio experiments for Bergomi-type models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo estimate of X, Y, R and the ATM skew at the config's epsilon.
    Estimate(EstimateArgs),
    /// Short-maturity and small vol-of-vol limits of the SSR.
    Limit(CommonArgs),
    /// Estimates over a list of epsilon values on common random numbers.
    #[command(name = "sweep-eps")]
    SweepEps(SweepArgs),
    /// Estimates over a list of maturities with a common seed.
    #[command(name = "sweep-T")]
    SweepT(SweepArgs),
    /// Reduced-scale invariant checks of every module.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Model config (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 256)]
    pub steps: usize,
    /// Antithetic pairs (the path count must be even).
    #[arg(long)]
    pub antithetic: bool,
    /// Worker threads, a positive integer or `auto`. Falls back to SSRLAB_WORKERS.
    #[arg(long)]
    pub workers: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Fill the wall_time_s column. Off by default so outputs stay byte-reproducible.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Write the first simulated paths in binary form to this file.
    #[arg(long)]
    pub dump_paths: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub dump_limit: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated values of the swept variable.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Zero the tolerances of the named suite.
    #[arg(long, hide = true)]
    pub bad_tolerance: Option<String>,
}
