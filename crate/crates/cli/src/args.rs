use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "lyapkit", version, about = "Check Lyapunov certificates of finite and Euclidean dynamical systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify a property and print a JSON report. Exit 0 on pass, 1 on fail.
    Check {
        #[arg(value_enum)]
        kind: CheckKind,
        #[command(flatten)]
        opts: Options,
    },
    /// Build a Lyapunov certificate from a verified δ certificate.
    Converse {
        #[command(flatten)]
        opts: Options,
    },
    /// Write plot-ready CSV.
    Export {
        #[arg(value_enum)]
        what: ExportKind,
        #[command(flatten)]
        opts: Options,
    },
    /// Cross-check the engine against brute force on random finite systems.
    Oracle(OracleOptions),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Monovariant,
    Attractor,
    Equilibrium,
    Delta,
    Lyapunov,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportKind {
    Trajectory,
    SublevelRaster,
    BallRaster,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    #[default]
    NonIncreasing,
    NonDecreasing,
}

#[derive(Clone, Debug, Args)]
pub struct Options {
    /// System description file.
    #[arg(long)]
    pub system: PathBuf,
    /// Certificate file (delta, lyapunov or quadratic).
    #[arg(long)]
    pub certificate: Option<PathBuf>,
    /// Steps to explore; required for Euclidean systems unless the system
    /// file sets `[sampling] horizon`.
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Comma-separated radii, replacing the certificate grid.
    #[arg(long)]
    pub grid: Option<String>,
    /// Worker threads for grid loops.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Seed for sampled points.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; defaults to stdout for reports and CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Random sample states for Euclidean checks, or raster resolution.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Half-width of the sampling box or raster.
    #[arg(long)]
    pub extent: Option<String>,
    /// Observable name.
    #[arg(long)]
    pub observable: Option<String>,
    /// Center point: a name, an index or comma-separated coordinates.
    #[arg(long)]
    pub center: Option<String>,
    #[arg(long, value_enum, default_value_t)]
    pub direction: DirectionArg,
    /// Trajectory start: a name, an index or comma-separated coordinates.
    #[arg(long)]
    pub start: Option<String>,
    /// Trajectory length for linear timelines.
    #[arg(long, default_value_t = 10)]
    pub steps: u32,
    /// Trajectory word for word timelines, letters as digits.
    #[arg(long)]
    pub word: Option<String>,
    /// Time step for continuous timelines.
    #[arg(long)]
    pub dt: Option<String>,
}

#[derive(Clone, Debug, Args)]
pub struct OracleOptions {
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    #[arg(long, default_value_t = 16)]
    pub max_states: usize,
    #[arg(long, default_value_t = 3)]
    pub max_letters: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
