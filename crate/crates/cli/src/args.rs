use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "houp", version, about = "High-order universal portfolio experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute UP^1..UP^L on a market and write wealth paths and a summary
    Run(RunArgs),
    /// Compare a market with a time-permuted copy of itself
    Permute(PermuteArgs),
    /// Check the exact rational identities of the two-asset examples
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    /// Constant asset plus an asset alternating 2, 1/2, 2, ...
    Toy,
    /// Two steps: (1, 2), (2, 1)
    Table1,
    /// Three steps: (1, 2), (2, 1), (2, 1)
    Table2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// CSV file of price relatives (one row per period, one column per asset)
    #[arg(long, conflicts_with = "generator", required_unless_present = "generator")]
    pub data: Option<PathBuf>,

    /// Synthetic market instead of a data file
    #[arg(long, value_enum)]
    pub generator: Option<Generator>,

    /// Number of periods for the toy generator
    #[arg(long, default_value_t = 50)]
    pub steps: usize,

    /// Comma-separated asset labels to keep, in order
    #[arg(long, value_delimiter = ',')]
    pub assets: Option<Vec<String>>,

    /// Highest order L of universal portfolio to compute
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub orders: u64,

    /// Monte Carlo points per level
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Gauss-Legendre nodes for two-asset levels
    #[arg(long = "quad-nodes", default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..=64))]
    pub quad_nodes: u64,

    /// Grid resolution of the hindsight CRP search with three or more assets
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub resolution: u64,

    /// Directory receiving the paths and summary files
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug, Clone)]
pub struct PermuteArgs {
    #[command(flatten)]
    pub run: RunArgs,

    /// `reverse`, `swap:i,j` or an explicit 1-based list such as `3,1,2`
    #[arg(long)]
    pub perm: String,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    /// Show expected and computed fractions for every check
    #[arg(short, long)]
    pub verbose: bool,

    /// Also write the report as JSON to this file
    #[arg(long)]
    pub json: Option<PathBuf>,

    /// Replace two third-order simplex moments with each other
    #[arg(long, hide = true)]
    pub swap_third_moments: bool,
}
