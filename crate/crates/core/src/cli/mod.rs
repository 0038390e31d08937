//! The `ddgauss` command line: DME sweeps, one-shot accounting and
//! verification suites.
//!
//! Configuration precedence for `dme`, highest first: command-line flags, the
//! configuration file (or manifest), `DDGAUSS_SEED` for the seed, built-in
//! defaults.

pub mod account;
pub mod dme;
pub mod format;
pub mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Environment variable holding the default master seed.
pub const SEED_ENV: &str = "DDGAUSS_SEED";

#[derive(Debug, Parser)]
#[command(name = "ddgauss", version, about = "Distributed discrete Gaussian mechanism toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a distributed mean estimation sweep and write CSV results.
    Dme(DmeArgs),
    /// Compute the privacy guarantee of one configuration.
    Account(AccountArgs),
    /// Run a verification suite and report PASS/FAIL per check.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct DmeArgs {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "manifest")]
    pub config: Option<PathBuf>,
    /// Manifest written by an earlier run; reruns its resolved configuration.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output CSV path; the manifest goes next to it as `<out>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Comma-separated zCDP epsilon targets.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma-separated bit widths.
    #[arg(long, value_delimiter = ',')]
    pub bits: Option<Vec<u32>>,
    /// Comma-separated standard-deviation multipliers.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<f64>>,
    /// `general` or `optimistic`.
    #[arg(long)]
    pub norm_mode: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also print the results as JSON on stdout.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct AccountArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub d: u64,
    /// Clipping norm; not needed with `--delta2-override`.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub delta: f64,
    /// Number of composed rounds.
    #[arg(long = "rounds", short = 'T', default_value_t = 1)]
    pub rounds: u64,
    /// Dropout fractions to evaluate; repeat or comma-separate.
    #[arg(long = "drop-fraction", value_delimiter = ',')]
    pub drop_fraction: Vec<f64>,
    /// l1 sensitivity, enabling the three-branch bound.
    #[arg(long)]
    pub delta1: Option<f64>,
    /// Use this l2 sensitivity instead of deriving it from c, gamma, beta, d.
    #[arg(long)]
    pub delta2_override: Option<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Convolution,
    Sampler,
    Transform,
    Rounding,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// The seed from `DDGAUSS_SEED`, if set.
pub fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => Ok(Some(s.trim().parse().map_err(|e| {
            anyhow::anyhow!("{SEED_ENV}={s:?} is not a valid u64 seed: {e}")
        })?)),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(anyhow::anyhow!("{SEED_ENV}: {e}")),
    }
}

pub fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Dme(args) => dme::cmd_dme(&args).map(|_| true),
        Command::Account(args) => account::cmd_account(&args).map(|_| true),
        Command::Verify(args) => verify::cmd_verify(&args),
    }
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
