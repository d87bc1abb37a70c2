use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    AnalyzeChain,
    Value,
    Nrvalue,
    VhatLimit,
    Mz,
    Solve,
    Simulate,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::AnalyzeChain => "analyze-chain",
            Self::Value => "value",
            Self::Nrvalue => "nrvalue",
            Self::VhatLimit => "vhat-limit",
            Self::Mz => "mz",
            Self::Solve => "solve",
            Self::Simulate => "simulate",
            Self::Verify => "verify",
        }
    }
}

/// Solvers for zero-sum games with Markov private states on both sides.
#[derive(Debug, Clone, PartialEq, Parser)]
#[command(name = "mzgames", version, allow_negative_numbers = true)]
pub struct RunConfig {
    #[arg(long, value_enum)]
    pub command: Command,

    /// Game file (JSON).
    #[arg(long)]
    pub game: PathBuf,

    /// Horizon: stages for `value`, `nrvalue`, `solve` and `simulate`,
    /// largest horizon tried by `vhat-limit` and `mz`.
    #[arg(long = "T", default_value_t = 16)]
    pub horizon: usize,

    /// Grid resolution of each belief simplex.
    #[arg(long, default_value_t = 10)]
    pub resolution: usize,

    /// Saddle tolerance for `value` and `nrvalue`; increment tolerance of
    /// the nonrevealing limit elsewhere.
    #[arg(long, default_value_t = 5e-3)]
    pub tol: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Monte Carlo runs for `simulate` and `verify`.
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,

    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Cache directory.
    #[arg(long, env = "MZGAMES_CACHE")]
    pub cache: Option<PathBuf>,

    /// Block length `T0` of the simulated strategies.
    #[arg(long, default_value_t = 2)]
    pub block_length: usize,

    /// Exploration probability of the simulated block strategy.
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Error::Config {
            field: field.into(),
            reason,
        };
        if self.horizon < 1 {
            return Err(bad("T", "must be at least 1".into()));
        }
        if self.resolution < 2 {
            return Err(bad("resolution", format!("{} is below 2", self.resolution)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(bad("tol", format!("{} is not positive", self.tol)));
        }
        if self.runs < 1 {
            return Err(bad("runs", "must be at least 1".into()));
        }
        if self.block_length < 1 {
            return Err(bad("block-length", "must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(bad("epsilon", format!("{} is not a probability", self.epsilon)));
        }
        Ok(())
    }
}
