use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reskit::model::Time;
use reskit::solver::StrategyClass;

#[derive(Parser, Debug)]
#[command(name = "reskit", version, about = "Resilience analysis for finite controlled systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a model file and print the validation report.
    Validate(Opts),
    /// Dump the closed-loop bundle of a strategy over a scenario file.
    Simulate(Opts),
    /// Robust viability kernel of the regime's constraints.
    Kernel(Opts),
    /// Robust recovery sets and per-scenario recovery times of a witness.
    Recover(Opts),
    /// Stochastic viability value table.
    ViabProb(Opts),
    /// Resilient states at a time with a witness strategy for each.
    Resilient(Opts),
    /// Minimal risk over the resilient strategies from one state.
    Indicator(Opts),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Simulate(_) => "simulate",
            Command::Kernel(_) => "kernel",
            Command::Recover(_) => "recover",
            Command::ViabProb(_) => "viab-prob",
            Command::Resilient(_) => "resilient",
            Command::Indicator(_) => "indicator",
        }
    }

    pub fn opts(&self) -> &Opts {
        match self {
            Command::Validate(o)
            | Command::Simulate(o)
            | Command::Kernel(o)
            | Command::Recover(o)
            | Command::ViabProb(o)
            | Command::Resilient(o)
            | Command::Indicator(o) => o,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct Opts {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,

    /// Regime file.
    #[arg(long)]
    pub regime: Option<PathBuf>,

    /// Policy file.
    #[arg(long)]
    pub strategy: Option<PathBuf>,

    /// Scenario file, one line of uncertainty labels per scenario.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,

    /// Risk file used by `indicator` instead of the regime's own.
    #[arg(long)]
    pub risk: Option<PathBuf>,

    /// Start time; defaults to the first time of the grid.
    #[arg(long = "time")]
    pub time: Option<Time>,

    /// Start state label.
    #[arg(long)]
    pub state: Option<String>,

    /// Probability level replacing the regime's.
    #[arg(long)]
    pub beta: Option<f64>,

    /// Risk level replacing the regime's.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Maximal number of strategies an exhaustive search may visit.
    #[arg(long, env = "RESKIT_BUDGET")]
    pub budget: Option<u128>,

    /// Solver name, or `auto`.
    #[arg(long)]
    pub solver: Option<String>,

    /// Strategy class of exhaustive searches.
    #[arg(long, value_parser = parse_class)]
    pub class: Option<StrategyClass>,

    /// Directory receiving the result and any policy files.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

fn parse_class(s: &str) -> Result<StrategyClass, String> {
    s.parse().map_err(|e: reskit::Error| e.to_string())
}
