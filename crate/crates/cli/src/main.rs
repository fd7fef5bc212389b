//! `infoprice`: run the pricing, information and trading experiments from
//! JSON configs or built-in presets and write the results as CSV.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use commands::Table;
use config::ConfigError;

/// Seed used when neither `--seed` nor the config sets one.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser)]
#[command(name = "infoprice", version, about = "Information-based asset pricing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config for the subcommand.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in parameter set (fig2, fig3). Used when no config is given.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo path count (simulate, option).
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Trial count (stat-arb).
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Price an asset on a grid of times and information values.
    Price,
    /// Simulate information, price and innovation paths.
    Simulate,
    /// Price calls by quadrature, closed form (two-point priors) and Monte Carlo.
    Option,
    /// Mutual information of the market and of an informed trader.
    MutualInfo,
    /// Threshold strategy with and without extra information.
    StatArb,
    /// Multi-trader exchange simulation.
    MarketSim,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Price => "price",
            Self::Simulate => "simulate",
            Self::Option => "option",
            Self::MutualInfo => "mutual-info",
            Self::StatArb => "stat-arb",
            Self::MarketSim => "market-sim",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "{m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e.0)
    }
}

impl From<infoprice::Error> for CliError {
    fn from(e: infoprice::Error) -> Self {
        use infoprice::Error as E;
        match e {
            E::Convergence { .. } | E::Bracketing { .. } | E::DegenerateWeights => Self::Numerical(e.to_string()),
            other => Self::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

fn load<T: serde::de::DeserializeOwned>(
    cli: &Cli,
    preset: impl Fn(&str) -> Result<T, ConfigError>,
) -> Result<T, CliError> {
    match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Ok(config::parse(&text)?)
        }
        None => Ok(preset(cli.preset.as_deref().unwrap_or("fig3"))?),
    }
}

fn reject(flag: &str, value: Option<impl Sized>, command: Command) -> Result<(), CliError> {
    match value {
        Some(_) => Err(CliError::Config(format!(
            "--{flag} does not apply to `{}`",
            command.name()
        ))),
        None => Ok(()),
    }
}

fn resolve_seed(cli: &Cli, from_config: &mut Option<u64>) -> u64 {
    let seed = cli.seed.or(*from_config).unwrap_or(DEFAULT_SEED);
    *from_config = Some(seed);
    seed
}

fn config_hash<T: Serialize>(cfg: &T) -> String {
    let canonical = serde_json::to_string(cfg).expect("configs serialize");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn write_tables(out: &Path, tables: Vec<Table>, seed: u64, hash: &str) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    for t in tables {
        let path = out.join(t.file);
        let footer = format!(
            "# seed={seed}, version={}, config_hash={hash}\n",
            env!("CARGO_PKG_VERSION")
        );
        fs::write(&path, t.body + &footer)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let command = cli.command;
    let seed_flag_ignored = |cli: &Cli| reject("seed", cli.seed, command);
    let (tables, seed, hash) = match command {
        Command::Price => {
            reject("paths", cli.paths, command)?;
            reject("trials", cli.trials, command)?;
            seed_flag_ignored(cli)?;
            let cfg = load(cli, config::price_preset)?;
            (commands::price(&cfg)?, DEFAULT_SEED, config_hash(&cfg))
        }
        Command::Simulate => {
            reject("trials", cli.trials, command)?;
            let mut cfg = load(cli, config::simulate_preset)?;
            cfg.paths = cli.paths.unwrap_or(cfg.paths);
            let seed = resolve_seed(cli, &mut cfg.seed);
            (commands::simulate(&cfg, seed)?, seed, config_hash(&cfg))
        }
        Command::Option => {
            reject("trials", cli.trials, command)?;
            let mut cfg = load(cli, config::option_preset)?;
            cfg.paths = cli.paths.unwrap_or(cfg.paths);
            let seed = resolve_seed(cli, &mut cfg.seed);
            (commands::option(&cfg, seed)?, seed, config_hash(&cfg))
        }
        Command::MutualInfo => {
            reject("paths", cli.paths, command)?;
            reject("trials", cli.trials, command)?;
            seed_flag_ignored(cli)?;
            let cfg = load(cli, config::mutual_info_preset)?;
            (commands::mutual_info(&cfg)?, DEFAULT_SEED, config_hash(&cfg))
        }
        Command::StatArb => {
            reject("paths", cli.paths, command)?;
            let mut cfg = load(cli, config::stat_arb_preset)?;
            cfg.trials = cli.trials.unwrap_or(cfg.trials);
            let seed = resolve_seed(cli, &mut cfg.seed);
            (commands::stat_arb(&cfg, seed)?, seed, config_hash(&cfg))
        }
        Command::MarketSim => {
            reject("paths", cli.paths, command)?;
            reject("trials", cli.trials, command)?;
            let mut cfg = load(cli, config::market_sim_preset)?;
            let seed = resolve_seed(cli, &mut cfg.seed);
            (commands::market_sim(&cfg, seed)?, seed, config_hash(&cfg))
        }
    };
    write_tables(&cli.out, tables, seed, &hash)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
