use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use stickpost_cli::config::{parse_levels, parse_pair, parse_partition, SEED_ENV};
use stickpost_cli::{run, CliError, Command, OutputFormat, RunConfig, Settings, EXIT_ERROR};

/// Verify the one-observation Dirichlet process posterior by simulation, or
/// dump prior and posterior draws.
#[derive(Debug, Parser)]
#[command(name = "stickpost", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// TOML file with defaults for any of the flags below (flags win).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Concentration c > 0.
    #[arg(long)]
    c: Option<f64>,
    /// Monte Carlo draws per suite.
    #[arg(long)]
    samples: Option<usize>,
    /// Base seed. Defaults to $STICKPOST_SEED, then 7.
    #[arg(long)]
    seed: Option<u64>,
    /// Truncation threshold on the remaining stick mass.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Maximum sticks per sequence before giving up.
    #[arg(long)]
    hard_cap: Option<usize>,
    /// Comma-separated levels l, e.g. 1,2,5.
    #[arg(long)]
    levels: Option<String>,
    /// Level pair "l,l'" with l > l' for Theorem 4; repeatable.
    #[arg(long = "pair")]
    pairs: Vec<String>,
    /// Comma-separated interior cut points of (0, 1).
    #[arg(long)]
    partition: Option<String>,
    /// Observation x in (0, 1).
    #[arg(long)]
    x: Option<f64>,
    /// Highest moment order n checked (default 5).
    #[arg(long)]
    moments_max: Option<u32>,
    /// Moment checks pass within this many standard errors (default 4).
    #[arg(long)]
    se_multiplier: Option<f64>,
    /// Level of the KS and chi-square tests (default 0.001).
    #[arg(long)]
    ks_alpha: Option<f64>,
    /// Bootstrap resamples for factorisation standard errors (default 200).
    #[arg(long)]
    bootstrap_resamples: Option<usize>,
    /// Measures to draw (sample commands).
    #[arg(long)]
    draws: Option<usize>,
    /// Leading posterior positions kept per draw (sample-posterior, JSON).
    #[arg(long)]
    k: Option<usize>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Report format; JSON for verify commands and CSV for samples by default.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Report path; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Path for two-column ECDF plot data.
    #[arg(long)]
    ecdf_dump: Option<PathBuf>,
}

impl Cli {
    fn settings(self) -> stickpost_cli::Result<(Command, Option<PathBuf>, Settings)> {
        let pairs = if self.pairs.is_empty() {
            None
        } else {
            Some(self.pairs.iter().map(|p| parse_pair(p)).collect::<Result<Vec<_>, _>>()?)
        };
        let s = Settings {
            c: self.c,
            samples: self.samples,
            seed: self.seed,
            epsilon: self.epsilon,
            hard_cap: self.hard_cap,
            levels: self.levels.as_deref().map(parse_levels).transpose()?,
            pairs,
            partition: self.partition.as_deref().map(parse_partition).transpose()?,
            x: self.x,
            moments_max: self.moments_max,
            se_multiplier: self.se_multiplier,
            ks_alpha: self.ks_alpha,
            bootstrap_resamples: self.bootstrap_resamples,
            draws: self.draws,
            k: self.k,
            workers: self.workers,
            format: self.format,
            output: self.output,
            ecdf_dump: self.ecdf_dump,
        };
        Ok((self.command, self.config, s))
    }
}

fn resolve(cli: Cli) -> stickpost_cli::Result<RunConfig> {
    let (command, file, flags) = cli.settings()?;
    let from_file = match file {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            Settings::from_toml(&text)?
        }
        None => Settings::default(),
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    RunConfig::resolve(command, flags.or(from_file), env_seed.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = resolve(cli).and_then(|cfg| run(&cfg, &mut std::io::stdout().lock()));
    match status {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("stickpost: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
