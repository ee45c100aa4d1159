//! Run configuration: command-line flags, an optional TOML file, and the
//! resolved, validated [`RunConfig`].

use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use stickpost::distmath::Concentration;
use stickpost::stickbreak::{TruncationPolicy, UniformSource, DEFAULT_EPSILON, DEFAULT_HARD_CAP};
use stickpost::verify::{
    consecutive_pairs, Partition, TestConfig, DEFAULT_BOOTSTRAP_RESAMPLES, DEFAULT_KS_ALPHA,
    DEFAULT_SE_MULTIPLIER,
};

use crate::error::{CliError, Result};

/// Environment variable that replaces the built-in default seed.
pub const SEED_ENV: &str = "STICKPOST_SEED";

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const DEFAULT_MOMENTS_MAX: u32 = 5;
pub const DEFAULT_LEVELS: [usize; 3] = [1, 2, 5];
/// Interior cut of the unit interval used by Lemma 3 when none is given.
pub const DEFAULT_PARTITION: [f64; 1] = [0.5];
pub const DEFAULT_DRAWS: usize = 1;
/// Leading positions kept per posterior draw in sample dumps.
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyAll,
    VerifyTheorem1,
    VerifyTheorem2,
    VerifyTheorem3,
    VerifyTheorem4,
    VerifyLemma1,
    VerifyLemma2,
    VerifyLemma3,
    VerifyHIdentity,
    SamplePrior,
    SamplePosterior,
}

impl Command {
    pub fn is_sampling(self) -> bool {
        matches!(self, Command::SamplePrior | Command::SamplePosterior)
    }

    pub fn needs_observation(self) -> bool {
        matches!(self, Command::SamplePosterior | Command::VerifyLemma3)
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyAll => "verify-all",
            Command::VerifyTheorem1 => "verify-theorem1",
            Command::VerifyTheorem2 => "verify-theorem2",
            Command::VerifyTheorem3 => "verify-theorem3",
            Command::VerifyTheorem4 => "verify-theorem4",
            Command::VerifyLemma1 => "verify-lemma1",
            Command::VerifyLemma2 => "verify-lemma2",
            Command::VerifyLemma3 => "verify-lemma3",
            Command::VerifyHIdentity => "verify-h-identity",
            Command::SamplePrior => "sample-prior",
            Command::SamplePosterior => "sample-posterior",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Partially specified settings, from flags or a configuration file. Unset
/// fields fall through to the next source.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub c: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub hard_cap: Option<usize>,
    pub levels: Option<Vec<usize>>,
    pub pairs: Option<Vec<(usize, usize)>>,
    /// Interior cut points of `(0, 1)`.
    pub partition: Option<Vec<f64>>,
    pub x: Option<f64>,
    pub moments_max: Option<u32>,
    pub se_multiplier: Option<f64>,
    pub ks_alpha: Option<f64>,
    pub bootstrap_resamples: Option<usize>,
    pub draws: Option<usize>,
    pub k: Option<usize>,
    pub workers: Option<usize>,
    pub format: Option<OutputFormat>,
    pub output: Option<PathBuf>,
    pub ecdf_dump: Option<PathBuf>,
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Settings> {
        toml::from_str(text).map_err(|e| CliError::config(format!("config file: {e}")))
    }

    /// Field-wise `self` where set, otherwise `lower`.
    pub fn or(self, lower: Settings) -> Settings {
        Settings {
            c: self.c.or(lower.c),
            samples: self.samples.or(lower.samples),
            seed: self.seed.or(lower.seed),
            epsilon: self.epsilon.or(lower.epsilon),
            hard_cap: self.hard_cap.or(lower.hard_cap),
            levels: self.levels.or(lower.levels),
            pairs: self.pairs.or(lower.pairs),
            partition: self.partition.or(lower.partition),
            x: self.x.or(lower.x),
            moments_max: self.moments_max.or(lower.moments_max),
            se_multiplier: self.se_multiplier.or(lower.se_multiplier),
            ks_alpha: self.ks_alpha.or(lower.ks_alpha),
            bootstrap_resamples: self.bootstrap_resamples.or(lower.bootstrap_resamples),
            draws: self.draws.or(lower.draws),
            k: self.k.or(lower.k),
            workers: self.workers.or(lower.workers),
            format: self.format.or(lower.format),
            output: self.output.or(lower.output),
            ecdf_dump: self.ecdf_dump.or(lower.ecdf_dump),
        }
    }
}

fn split_list(s: &str, what: &str) -> Result<Vec<String>> {
    let items: Vec<String> = s.split(',').map(|t| t.trim().to_owned()).collect();
    if items.iter().any(String::is_empty) {
        return Err(CliError::config(format!("{what}: empty entry in {s:?}")));
    }
    Ok(items)
}

/// `"1,2,5"` -> `[1, 2, 5]`; every level is at least 1.
pub fn parse_levels(s: &str) -> Result<Vec<usize>> {
    split_list(s, "levels")?
        .iter()
        .map(|t| match t.parse::<usize>() {
            Ok(l) if l >= 1 => Ok(l),
            _ => Err(CliError::config(format!("levels: {t:?} is not an integer >= 1"))),
        })
        .collect()
}

/// `"0.3,0.6"` -> `[0.3, 0.6]`. Ordering and range are checked when the
/// partition is built.
pub fn parse_partition(s: &str) -> Result<Vec<f64>> {
    split_list(s, "partition")?
        .iter()
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(CliError::config(format!("partition: {t:?} is not a finite number"))),
        })
        .collect()
}

/// `"5,2"` -> `(5, 2)`, requiring `l > l' >= 1`.
pub fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let levels = parse_levels(s)?;
    match levels[..] {
        [l, lp] => check_pair((l, lp)),
        _ => Err(CliError::config(format!("pair: expected \"l,l'\", got {s:?}"))),
    }
}

fn check_pair((l, lp): (usize, usize)) -> Result<(usize, usize)> {
    if lp >= 1 && l > lp {
        Ok((l, lp))
    } else {
        Err(CliError::config(format!("pair: need l > l' >= 1, got ({l}, {lp})")))
    }
}

/// A fully resolved run. Serialises to the `config` block of report bodies;
/// output routing and the worker count are deliberately left out so bodies
/// do not depend on them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub c: Concentration,
    pub samples: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub hard_cap: usize,
    pub levels: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    pub moments_max: u32,
    pub se_multiplier: f64,
    pub ks_alpha: f64,
    pub bootstrap_resamples: usize,
    pub draws: usize,
    pub k: usize,
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub format: OutputFormat,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub ecdf_dump: Option<PathBuf>,
}

impl RunConfig {
    /// Fills unset fields from defaults and validates the result. The seed
    /// falls back to `env_seed` (the value of [`SEED_ENV`]) before the
    /// built-in default.
    pub fn resolve(command: Command, s: Settings, env_seed: Option<&str>) -> Result<RunConfig> {
        let c = Concentration::new(s.c.unwrap_or(DEFAULT_C))?;
        let seed = match (s.seed, env_seed) {
            (Some(seed), _) => seed,
            (None, Some(text)) => text
                .trim()
                .parse()
                .map_err(|_| CliError::config(format!("{SEED_ENV}={text:?} is not an unsigned integer")))?,
            (None, None) => DEFAULT_SEED,
        };
        let levels = s.levels.unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
        if levels.is_empty() || levels.contains(&0) {
            return Err(CliError::config("levels must be a non-empty list of integers >= 1"));
        }
        let pairs = match s.pairs {
            Some(p) => p.into_iter().map(check_pair).collect::<Result<Vec<_>>>()?,
            None => consecutive_pairs(&levels),
        };
        if command == Command::VerifyTheorem4 && pairs.is_empty() {
            return Err(CliError::config("verify-theorem4 needs --pair or at least two distinct levels"));
        }
        if let Some(x) = s.x {
            if !(x > 0.0 && x < 1.0) {
                return Err(CliError::config(format!("x must lie in (0, 1) for the uniform base measure, got {x}")));
            }
        }
        if command.needs_observation() && s.x.is_none() {
            return Err(CliError::config(format!("{} requires --x", command.name())));
        }
        if s.partition.is_some() && s.x.is_none() {
            return Err(CliError::config("--partition needs an observation --x"));
        }
        let partition = match (command, s.partition) {
            (Command::VerifyLemma3, None) => Some(DEFAULT_PARTITION.to_vec()),
            (Command::VerifyAll, None) if s.x.is_some() => Some(DEFAULT_PARTITION.to_vec()),
            (_, p) => p,
        };
        let cfg = RunConfig {
            command,
            c,
            samples: s.samples.unwrap_or(DEFAULT_SAMPLES),
            seed,
            epsilon: s.epsilon.unwrap_or(DEFAULT_EPSILON),
            hard_cap: s.hard_cap.unwrap_or(DEFAULT_HARD_CAP),
            levels,
            pairs,
            partition,
            x: s.x,
            moments_max: s.moments_max.unwrap_or(DEFAULT_MOMENTS_MAX),
            se_multiplier: s.se_multiplier.unwrap_or(DEFAULT_SE_MULTIPLIER),
            ks_alpha: s.ks_alpha.unwrap_or(DEFAULT_KS_ALPHA),
            bootstrap_resamples: s.bootstrap_resamples.unwrap_or(DEFAULT_BOOTSTRAP_RESAMPLES),
            draws: s.draws.unwrap_or(DEFAULT_DRAWS),
            k: s.k.unwrap_or(DEFAULT_K),
            workers: s.workers,
            format: s.format.unwrap_or(if command.is_sampling() {
                OutputFormat::Csv
            } else {
                OutputFormat::Json
            }),
            output: s.output,
            ecdf_dump: s.ecdf_dump,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        self.policy()?;
        if self.workers == Some(0) {
            return Err(CliError::config("workers must be >= 1"));
        }
        if self.command.is_sampling() {
            if self.draws == 0 || self.k == 0 {
                return Err(CliError::config("draws and k must be >= 1"));
            }
        } else {
            self.test_config()?;
        }
        self.partition()?;
        Ok(())
    }

    pub fn policy(&self) -> Result<TruncationPolicy> {
        Ok(TruncationPolicy::new(self.epsilon, self.hard_cap)?)
    }

    pub fn test_config(&self) -> Result<TestConfig> {
        let mut t = TestConfig::new(self.c, self.samples, self.seed)?;
        t.moments_max = self.moments_max;
        t.levels = self.levels.clone();
        t.se_multiplier = self.se_multiplier;
        t.ks_alpha = self.ks_alpha;
        t.bootstrap_resamples = self.bootstrap_resamples;
        t.policy = self.policy()?;
        t.validate()?;
        Ok(t)
    }

    /// The Lemma 3 partition of `(0, 1]` under the uniform base measure.
    pub fn partition(&self) -> Result<Option<Partition>> {
        match (&self.partition, self.x) {
            (Some(cuts), Some(x)) => Ok(Some(Partition::unit_interval(cuts, x, &UniformSource::unit())?)),
            _ => Ok(None),
        }
    }
}
