//! Executes a resolved [`RunConfig`] and routes its artifacts.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use stickpost::posterior::{sample_posterior_measure, Observation};
use stickpost::stickbreak::{sample_prior_measure, UniformSource};
use stickpost::verify::{self, all_pass, harness::par_draws, TestReport};

use crate::config::{Command, OutputFormat, RunConfig};
use crate::error::{CliError, Result};
use crate::report::{self, Document, Metadata, SampleBody, SampleDraw, VerifyBody};

/// Stream tags for sample dumps, clear of the verification suites' tags.
const SAMPLE_PRIOR_TAG: u32 = 0x100;
const SAMPLE_POSTERIOR_TAG: u32 = 0x101;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Reports(Vec<TestReport>),
    Samples(Vec<SampleDraw>),
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub payload: Payload,
    pub workers: usize,
}

impl Outcome {
    pub fn all_pass(&self) -> bool {
        match &self.payload {
            Payload::Reports(r) => all_pass(r),
            Payload::Samples(_) => true,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }

    /// The deterministic part of the JSON document.
    pub fn body_json(&self, cfg: &RunConfig) -> Result<String> {
        match &self.payload {
            Payload::Reports(r) => report::to_json(&verify_body(cfg, r)?),
            Payload::Samples(d) => report::to_json(&sample_body(cfg, d)?),
        }
    }

    /// The artifact in the configured format.
    pub fn render(&self, cfg: &RunConfig) -> Result<String> {
        let metadata = Metadata::now(self.workers);
        match (&self.payload, cfg.format) {
            (Payload::Reports(r), OutputFormat::Json) => report::to_json(&Document {
                metadata,
                body: verify_body(cfg, r)?,
            }),
            (Payload::Samples(d), OutputFormat::Json) => report::to_json(&Document {
                metadata,
                body: sample_body(cfg, d)?,
            }),
            (Payload::Reports(r), OutputFormat::Csv) => report::reports_csv(r),
            (Payload::Samples(d), OutputFormat::Csv) => report::samples_csv(d),
        }
    }
}

fn config_value(cfg: &RunConfig) -> Result<serde_json::Value> {
    serde_json::to_value(cfg).map_err(|e| CliError::Encode(e.to_string()))
}

fn verify_body(cfg: &RunConfig, reports: &[TestReport]) -> Result<VerifyBody> {
    Ok(VerifyBody {
        command: cfg.command.name().to_owned(),
        config: config_value(cfg)?,
        all_pass: all_pass(reports),
        reports: reports.to_vec(),
    })
}

fn sample_body(cfg: &RunConfig, draws: &[SampleDraw]) -> Result<SampleBody> {
    Ok(SampleBody {
        command: cfg.command.name().to_owned(),
        config: config_value(cfg)?,
        draws: draws.to_vec(),
    })
}

/// Runs the command on a pool of `cfg.workers` threads (default: available
/// parallelism). Results do not depend on the pool size.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::config(format!("cannot start {workers} workers: {e}")))?;
    let payload = pool.install(|| dispatch(cfg))?;
    Ok(Outcome { payload, workers })
}

fn dispatch(cfg: &RunConfig) -> Result<Payload> {
    if cfg.command.is_sampling() {
        return sample(cfg).map(Payload::Samples);
    }
    let t = cfg.test_config()?;
    let g = UniformSource::unit();
    let part = cfg.partition()?;
    let reports = match cfg.command {
        Command::VerifyAll => verify::verify_all(&t, &cfg.pairs, part.as_ref().map(|p| (p, &g as _)))?,
        Command::VerifyTheorem1 => verify::verify_theorem1(&t)?,
        Command::VerifyTheorem2 => verify::verify_theorem2(&t)?,
        Command::VerifyTheorem3 => verify::verify_theorem3(&t)?,
        Command::VerifyTheorem4 => {
            let mut out = Vec::new();
            for &pair in &cfg.pairs {
                out.extend(verify::verify_theorem4(&t, pair)?);
            }
            out
        }
        Command::VerifyLemma1 => verify::verify_lemma1(&t)?,
        Command::VerifyLemma2 => verify::verify_lemma2(&t)?,
        Command::VerifyLemma3 => {
            let part = part.ok_or_else(|| CliError::config("verify-lemma3 requires --x"))?;
            verify::verify_lemma3(&t, &part, &g)?
        }
        Command::VerifyHIdentity => vec![verify::verify_h_identity(&t)?],
        Command::SamplePrior | Command::SamplePosterior => unreachable!("handled above"),
    };
    Ok(Payload::Reports(reports))
}

fn sample(cfg: &RunConfig) -> Result<Vec<SampleDraw>> {
    let policy = cfg.policy()?;
    let g = UniformSource::unit();
    let c = cfg.c;
    let draws = match cfg.command {
        Command::SamplePrior => par_draws(cfg.seed, SAMPLE_PRIOR_TAG, cfg.draws, |rng| {
            let m = sample_prior_measure(c, &g, &policy, rng)?;
            Ok((m.records(), None))
        })?,
        Command::SamplePosterior => {
            let x = cfg.x.ok_or_else(|| CliError::config("sample-posterior requires --x"))?;
            par_draws(cfg.seed, SAMPLE_POSTERIOR_TAG, cfg.draws, |rng| {
                let (m, d) = sample_posterior_measure(c, Observation(x), &g, &policy, rng)?;
                Ok((m.records(), Some(d.record(cfg.k))))
            })?
        }
        _ => unreachable!("only sampling commands"),
    };
    Ok(draws
        .into_iter()
        .enumerate()
        .map(|(draw, (records, posterior))| SampleDraw {
            draw,
            records,
            posterior,
        })
        .collect())
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| CliError::io(path, e))
}

/// Executes `cfg` and writes its artifacts: the report to `cfg.output` (or
/// `stdout`) and, for verification runs, ECDF blocks to `cfg.ecdf_dump`.
/// Output files are opened before any sampling starts, so an unwritable
/// path fails fast. Returns the exit status.
pub fn run(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32> {
    let mut out_file = cfg.output.as_deref().map(create).transpose()?;
    let mut ecdf_file = cfg.ecdf_dump.as_deref().map(create).transpose()?;

    let outcome = execute(cfg)?;
    let text = outcome.render(cfg)?;
    match (&mut out_file, &cfg.output) {
        (Some(f), Some(p)) => f.write_all(text.as_bytes()).map_err(|e| CliError::io(p, e))?,
        _ => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e))?,
    }
    if let (Some(f), Some(p), Payload::Reports(r)) = (&mut ecdf_file, &cfg.ecdf_dump, &outcome.payload) {
        f.write_all(report::ecdf_dump(r).as_bytes())
            .map_err(|e| CliError::io(p, e))?;
    }
    Ok(outcome.exit_code())
}
