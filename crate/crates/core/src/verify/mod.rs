//! Verification of the posterior's distributional claims.
//!
//! Every check produces a [`TestReport`]. Monte Carlo checks compare an
//! estimate to a closed-form reference within `se_multiplier` standard
//! errors; goodness-of-fit and independence checks compare a statistic to
//! its critical value at `ks_alpha`; exact algebraic checks compare a
//! discrepancy to a fixed floating-point tolerance.
//!
//! All sampling goes through [`harness::par_draws`], so a report is a pure
//! function of its configuration and seed.

pub mod harness;
mod identity;
mod lemmas;
pub mod oracles;
pub mod stats;
mod theorems;

use serde::{Deserialize, Serialize};

use crate::distmath::{BetaParams, Concentration};
use crate::stickbreak::{AtomSource, TruncationPolicy};
use crate::{Error, Result};

pub use identity::{verify_h_identity, verify_oracles};
pub use lemmas::{verify_lemma1, verify_lemma2, verify_lemma3};
pub use theorems::{verify_theorem1, verify_theorem2, verify_theorem3, verify_theorem4};

pub const MIN_SAMPLES: usize = 1000;
pub const DEFAULT_SE_MULTIPLIER: f64 = 4.0;
pub const DEFAULT_KS_ALPHA: f64 = 0.001;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 200;
/// Points kept in the ECDF attached to goodness-of-fit reports.
pub const ECDF_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub c: Concentration,
    pub samples: usize,
    pub seed: u64,
    pub moments_max: u32,
    pub levels: Vec<usize>,
    pub se_multiplier: f64,
    pub ks_alpha: f64,
    pub bootstrap_resamples: usize,
    pub policy: TruncationPolicy,
}

impl TestConfig {
    pub fn new(c: Concentration, samples: usize, seed: u64) -> Result<Self> {
        let cfg = TestConfig {
            c,
            samples,
            seed,
            moments_max: 5,
            levels: vec![1, 2, 5],
            se_multiplier: DEFAULT_SE_MULTIPLIER,
            ks_alpha: DEFAULT_KS_ALPHA,
            bootstrap_resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
            policy: TruncationPolicy::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < MIN_SAMPLES {
            return Err(Error::invalid(
                "samples",
                format!("need at least {MIN_SAMPLES}, got {}", self.samples),
            ));
        }
        if self.moments_max == 0 {
            return Err(Error::invalid("moments_max", "must be >= 1"));
        }
        if self.levels.contains(&0) {
            return Err(Error::invalid("levels", "levels start at 1"));
        }
        if !(self.se_multiplier.is_finite() && self.se_multiplier > 0.0) {
            return Err(Error::invalid("se_multiplier", "must be > 0"));
        }
        if !(self.ks_alpha > 0.0 && self.ks_alpha < 1.0) {
            return Err(Error::invalid("ks_alpha", "must lie in (0, 1)"));
        }
        if self.bootstrap_resamples < 2 {
            return Err(Error::invalid("bootstrap_resamples", "must be >= 2"));
        }
        Ok(())
    }

    fn require_levels(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::invalid("levels", "at least one level is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// How `statistic` is judged against `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|statistic - reference| <= threshold`.
    TwoSided,
    /// `statistic <= threshold`.
    UpperBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub reference: f64,
    pub standard_error: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub verdict: Verdict,
    pub seed: u64,
    pub samples_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Thinned `(value, F_n(value))` pairs of the tested sample.
    #[serde(skip)]
    pub ecdf: Option<Vec<(f64, f64)>>,
}

impl TestReport {
    /// Passes when `|statistic - reference| <= multiplier * se`.
    pub fn two_sided(
        name: impl Into<String>,
        statistic: f64,
        reference: f64,
        se: f64,
        multiplier: f64,
        seed: u64,
        samples_used: usize,
    ) -> Self {
        let threshold = multiplier * se;
        let ok = (statistic - reference).abs() <= threshold;
        TestReport {
            name: name.into(),
            statistic,
            reference,
            standard_error: se,
            threshold,
            comparison: Comparison::TwoSided,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            seed,
            samples_used,
            note: None,
            ecdf: None,
        }
    }

    /// Passes when `statistic <= threshold`.
    pub fn upper_bound(
        name: impl Into<String>,
        statistic: f64,
        threshold: f64,
        seed: u64,
        samples_used: usize,
    ) -> Self {
        TestReport {
            name: name.into(),
            statistic,
            reference: 0.0,
            standard_error: 0.0,
            threshold,
            comparison: Comparison::UpperBound,
            verdict: if statistic <= threshold {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            seed,
            samples_used,
            note: None,
            ecdf: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Recomputes the verdict from the numbers; used to reject tampered or
    /// inconsistent reports on decode.
    pub fn is_consistent(&self) -> bool {
        let ok = match self.comparison {
            Comparison::TwoSided => (self.statistic - self.reference).abs() <= self.threshold,
            Comparison::UpperBound => self.statistic <= self.threshold,
        };
        ok == self.passed()
    }
}

pub fn all_pass(reports: &[TestReport]) -> bool {
    reports.iter().all(TestReport::passed)
}

/// A finite partition `(b_0, b_1], (b_1, b_2], ..., (b_{k-1}, b_k]` of the
/// base space, and the cell holding the observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    boundaries: Vec<f64>,
    cell_mass: Vec<f64>,
    observation: f64,
    cell_of_x: usize,
}

impl Partition {
    /// `boundaries` must be strictly increasing with at least three entries
    /// (two cells), every cell must carry positive `G`-mass, and the
    /// observation must fall inside `(b_0, b_k]`.
    pub fn new(boundaries: Vec<f64>, observation: f64, g: &dyn AtomSource) -> Result<Self> {
        if boundaries.len() < 3 {
            return Err(Error::invalid("partition", "need at least two cells"));
        }
        if boundaries.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("partition", "boundaries must be finite"));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("partition", "boundaries must be strictly increasing"));
        }
        let first = boundaries[0];
        let last = boundaries[boundaries.len() - 1];
        // The cells cover the whole space only if G puts no mass outside.
        if g.cdf(first) > 0.0 || g.cdf(last) < 1.0 {
            return Err(Error::invalid(
                "partition",
                format!("cells ({first}, {last}] do not exhaust the base measure {}", g.descriptor()),
            ));
        }
        let cell_mass: Vec<f64> = boundaries.windows(2).map(|w| g.mass(w[0], w[1])).collect();
        if let Some(i) = cell_mass.iter().position(|&m| m <= 0.0) {
            return Err(Error::invalid("partition", format!("cell {i} has zero base mass")));
        }
        if !(observation > first && observation <= last) {
            return Err(Error::invalid(
                "x",
                format!("observation {observation} lies outside ({first}, {last}]"),
            ));
        }
        let mut p = Partition {
            boundaries,
            cell_mass,
            observation,
            cell_of_x: 0,
        };
        p.cell_of_x = p.cell_of(observation);
        Ok(p)
    }

    /// Partition of the unit interval at the given interior cut points.
    pub fn unit_interval(interior: &[f64], observation: f64, g: &dyn AtomSource) -> Result<Self> {
        let mut b = Vec::with_capacity(interior.len() + 2);
        b.push(0.0);
        b.extend_from_slice(interior);
        b.push(1.0);
        Partition::new(b, observation, g)
    }

    pub fn cells(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn cell_mass(&self) -> &[f64] {
        &self.cell_mass
    }

    pub fn observation(&self) -> f64 {
        self.observation
    }

    pub fn cell_of_x(&self) -> usize {
        self.cell_of_x
    }

    /// Cell index for a value; values at or below `b_0` go to the first cell
    /// and values above `b_k` to the last.
    pub fn cell_of(&self, t: f64) -> usize {
        let inner = &self.boundaries[1..self.boundaries.len() - 1];
        inner.partition_point(|&b| b < t)
    }

    /// Dirichlet parameters of the posterior: `c G(A_i) + 1(x ∈ A_i)`.
    pub fn posterior_alphas(&self, c: Concentration) -> Vec<f64> {
        self.cell_mass
            .iter()
            .enumerate()
            .map(|(i, &m)| c.get() * m + if i == self.cell_of_x { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Moment ladder `E[X^n]` for `n = 1..=moments_max` against beta `law`.
fn moment_reports(prefix: &str, xs: &[f64], law: BetaParams, cfg: &TestConfig) -> Result<Vec<TestReport>> {
    (1..=cfg.moments_max)
        .map(|n| {
            let est = stats::power_moment(xs, n);
            let exact = crate::distmath::beta_moment(law, n)?;
            Ok(TestReport::two_sided(
                format!("{prefix}.moment.n={n}"),
                est.mean,
                exact,
                est.se,
                cfg.se_multiplier,
                cfg.seed,
                xs.len(),
            ))
        })
        .collect()
}

/// One-sample KS test of `xs` against `cdf` at level `ks_alpha`.
fn ks_report(name: String, xs: &[f64], cdf: impl Fn(f64) -> f64, cfg: &TestConfig) -> TestReport {
    let (d, sorted) = stats::ks_statistic(xs, cdf);
    let crit = stats::ks_critical(xs.len(), cfg.ks_alpha);
    let mut r = TestReport::upper_bound(name, d, crit, cfg.seed, xs.len());
    r.ecdf = Some(stats::thin_ecdf(&sorted, ECDF_POINTS));
    r
}

/// KS test against beta(1, c).
fn ks_beta1_report(name: String, xs: &[f64], c: f64, cfg: &TestConfig) -> TestReport {
    ks_report(name, xs, |y| crate::distmath::beta1_cdf(c, y), cfg)
}

/// Four product-moment factorisation checks for `(n, m)` in `{1, 2}^2`.
fn factorisation_reports(prefix: &str, xs: &[f64], ys: &[f64], cfg: &TestConfig, tag: u32) -> Vec<TestReport> {
    stats::factorisation_bootstrap(xs, ys, cfg.bootstrap_resamples, cfg.seed, tag)
        .into_iter()
        .map(|f| {
            TestReport::two_sided(
                format!("{prefix}.factorise.n={}.m={}", f.n, f.m),
                f.joint,
                f.product,
                f.se,
                cfg.se_multiplier,
                cfg.seed,
                xs.len(),
            )
        })
        .collect()
}

/// Consecutive pairs `(l, l')`, `l > l'`, of the sorted distinct levels.
pub fn consecutive_pairs(levels: &[usize]) -> Vec<(usize, usize)> {
    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();
    levels.windows(2).map(|w| (w[1], w[0])).collect()
}

/// Every suite at one concentration: Theorem 4 on each of `pairs`, Lemma 3
/// only when a partition is supplied.
pub fn verify_all(
    cfg: &TestConfig,
    pairs: &[(usize, usize)],
    lemma3: Option<(&Partition, &dyn AtomSource)>,
) -> Result<Vec<TestReport>> {
    cfg.validate()?;
    let mut out = Vec::new();
    out.extend(verify_oracles(cfg)?);
    out.push(verify_h_identity(cfg)?);
    out.extend(verify_theorem1(cfg)?);
    out.extend(verify_theorem2(cfg)?);
    out.extend(verify_lemma1(cfg)?);
    out.extend(verify_lemma2(cfg)?);
    out.extend(verify_theorem3(cfg)?);
    for &pair in pairs {
        out.extend(verify_theorem4(cfg, pair)?);
    }
    if let Some((part, g)) = lemma3 {
        out.extend(verify_lemma3(cfg, part, g)?);
    }
    Ok(out)
}

/// Stream tags, one per suite, so suites sharing a seed never share draws.
mod tags {
    pub const ORACLES: u32 = 1;
    pub const H_IDENTITY: u32 = 2;
    pub const THEOREM1: u32 = 3;
    pub const THEOREM2: u32 = 4;
    pub const LEMMA1: u32 = 5;
    pub const LEMMA2: u32 = 6;
    pub const THEOREM3: u32 = 7;
    pub const THEOREM4: u32 = 8;
    pub const LEMMA3: u32 = 9;
    pub const LEMMA3_DIRECT: u32 = 10;
    /// Bootstrap streams: `BOOTSTRAP | suite << 8 | sub-test`.
    pub const BOOTSTRAP: u32 = 1 << 20;
}
