//! Exact checks: the two expressions for `h` and the moment oracles.

use crate::distmath::{beta_moment, BetaParams};
use crate::posterior::{compute_h_closed_form, compute_psi, sample_posterior_draw, sample_posterior_sticks};
use crate::Result;

use super::harness::par_draws;
use super::oracles::oracle_psi_moment;
use super::stats::power_moment;
use super::{tags, TestConfig, TestReport};

pub const H_IDENTITY_TOL: f64 = 1e-10;
const ORACLE_TOL: f64 = 1e-12;

/// Agreement of `h` from the ratio recursion on `q` with its closed form,
/// position by position, over `samples` posterior draws. The statistic is
/// the largest relative discrepancy; a failing report carries the first
/// offending draw as JSON in its note.
pub fn verify_h_identity(cfg: &TestConfig) -> Result<TestReport> {
    cfg.validate()?;
    let c = cfg.c;
    let policy = cfg.policy;
    let per_draw = par_draws(cfg.seed, tags::H_IDENTITY, cfg.samples, |rng| {
        let d = sample_posterior_draw(c, &policy, rng)?;
        let mut worst = 0.0f64;
        for (i, &from_q) in d.h.iter().enumerate() {
            let closed = compute_h_closed_form(&d.sticks, i + 1)?;
            worst = worst.max((from_q - closed).abs() / closed);
        }
        let offender = if worst > H_IDENTITY_TOL {
            Some(serde_json::to_string(&d).unwrap_or_default())
        } else {
            None
        };
        Ok((worst, offender))
    })?;
    let max = per_draw.iter().map(|p| p.0).fold(0.0, f64::max);
    let report = TestReport::upper_bound("h_identity.max_rel", max, H_IDENTITY_TOL, cfg.seed, per_draw.len());
    Ok(match per_draw.into_iter().find_map(|p| p.1) {
        Some(json) => report.with_note(format!("offending draw: {json}")),
        None => report,
    })
}

/// `E[ψ_{l+1,l}^n]` from its oracle against the beta(2, c) moment, exactly,
/// and the oracle at `j = l+1` and `j = l+2` against simulated `ψ`.
pub fn verify_oracles(cfg: &TestConfig) -> Result<Vec<TestReport>> {
    cfg.validate()?;
    let c = cfg.c;
    let at_j = BetaParams::new(2.0, c.get())?;
    let mut out = Vec::new();
    for n in 1..=cfg.moments_max {
        for &l in &cfg.levels {
            let oracle = oracle_psi_moment(c, l + 1, l, n)?;
            let direct = beta_moment(at_j, n)?;
            out.push(TestReport::upper_bound(
                format!("oracle.psi.l={l}.n={n}"),
                (oracle - direct).abs() / direct,
                ORACLE_TOL,
                cfg.seed,
                0,
            ));
        }
    }

    let policy = cfg.policy;
    for (stream, gap) in [(0u32, 1usize), (1, 2)] {
        let (l, j) = (1usize, 1 + gap);
        let psi = par_draws(cfg.seed, tags::ORACLES << 4 | stream, cfg.samples, |rng| {
            compute_psi(&sample_posterior_sticks(c, j, &policy, rng)?, l)
        })?;
        for n in 1..=cfg.moments_max {
            let est = power_moment(&psi, n);
            out.push(TestReport::two_sided(
                format!("oracle.psi_mc.j={j}.l={l}.n={n}"),
                est.mean,
                oracle_psi_moment(c, j, l, n)?,
                est.se,
                cfg.se_multiplier,
                cfg.seed,
                psi.len(),
            ));
        }
    }
    Ok(out)
}
