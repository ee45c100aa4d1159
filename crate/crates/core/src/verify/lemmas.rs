//! The auxiliary laws: `ψ_{J,l}` given `J > l`, the `(v, ψ) -> (ξ, ζ)`
//! transform, and the Dirichlet marginals of the posterior measure.

use crate::distmath::{
    beta1_cdf, beta_moment, latent_index_survival, sample_beta, sample_dirichlet, sample_latent_index,
    BetaParams,
};
use crate::posterior::{compute_psi, lemma2_transform, sample_posterior_measure, sample_posterior_sticks, Observation};
use crate::stickbreak::AtomSource;
use crate::{Error, Result};

use super::harness::par_draws;
use super::oracles::{dirichlet_moments, oracle_conditional_psi_series};
use super::stats::{covariance, mean_se, proportion, variance, Estimate};
use super::{
    factorisation_reports, ks_beta1_report, ks_report, moment_reports, tags, Partition, TestConfig,
    TestReport, MIN_SAMPLES,
};

const SERIES_TOL: f64 = 1e-12;
const ROUND_TRIP_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-10;

/// `ψ_{J,l} | J > l ~ beta(1, c)`, conditioning by rejection.
///
/// Runs with `J <= min(levels)` are rejected before any sticks are drawn.
pub fn verify_lemma1(cfg: &TestConfig) -> Result<Vec<TestReport>> {
    cfg.validate()?;
    cfg.require_levels()?;
    let c = cfg.c;
    let policy = cfg.policy;
    let levels = cfg.levels.clone();
    let min_level = levels.iter().copied().min().unwrap_or(1);

    let draws: Vec<Vec<Option<f64>>> = par_draws(cfg.seed, tags::LEMMA1, cfg.samples, |rng| {
        let j = usize::try_from(sample_latent_index(c, rng)).unwrap_or(usize::MAX);
        if j <= min_level {
            return Ok(Vec::new());
        }
        if j >= policy.hard_cap() {
            return Err(Error::TruncationOverflow {
                len: 0,
                tail_mass: 1.0,
            });
        }
        let s = sample_posterior_sticks(c, j, &policy, rng)?;
        levels
            .iter()
            .map(|&l| if l < j { compute_psi(&s, l).map(Some) } else { Ok(None) })
            .collect()
    })?;

    let n = draws.len();
    let mut out = Vec::new();
    for (k, &l) in cfg.levels.iter().enumerate() {
        let psi: Vec<f64> = draws.iter().filter_map(|d| d.get(k).copied().flatten()).collect();
        if psi.len() < MIN_SAMPLES {
            return Err(Error::UnderSampled {
                accepted: psi.len(),
                required: MIN_SAMPLES,
            });
        }
        let prefix = format!("lemma1.l={l}");
        let rate = proportion(psi.len(), n);
        out.push(TestReport::two_sided(
            format!("{prefix}.acceptance"),
            rate.mean,
            latent_index_survival(c, l as u64),
            rate.se,
            cfg.se_multiplier,
            cfg.seed,
            n,
        ));
        out.extend(moment_reports(&prefix, &psi, c.prior_stick(), cfg)?);
        out.push(ks_beta1_report(format!("{prefix}.ks"), &psi, c.get(), cfg));
        for m in 1..=cfg.moments_max {
            let series = oracle_conditional_psi_series(c, l, m)?;
            let exact = beta_moment(c.prior_stick(), m)?;
            out.push(TestReport::upper_bound(
                format!("{prefix}.series.n={m}"),
                (series - exact).abs() / exact,
                SERIES_TOL,
                cfg.seed,
                0,
            ));
        }
    }
    Ok(out)
}

/// For independent `v ~ beta(1, c+1)` and `ψ ~ beta(1, c)`:
/// `ξ = ψ(1 - v) ~ beta(1, c+1)`, `ζ = v / (1 - ξ) ~ beta(1, c)`, and `ξ`
/// is independent of `ζ`.
pub fn verify_lemma2(cfg: &TestConfig) -> Result<Vec<TestReport>> {
    cfg.validate()?;
    let c = cfg.c.get();
    let v_law = BetaParams::new(1.0, c + 1.0)?;
    let psi_law = cfg.c.prior_stick();

    let draws = par_draws(cfg.seed, tags::LEMMA2, cfg.samples, |rng| {
        let v = sample_beta(v_law, rng);
        let psi = sample_beta(psi_law, rng);
        let t = lemma2_transform(v, psi)?;
        let (v2, psi2) = t.invert();
        let err = (v2 - v).abs().max((psi2 - psi).abs());
        Ok((t.xi, t.zeta, err))
    })?;
    let xi: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let zeta: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let max_err = draws.iter().map(|d| d.2).fold(0.0, f64::max);

    let mut out = moment_reports("lemma2.xi", &xi, v_law, cfg)?;
    out.push(ks_report("lemma2.xi.ks".into(), &xi, |y| beta1_cdf(c + 1.0, y), cfg));
    out.extend(moment_reports("lemma2.zeta", &zeta, psi_law, cfg)?);
    out.push(ks_beta1_report("lemma2.zeta.ks".into(), &zeta, c, cfg));
    let tag = tags::BOOTSTRAP | (tags::LEMMA2 << 8);
    out.extend(factorisation_reports("lemma2.xi_zeta", &xi, &zeta, cfg, tag));
    out.push(
        TestReport::upper_bound("lemma2.round_trip", max_err, ROUND_TRIP_TOL, cfg.seed, draws.len())
            .with_note("max absolute error of (v, psi) rebuilt from (xi, zeta)"),
    );
    Ok(out)
}

fn two_sample(
    name: String,
    a: Estimate,
    b: Estimate,
    cfg: &TestConfig,
    samples: usize,
) -> TestReport {
    let se = (a.se * a.se + b.se * b.se).sqrt();
    TestReport::two_sided(name, a.mean, b.mean, se, cfg.se_multiplier, cfg.seed, samples)
        .with_note("two-sample: posterior measures vs direct Dirichlet draws")
}

struct VectorSummary {
    mean: Vec<Estimate>,
    variance: Vec<Estimate>,
    covariance: Vec<(usize, usize, Estimate)>,
}

fn summarise(columns: &[Vec<f64>]) -> VectorSummary {
    let k = columns.len();
    let mut cov = Vec::new();
    for i in 0..k {
        for m in i + 1..k {
            cov.push((i, m, covariance(&columns[i], &columns[m])));
        }
    }
    VectorSummary {
        mean: columns.iter().map(|c| mean_se(c.iter().copied())).collect(),
        variance: columns.iter().map(|c| variance(c)).collect(),
        covariance: cov,
    }
}

fn transpose(rows: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    (0..k).map(|i| rows.iter().map(|r| r[i]).collect()).collect()
}

/// `(P_x(A_1), ..., P_x(A_k)) ~ Dirichlet(c G(A_i) + 1(x ∈ A_i))`: means,
/// variances and covariances against the closed forms and against direct
/// Dirichlet draws.
pub fn verify_lemma3(cfg: &TestConfig, part: &Partition, g: &dyn AtomSource) -> Result<Vec<TestReport>> {
    cfg.validate()?;
    let c = cfg.c;
    let policy = cfg.policy;
    let k = part.cells();
    let x = Observation(part.observation());

    let rows = par_draws(cfg.seed, tags::LEMMA3, cfg.samples, |rng| {
        let (measure, _) = sample_posterior_measure(c, x, g, &policy, rng)?;
        let mut cells = vec![0.0; k];
        for rec in measure.records() {
            cells[part.cell_of(rec.atom)] += rec.weight;
        }
        Ok(cells)
    })?;
    let alphas = part.posterior_alphas(c);
    let direct = par_draws(cfg.seed, tags::LEMMA3_DIRECT, cfg.samples, |rng| {
        sample_dirichlet(&alphas, rng)
    })?;
    let n = rows.len();

    let mass_err = rows
        .iter()
        .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);

    let post = summarise(&transpose(&rows, k));
    let dir = summarise(&transpose(&direct, k));
    let reference = dirichlet_moments(&alphas);
    let note = format!("alphas = {alphas:?}");

    let mut out = Vec::new();
    for i in 0..k {
        let (est, exact) = (post.mean[i], reference.mean[i]);
        out.push(
            TestReport::two_sided(format!("lemma3.mean.A{}", i + 1), est.mean, exact, est.se, cfg.se_multiplier, cfg.seed, n)
                .with_note(note.clone()),
        );
    }
    for i in 0..k {
        let (est, exact) = (post.variance[i], reference.variance[i]);
        out.push(
            TestReport::two_sided(format!("lemma3.var.A{}", i + 1), est.mean, exact, est.se, cfg.se_multiplier, cfg.seed, n)
                .with_note(note.clone()),
        );
    }
    for (&(i, m, est), &(_, _, exact)) in post.covariance.iter().zip(&reference.covariance) {
        out.push(
            TestReport::two_sided(
                format!("lemma3.cov.A{}.A{}", i + 1, m + 1),
                est.mean,
                exact,
                est.se,
                cfg.se_multiplier,
                cfg.seed,
                n,
            )
            .with_note(note.clone()),
        );
    }
    for i in 0..k {
        out.push(two_sample(format!("lemma3.direct.mean.A{}", i + 1), post.mean[i], dir.mean[i], cfg, n));
        out.push(two_sample(format!("lemma3.direct.var.A{}", i + 1), post.variance[i], dir.variance[i], cfg, n));
    }
    for (&(i, m, a), &(_, _, b)) in post.covariance.iter().zip(&dir.covariance) {
        out.push(two_sample(format!("lemma3.direct.cov.A{}.A{}", i + 1, m + 1), a, b, cfg, n));
    }
    out.push(TestReport::upper_bound("lemma3.mass", mass_err, MASS_TOL, cfg.seed, n));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmath::Concentration;
    use crate::stickbreak::UniformSource;
    use crate::verify::all_pass;

    fn cfg(c: f64, samples: usize, seed: u64) -> TestConfig {
        let mut cfg = TestConfig::new(Concentration::new(c).unwrap(), samples, seed).unwrap();
        cfg.moments_max = 2;
        cfg.bootstrap_resamples = 50;
        cfg
    }

    #[test]
    fn lemma1_reference_values() {
        let mut c = cfg(1.0, 40_000, 5);
        c.levels = vec![2];
        let reports = verify_lemma1(&c).unwrap();
        assert!((reports[0].reference - 0.25).abs() < 1e-14);
        assert!((reports[1].reference - 0.5).abs() < 1e-14);
        assert!(all_pass(&reports), "{reports:#?}");
    }

    #[test]
    fn lemma1_undersampling_is_an_error() {
        let mut c = cfg(0.5, 1000, 6);
        c.levels = vec![5];
        assert!(matches!(verify_lemma1(&c), Err(Error::UnderSampled { .. })));
    }

    #[test]
    fn lemma2_reference_values() {
        let reports = verify_lemma2(&cfg(1.0, 20_000, 7)).unwrap();
        let get = |name: &str| reports.iter().find(|r| r.name == name).unwrap();
        assert!((get("lemma2.xi.moment.n=1").reference - 1.0 / 3.0).abs() < 1e-14);
        assert!((get("lemma2.zeta.moment.n=1").reference - 0.5).abs() < 1e-14);
        let f = get("lemma2.xi_zeta.factorise.n=1.m=1");
        assert!((f.reference - 1.0 / 6.0).abs() < 0.01);
        assert!(all_pass(&reports), "{reports:#?}");
    }

    #[test]
    fn lemma3_two_cell_references() {
        let g = UniformSource::unit();
        let part = Partition::unit_interval(&[0.5], 0.25, &g).unwrap();
        let reports = verify_lemma3(&cfg(1.0, 20_000, 8), &part, &g).unwrap();
        let get = |name: &str| reports.iter().find(|r| r.name == name).unwrap();
        assert_eq!(get("lemma3.mean.A1").reference, 0.75);
        assert_eq!(get("lemma3.mean.A2").reference, 0.25);
        assert!((get("lemma3.var.A1").reference - 0.0625).abs() < 1e-15);
        assert!(get("lemma3.mass").passed());
        assert!(all_pass(&reports), "{reports:#?}");
    }
}
