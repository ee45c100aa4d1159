//! Checks on the posterior draw `(J, v)`: the law of `w_x`, the marginal law
//! of each recovered stick `h_l`, and the independence of `h_l` from `w_x`
//! and from other levels.

use crate::distmath::{beta1_quantile, beta1_survival, beta_moment, latent_index_survival};
use crate::posterior::{compute_h_closed_form, compute_w_x, latent_index, sample_joint_sticks};
use crate::{Error, Result};

use super::harness::par_draws;
use super::oracles::{oracle_survival_split_head, oracle_survival_split_tail, oracle_wx_moment_series};
use super::stats::{chi_square_critical, chi_square_independence, correlation, proportion};
use super::{factorisation_reports, ks_beta1_report, moment_reports, tags, TestConfig, TestReport};

const SURVIVAL_POINTS: [f64; 3] = [0.1, 0.5, 0.9];
const CHI_SQUARE_BINS: usize = 10;

/// Relative tolerance for exact series identities.
const SERIES_TOL: f64 = 1e-12;

const SURVIVAL_NOTE: &str = "P(h_l >= y) = (1-y)^c (1-r^l) [J <= l] + (1-y)^c r^l [J > l], r = c/(c+1)";

/// One posterior draw reduced to the latent index, `w_x`, and `h` at the
/// requested levels.
struct LevelDraw {
    j: usize,
    w_x: f64,
    h: Vec<f64>,
}

fn level_draws(cfg: &TestConfig, levels: &[usize], tag: u32) -> Result<Vec<LevelDraw>> {
    let max_level = levels.iter().copied().max().unwrap_or(1);
    let policy = cfg.policy.with_min_len(max_level + 1);
    let c = cfg.c;
    par_draws(cfg.seed, tag, cfg.samples, |rng| {
        let s = sample_joint_sticks(c, &policy, rng)?;
        let h = levels
            .iter()
            .map(|&l| compute_h_closed_form(&s, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(LevelDraw {
            j: latent_index(&s)?,
            w_x: compute_w_x(&s)?,
            h,
        })
    })
}

fn column(draws: &[LevelDraw], k: usize) -> Vec<f64> {
    draws.iter().map(|d| d.h[k]).collect()
}

/// `w_x ~ beta(1, c)`: moment ladder, KS test, and the exact latent-index
/// series for each moment.
pub fn verify_theorem1(cfg: &TestConfig) -> Result<Vec<TestReport>> {
    cfg.validate()?;
    let c = cfg.c;
    let policy = cfg.policy;
    let wx = par_draws(cfg.seed, tags::THEOREM1, cfg.samples, |rng| {
        compute_w_x(&sample_joint_sticks(c, &policy, rng)?)
    })?;

    let mut out = moment_reports("theorem1.w_x", &wx, c.prior_stick(), cfg)?;
    out.push(ks_beta1_report("theorem1.w_x.ks".into(), &wx, c.get(), cfg));
    for n in 1..=cfg.moments_max {
        let series = oracle_wx_moment_series(c, n)?;
        let exact = beta_moment(c.prior_stick(), n)?;
        out.push(TestReport::upper_bound(
            format!("theorem1.series.n={n}"),
            (series - exact).abs() / exact,
            SERIES_TOL,
            cfg.seed,
            0,
        ));
    }
    Ok(out)
}

/// Marginal `h_l ~ beta(1, c)` at each level, plus the survival function
/// split by `J <= l` and `J > l`.
pub fn verify_theorem2(cfg: &TestConfig) -> Result<Vec<TestReport>> {
    cfg.validate()?;
    cfg.require_levels()?;
    let c = cfg.c;
    let draws = level_draws(cfg, &cfg.levels, tags::THEOREM2)?;
    let n = draws.len();

    let mut out = Vec::new();
    for (k, &l) in cfg.levels.iter().enumerate() {
        let h = column(&draws, k);
        let prefix = format!("theorem2.l={l}");
        out.extend(moment_reports(&prefix, &h, c.prior_stick(), cfg)?);
        out.push(ks_beta1_report(format!("{prefix}.ks"), &h, c.get(), cfg));

        for y in SURVIVAL_POINTS {
            let mut all = 0;
            let mut head = 0;
            for (d, &hl) in draws.iter().zip(&h) {
                if hl >= y {
                    all += 1;
                    if d.j <= l {
                        head += 1;
                    }
                }
            }
            let tail = all - head;
            let checks = [
                ("survival", all, beta1_survival(c.get(), y)),
                ("survival_head", head, oracle_survival_split_head(c, l, y)),
                ("survival_tail", tail, oracle_survival_split_tail(c, l, y)),
            ];
            for (label, hits, reference) in checks {
                let est = proportion(hits, n);
                out.push(
                    TestReport::two_sided(
                        format!("{prefix}.{label}.y={y}"),
                        est.mean,
                        reference,
                        est.se,
                        cfg.se_multiplier,
                        cfg.seed,
                        n,
                    )
                    .with_note(SURVIVAL_NOTE),
                );
            }
        }
    }
    Ok(out)
}

/// `E[h_l^n w_x^m] = E[h_l^n] E[w_x^m]` for `(n, m)` in `{1, 2}^2` at each
/// level.
pub fn verify_theorem3(cfg: &TestConfig) -> Result<Vec<TestReport>> {
    cfg.validate()?;
    cfg.require_levels()?;
    let draws = level_draws(cfg, &cfg.levels, tags::THEOREM3)?;
    let wx: Vec<f64> = draws.iter().map(|d| d.w_x).collect();
    let mut out = Vec::new();
    for (k, &l) in cfg.levels.iter().enumerate() {
        let h = column(&draws, k);
        let tag = tags::BOOTSTRAP | (tags::THEOREM3 << 8) | k as u32;
        out.extend(factorisation_reports(&format!("theorem3.l={l}"), &h, &wx, cfg, tag));
    }
    Ok(out)
}

/// Independence of `h_l` and `h_{l'}` for `l > l'`: product moments, a
/// chi-square test on a 10x10 grid of beta(1, c) deciles, and the
/// correlation on the branch `J <= l'`.
pub fn verify_theorem4(cfg: &TestConfig, pair: (usize, usize)) -> Result<Vec<TestReport>> {
    cfg.validate()?;
    let (l, lp) = pair;
    if lp == 0 || l <= lp {
        return Err(Error::invalid("l_pair", format!("need l > l' >= 1, got ({l}, {lp})")));
    }
    let c = cfg.c;
    let draws = level_draws(cfg, &[l, lp], tags::THEOREM4)?;
    let hl = column(&draws, 0);
    let hlp = column(&draws, 1);
    let prefix = format!("theorem4.l={l}.l'={lp}");

    let tag = tags::BOOTSTRAP | (tags::THEOREM4 << 8) | ((l as u32) << 4) | lp as u32;
    let mut out = factorisation_reports(&prefix, &hl, &hlp, cfg, tag);

    let edges: Vec<f64> = (0..=CHI_SQUARE_BINS)
        .map(|k| beta1_quantile(c.get(), k as f64 / CHI_SQUARE_BINS as f64))
        .collect();
    let (stat, df) = chi_square_independence(&hl, &hlp, &edges, &edges);
    out.push(
        TestReport::upper_bound(
            format!("{prefix}.chi_square"),
            stat,
            chi_square_critical(df.max(1), cfg.ks_alpha),
            cfg.seed,
            draws.len(),
        )
        .with_note(format!("{df} degrees of freedom")),
    );

    let (bx, by): (Vec<f64>, Vec<f64>) = draws
        .iter()
        .filter(|d| d.j <= lp)
        .map(|d| (d.h[0], d.h[1]))
        .unzip();
    if bx.len() >= 2 {
        let r = correlation(&bx, &by);
        out.push(
            TestReport::two_sided(
                format!("{prefix}.branch_corr"),
                r.mean,
                0.0,
                r.se,
                cfg.se_multiplier,
                cfg.seed,
                bx.len(),
            )
            .with_note(format!(
                "restricted to J <= {lp}; expected share {:.6}",
                1.0 - latent_index_survival(c, lp as u64)
            )),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmath::Concentration;
    use crate::verify::all_pass;

    fn cfg(c: f64, samples: usize, seed: u64) -> TestConfig {
        let mut cfg = TestConfig::new(Concentration::new(c).unwrap(), samples, seed).unwrap();
        cfg.moments_max = 2;
        cfg.bootstrap_resamples = 50;
        cfg
    }

    #[test]
    fn theorem1_small_run() {
        let reports = verify_theorem1(&cfg(2.0, 50_000, 1)).unwrap();
        // 2 moments + KS + 2 series
        assert_eq!(reports.len(), 5);
        assert!((reports[0].reference - 1.0 / 3.0).abs() < 1e-14);
        assert!((reports[1].reference - 1.0 / 6.0).abs() < 1e-14);
        assert!(all_pass(&reports), "{reports:#?}");
    }

    #[test]
    fn theorem2_reference_values() {
        let reports = verify_theorem2(&cfg(1.0, 20_000, 2)).unwrap();
        let surv = reports
            .iter()
            .find(|r| r.name == "theorem2.l=1.survival.y=0.5")
            .unwrap();
        assert!((surv.reference - 0.5).abs() < 1e-14);
        let m = reports.iter().find(|r| r.name == "theorem2.l=2.moment.n=1").unwrap();
        assert!((m.reference - 0.5).abs() < 1e-14);
        assert!(all_pass(&reports), "{:#?}", reports.iter().filter(|r| !r.passed()).collect::<Vec<_>>());
    }

    #[test]
    fn theorem4_rejects_bad_pair() {
        assert!(verify_theorem4(&cfg(1.0, 1000, 3), (1, 2)).is_err());
        assert!(verify_theorem4(&cfg(1.0, 1000, 3), (1, 0)).is_err());
    }

    #[test]
    fn theorem3_and_4_small_runs() {
        let c = cfg(1.0, 20_000, 4);
        let r3 = verify_theorem3(&c).unwrap();
        assert_eq!(r3.len(), 12);
        let r4 = verify_theorem4(&c, (2, 1)).unwrap();
        assert_eq!(r4.len(), 6);
        assert!(all_pass(&r3) && all_pass(&r4));
    }
}
