//! Beta, geometric and Dirichlet arithmetic.
//!
//! Moments are evaluated in the log domain and exponentiated once, so `n` and
//! `c` in the thousands stay finite.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

/// Dirichlet process concentration `c > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Concentration(f64);

impl Concentration {
    pub fn new(c: f64) -> Result<Self> {
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::invalid(
                "c",
                format!("concentration must be finite and > 0, got {c}"),
            ));
        }
        Ok(Concentration(c))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// The prior stick law beta(1, c).
    pub fn prior_stick(self) -> BetaParams {
        BetaParams { a: 1.0, b: self.0 }
    }

    /// `ln(c / (c + 1))`, the log ratio of the geometric latent-index law.
    #[inline]
    pub fn ln_ratio(self) -> f64 {
        -(1.0 / self.0).ln_1p()
    }
}

impl TryFrom<f64> for Concentration {
    type Error = Error;

    fn try_from(c: f64) -> Result<Self> {
        Concentration::new(c)
    }
}

impl From<Concentration> for f64 {
    fn from(c: Concentration) -> f64 {
        c.0
    }
}

/// Shape parameters of a beta law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    a: f64,
    b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid("a", format!("must be finite and > 0, got {a}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::invalid("b", format!("must be finite and > 0, got {b}")));
        }
        Ok(BetaParams { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a * self.b / (s * s * (s + 1.0))
    }
}

/// Powers for a univariate (`n`) or bivariate (`n`, `m`) moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub n: u32,
    pub m: Option<u32>,
}

impl MomentSpec {
    pub fn univariate(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "moment order must be >= 1"));
        }
        Ok(MomentSpec { n, m: None })
    }

    pub fn bivariate(n: u32, m: u32) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::invalid("n, m", "moment orders must be >= 1"));
        }
        Ok(MomentSpec { n, m: Some(m) })
    }

    /// All `(n, m)` with `1 <= n, m <= max`.
    pub fn grid(max: u32) -> Vec<MomentSpec> {
        let mut out = Vec::new();
        for n in 1..=max {
            for m in 1..=max {
                out.push(MomentSpec { n, m: Some(m) });
            }
        }
        out
    }
}

/// Numerically stable `ln(1 - x)` for `x < 1`.
#[inline]
pub fn ln_one_minus(x: f64) -> f64 {
    (-x).ln_1p()
}

/// Orders up to this are summed term by term; beyond it the log-gamma
/// difference is used.
const DIRECT_SUM_MAX_ORDER: u32 = 4096;

/// `E[V^n]` for `V ~ beta(a, b)`, i.e. `B(a + n, b) / B(a, b)`.
///
/// For moderate `n` the log moment is `Σ_{k<n} ln(1 - b / (a + b + k))`:
/// every term is small and exact to an ulp, where the log-gamma difference
/// cancels values of size `(a + b + n) ln(a + b + n)` and loses that many
/// ulps in absolute terms.
pub fn beta_moment(p: BetaParams, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n", "moment order must be >= 1"));
    }
    let log_m = if n <= DIRECT_SUM_MAX_ORDER {
        let s = p.a + p.b;
        (0..n).map(|k| (-p.b / (s + k as f64)).ln_1p()).sum::<f64>()
    } else {
        let n = n as f64;
        ln_gamma(p.a + n) + ln_gamma(p.a + p.b) - ln_gamma(p.a) - ln_gamma(p.a + p.b + n)
    };
    let m = log_m.exp();
    if !m.is_finite() || m <= 0.0 {
        return Err(Error::Domain(format!(
            "beta({}, {}) moment of order {n} is not representable (log value {log_m})",
            p.a, p.b
        )));
    }
    Ok(m)
}

/// `P(J = j) = (1/(c+1)) (c/(c+1))^(j-1)`, the prior mean weight of
/// component `j`.
pub fn latent_index_pmf(c: Concentration, j: u64) -> Result<f64> {
    if j == 0 {
        return Err(Error::invalid("j", "latent index starts at 1"));
    }
    let log_p = -c.get().ln_1p() + (j - 1) as f64 * c.ln_ratio();
    Ok(log_p.exp())
}

/// `P(J > k) = (c/(c+1))^k`.
pub fn latent_index_survival(c: Concentration, k: u64) -> f64 {
    (k as f64 * c.ln_ratio()).exp()
}

/// Uniform draw on `(0, 1]`.
#[inline]
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// One draw from beta(a, b), strictly inside `(0, 1)`.
///
/// beta(1, b) and beta(a, 1) are drawn by inverting their distribution
/// functions; other shapes go through `rand_distr`. Draws that round to an
/// endpoint are redrawn.
pub fn sample_beta<R: Rng + ?Sized>(p: BetaParams, rng: &mut R) -> f64 {
    if p.a == 1.0 {
        loop {
            // 1 - u^(1/b)
            let v = -(open_unit(rng).ln() / p.b).exp_m1();
            if v > 0.0 && v < 1.0 {
                return v;
            }
        }
    }
    if p.b == 1.0 {
        loop {
            let v = (open_unit(rng).ln() / p.a).exp();
            if v > 0.0 && v < 1.0 {
                return v;
            }
        }
    }
    let dist = Beta::new(p.a, p.b).expect("BetaParams are validated");
    loop {
        let v: f64 = dist.sample(rng);
        if v > 0.0 && v < 1.0 {
            return v;
        }
    }
}

/// Draws `J` with `P(J = j) = latent_index_pmf(c, j)` by inverting one
/// uniform: `J = ceil(ln u / ln(c/(c+1)))`.
pub fn sample_latent_index<R: Rng + ?Sized>(c: Concentration, rng: &mut R) -> u64 {
    let u = open_unit(rng);
    let j = (u.ln() / c.ln_ratio()).ceil();
    // u == 1 gives 0; saturating cast for astronomically large draws.
    (j as u64).max(1)
}

/// One draw from Dirichlet(alphas) by normalising independent gamma draws.
pub fn sample_dirichlet<R: Rng + ?Sized>(alphas: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if alphas.len() < 2 {
        return Err(Error::invalid("alphas", "need at least two components"));
    }
    let gammas = alphas
        .iter()
        .map(|&a| {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::invalid("alphas", format!("components must be > 0, got {a}")));
            }
            Ok(Gamma::new(a, 1.0).expect("validated shape"))
        })
        .collect::<Result<Vec<_>>>()?;
    loop {
        let draws: Vec<f64> = gammas.iter().map(|g| g.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return Ok(draws.into_iter().map(|g| g / total).collect());
        }
    }
}

/// Distribution function of beta(1, c): `1 - (1 - y)^c`.
pub fn beta1_cdf(c: f64, y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y >= 1.0 {
        1.0
    } else {
        -(c * ln_one_minus(y)).exp_m1()
    }
}

/// Survival function of beta(1, c): `P(V >= y) = (1 - y)^c`.
pub fn beta1_survival(c: f64, y: f64) -> f64 {
    1.0 - beta1_cdf(c, y)
}

/// Quantile function of beta(1, c): `1 - (1 - p)^(1/c)`.
pub fn beta1_quantile(c: f64, p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if p >= 1.0 {
        1.0
    } else {
        -(ln_one_minus(p) / c).exp_m1()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn beta(a: f64, b: f64) -> BetaParams {
        BetaParams::new(a, b).unwrap()
    }

    fn conc(c: f64) -> Concentration {
        Concentration::new(c).unwrap()
    }

    // Composite Simpson rule on (0, 1).
    fn simpson(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
        let h = 1.0 / panels as f64;
        let mut acc = f(0.0) + f(1.0);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn concentration_rejects_bad_values() {
        assert!(Concentration::new(0.0).is_err());
        assert!(Concentration::new(-1.0).is_err());
        assert!(Concentration::new(f64::NAN).is_err());
        assert!(Concentration::new(f64::INFINITY).is_err());
        assert!(Concentration::new(1e-300).is_ok());
    }

    #[test]
    fn beta_params_reject_bad_values() {
        assert!(BetaParams::new(0.0, 1.0).is_err());
        assert!(BetaParams::new(1.0, -2.0).is_err());
        assert!(BetaParams::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn beta_moment_examples() {
        assert!((beta_moment(beta(1.0, 1.0), 1).unwrap() - 0.5).abs() < 1e-14);
        assert!((beta_moment(beta(2.0, 1.0), 1).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        // Quadrature of x^2 * 2(1 - x) over (0, 1).
        let oracle = simpson(|x| x * x * 2.0 * (1.0 - x), 1000);
        assert!((oracle - 1.0 / 6.0).abs() < 1e-12);
        assert!((beta_moment(beta(1.0, 2.0), 2).unwrap() - oracle).abs() < 1e-13);
    }

    #[test]
    fn beta_moment_matches_quadrature_on_smooth_shapes() {
        for &(a, b, n) in &[(2.0, 3.0, 1u32), (2.0, 3.0, 4), (3.0, 2.5, 2), (2.0, 5.0, 3)] {
            let norm = simpson(|x| x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0), 20_000);
            let num = simpson(|x| x.powf(a - 1.0 + n as f64) * (1.0 - x).powf(b - 1.0), 20_000);
            let got = beta_moment(beta(a, b), n).unwrap();
            assert!((got - num / norm).abs() / got < 1e-9, "a={a} b={b} n={n}");
        }
    }

    #[test]
    fn beta_moment_survives_large_arguments() {
        for (a, b, n) in [(1.0, 1000.0, 5u32), (1.0, 1.0, 1000), (2.0, 1000.0, 50), (1.0, 2.0, 100_000)] {
            let m = beta_moment(beta(a, b), n).unwrap();
            assert!(m.is_finite() && m > 0.0);
        }
        // beta(1, 1): E[V^n] = 1 / (n + 1)
        assert!((beta_moment(beta(1.0, 1.0), 1000).unwrap() * 1001.0 - 1.0).abs() < 1e-12);
        assert!(beta_moment(beta(1.0, 1.0), 0).is_err());
    }

    #[test]
    fn beta_moment_reports_underflow_as_domain_error() {
        let err = beta_moment(beta(1.0, 1e6), 100_000).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        let err = beta_moment(beta(1.0, 1000.0), 1000).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn beta_moment_recurrence() {
        for &(a, b) in &[(1.0, 0.5), (2.0, 5.0), (1.0, 100.0), (0.3, 7.5)] {
            let p = beta(a, b);
            for n in 2..=200u32 {
                let lhs = beta_moment(p, n).unwrap();
                let rhs = beta_moment(p, n - 1).unwrap() * (a + n as f64 - 1.0) / (a + b + n as f64 - 1.0);
                assert!((lhs - rhs).abs() <= 1e-12 * rhs, "a={a} b={b} n={n}");
            }
        }
    }

    #[test]
    fn beta_moment_branches_agree_at_the_switch() {
        let p = beta(1.0, 0.5);
        let n = DIRECT_SUM_MAX_ORDER;
        let direct = beta_moment(p, n).unwrap();
        let lg = (ln_gamma(1.0 + n as f64) + ln_gamma(1.5) - ln_gamma(1.0) - ln_gamma(1.5 + n as f64)).exp();
        assert!((direct - lg).abs() / direct < 1e-11);
    }

    #[test]
    fn latent_index_pmf_examples() {
        assert!((latent_index_pmf(conc(1.0), 1).unwrap() - 0.5).abs() < 1e-15);
        assert!((latent_index_pmf(conc(1.0), 3).unwrap() - 0.125).abs() < 1e-15);
        assert!(latent_index_pmf(conc(1.0), 0).is_err());
    }

    #[test]
    fn latent_index_partial_sums() {
        for &c in &[0.5, 1.0, 2.0, 5.0, 40.0] {
            for &jmax in &[1u64, 10, 100, 10_000] {
                let s: f64 = (1..=jmax).map(|j| latent_index_pmf(conc(c), j).unwrap()).sum();
                let expect = 1.0 - (c / (c + 1.0)).powf(jmax as f64);
                assert!((s - expect).abs() <= 1e-12 * expect, "c={c} jmax={jmax}");
            }
        }
    }

    #[test]
    fn sample_beta_means_and_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        for &(a, b, mean) in &[(1.0, 1.0, 0.5), (1.0, 2.0, 1.0 / 3.0), (2.0, 1.0, 2.0 / 3.0)] {
            let xs: Vec<f64> = (0..n).map(|_| sample_beta(beta(a, b), &mut rng)).collect();
            assert!(xs.iter().all(|&x| x > 0.0 && x < 1.0));
            let (m, se) = mean_se(&xs);
            assert!((m - mean).abs() <= 4.0 * se, "a={a} b={b} mean={m}");
        }
        // Variance of beta(2, 3) is 6 / 150.
        let xs: Vec<f64> = (0..n).map(|_| sample_beta(beta(2.0, 3.0), &mut rng)).collect();
        let (m, _) = mean_se(&xs);
        let sq: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
        let (var, var_se) = mean_se(&sq);
        assert!((var - 0.04).abs() <= 4.0 * var_se, "var={var}");
    }

    #[test]
    fn sample_beta_moments_match_beta_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for &(a, b) in &[(1.0, 0.5), (2.0, 5.0), (0.7, 1.3)] {
            let p = beta(a, b);
            let xs: Vec<f64> = (0..1_000_000).map(|_| sample_beta(p, &mut rng)).collect();
            for n in 1..=3 {
                let pw: Vec<f64> = xs.iter().map(|x| x.powi(n as i32)).collect();
                let (m, se) = mean_se(&pw);
                let exact = beta_moment(p, n).unwrap();
                assert!((m - exact).abs() <= 4.0 * se, "a={a} b={b} n={n}");
            }
        }
    }

    #[test]
    fn latent_index_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 1_000_000;
        let draws: Vec<u64> = (0..n).map(|_| sample_latent_index(conc(1.0), &mut rng)).collect();
        assert_eq!(*draws.iter().min().unwrap(), 1);
        for j in 1..=20u64 {
            let p = latent_index_pmf(conc(1.0), j).unwrap();
            let hits = draws.iter().filter(|&&d| d == j).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((hits - p).abs() <= 4.0 * se, "j={j} hits={hits} p={p}");
        }

        let draws: Vec<f64> = (0..n).map(|_| sample_latent_index(conc(2.0), &mut rng) as f64).collect();
        let (m, se) = mean_se(&draws);
        assert!((m - 3.0).abs() <= 4.0 * se, "mean={m}");
    }

    #[test]
    fn dirichlet_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        assert!(sample_dirichlet(&[1.0], &mut rng).is_err());
        assert!(sample_dirichlet(&[1.0, 0.0], &mut rng).is_err());

        let n = 1_000_000;
        let alphas = [2.0, 1.0, 1.0];
        let mut cols: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(n)).collect();
        for _ in 0..n {
            let d = sample_dirichlet(&alphas, &mut rng).unwrap();
            assert!((d.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for (col, x) in cols.iter_mut().zip(d) {
                col.push(x);
            }
        }
        for (col, expect) in cols.iter().zip([0.5, 0.25, 0.25]) {
            let (m, se) = mean_se(col);
            assert!((m - expect).abs() <= 4.0 * se);
        }

        let first: Vec<f64> = (0..n)
            .map(|_| sample_dirichlet(&[1.0, 1.0], &mut rng).unwrap()[0])
            .collect();
        let (m, se) = mean_se(&first);
        assert!((m - 0.5).abs() <= 4.0 * se);
    }

    #[test]
    fn beta1_helpers_are_consistent() {
        for &c in &[0.5, 1.0, 3.0] {
            for &y in &[0.01, 0.3, 0.5, 0.99] {
                assert!((beta1_quantile(c, beta1_cdf(c, y)) - y).abs() < 1e-12);
                assert!((beta1_survival(c, y) - (1.0 - y).powf(c)).abs() < 1e-14);
            }
        }
    }
}
