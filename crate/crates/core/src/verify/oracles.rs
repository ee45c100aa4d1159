//! Closed-form expectations used as references.
//!
//! Each is written out from its own log-gamma expression rather than routed
//! through [`beta_moment`], so the self-consistency checks compare two
//! independent evaluations.

use statrs::function::gamma::ln_gamma;

use crate::distmath::{beta_moment, latent_index_pmf, latent_index_survival, Concentration};
use crate::{Error, Result};

/// Series terms below this fraction of the running sum stop the summation.
const SERIES_TOL: f64 = 1e-18;
const SERIES_MAX_TERMS: usize = 10_000_000;

/// `E[ψ_{j,l}^n] = Γ(2+c) Γ(n+2) / Γ(n+2+c) · ((c+1)/(c+1+n))^(j-l-1)`
/// for sticks drawn under the posterior law given `J = j`.
pub fn oracle_psi_moment(c: Concentration, j: usize, l: usize, n: u32) -> Result<f64> {
    if l == 0 || l >= j {
        return Err(Error::invalid("l", format!("need 1 <= l < j, got l={l}, j={j}")));
    }
    if n == 0 {
        return Err(Error::invalid("n", "moment order must be >= 1"));
    }
    let (c, nf) = (c.get(), n as f64);
    let log_head = ln_gamma(2.0 + c) + ln_gamma(nf + 2.0) - ln_gamma(nf + 2.0 + c);
    let log_geo = (j - l - 1) as f64 * ((c + 1.0).ln() - (c + 1.0 + nf).ln());
    Ok((log_head + log_geo).exp())
}

/// `E[v^n]` for `v ~ beta(1, c)` written directly as
/// `Γ(n+1) Γ(c+1) / Γ(n+c+1)`.
pub fn oracle_beta1_moment(c: Concentration, n: u32) -> f64 {
    let (c, nf) = (c.get(), n as f64);
    (ln_gamma(nf + 1.0) + ln_gamma(c + 1.0) - ln_gamma(nf + c + 1.0)).exp()
}

/// Sums `term(j)` for `j = first, first+1, ...` until the terms are
/// negligible. Terms must be positive and eventually geometric.
fn sum_series(first: usize, term: impl Fn(usize) -> Result<f64>) -> Result<f64> {
    let mut acc = 0.0;
    for j in first..first + SERIES_MAX_TERMS {
        let t = term(j)?;
        acc += t;
        if t <= SERIES_TOL * acc {
            return Ok(acc);
        }
    }
    Err(Error::Domain("series did not converge".into()))
}

/// `E[w_x^n]` as the mixture over the latent index:
/// `Σ_j P(J=j) · E[v_j^n] · Π_{l<j} E[(1-v_l)^n]` with `v_j ~ beta(2, c)`
/// and `v_l ~ beta(1, c+1)`.
pub fn oracle_wx_moment_series(c: Concentration, n: u32) -> Result<f64> {
    let cf = c.get();
    let at_j = beta_moment(crate::distmath::BetaParams::new(2.0, cf)?, n)?;
    let shrink = (cf + 1.0) / (cf + 1.0 + n as f64);
    sum_series(1, |j| {
        Ok(latent_index_pmf(c, j as u64)? * at_j * shrink.powi(j as i32 - 1))
    })
}

/// `E[ψ_{J,l}^n | J > l]` as `Σ_{j>l} P(J=j) E[ψ_{j,l}^n] / P(J > l)`.
pub fn oracle_conditional_psi_series(c: Concentration, l: usize, n: u32) -> Result<f64> {
    let s = sum_series(l + 1, |j| {
        Ok(latent_index_pmf(c, j as u64)? * oracle_psi_moment(c, j, l, n)?)
    })?;
    Ok(s / latent_index_survival(c, l as u64))
}

/// `P(h_l >= y, J <= l) = (1 - y)^c (1 - (c/(1+c))^l)`.
pub fn oracle_survival_split_head(c: Concentration, l: usize, y: f64) -> f64 {
    (1.0 - y).powf(c.get()) * (1.0 - latent_index_survival(c, l as u64))
}

/// `P(h_l >= y, J > l) = (1 - y)^c (c/(1+c))^l`.
pub fn oracle_survival_split_tail(c: Concentration, l: usize, y: f64) -> f64 {
    (1.0 - y).powf(c.get()) * latent_index_survival(c, l as u64)
}

/// Mean, variance and covariance of a Dirichlet(alphas) vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletMoments {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Upper-triangle covariances `(i, k, cov)` with `i < k`.
    pub covariance: Vec<(usize, usize, f64)>,
}

pub fn dirichlet_moments(alphas: &[f64]) -> DirichletMoments {
    let a0: f64 = alphas.iter().sum();
    let denom = a0 * a0 * (a0 + 1.0);
    let mean = alphas.iter().map(|a| a / a0).collect();
    let variance = alphas.iter().map(|a| a * (a0 - a) / denom).collect();
    let mut covariance = Vec::new();
    for i in 0..alphas.len() {
        for k in i + 1..alphas.len() {
            covariance.push((i, k, -alphas[i] * alphas[k] / denom));
        }
    }
    DirichletMoments {
        mean,
        variance,
        covariance,
    }
}
