//! The posterior of the stick-breaking representation given one observation
//! `X = x`.
//!
//! Given the latent index `J = j` the sticks are independent with
//!
//! ```text
//! v_l ~ beta(1, c+1)   l < j
//! v_l ~ beta(2, c)     l = j
//! v_l ~ beta(1, c)     l > j
//! ```
//!
//! and `J` itself is geometric with `P(J = j) = (1/(c+1)) (c/(c+1))^(j-1)`.
//! The posterior measure splits as `P_j = (1 - w_x) Σ q_l δ_{θ_l} + w_x δ_x`
//! where `w_x = w_j` and `q` is the weight sequence with position `j` deleted
//! and renormalised. Reading `q` back as sticks gives `h`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distmath::{ln_one_minus, sample_latent_index, Concentration};
use crate::stickbreak::{
    sample_sticks, sticks_to_weights, AtomSource, DiscreteMeasure, StickLaw, StickSequence,
    TruncationPolicy, WeightedAtom,
};
use crate::{Error, Result};

/// `1 - w_x` below this is treated as a degenerate posterior.
const DEGENERATE_TOL: f64 = 1e-12;
/// `compute_h_from_q` stops once the unexplained remainder drops below this.
const REMAINDER_FLOOR: f64 = 1e-14;

/// The observed value `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub f64);

/// Everything derived from one posterior draw of `(J, v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraw {
    pub j: usize,
    pub sticks: StickSequence,
    pub w_x: f64,
    /// Weights with position `j` removed, divided by `1 - w_x`.
    pub q: Vec<f64>,
    /// Stick mass left beyond the generated prefix, on the `q` scale.
    pub q_tail: f64,
    /// `h` recovered from `q` by the ratio recursion.
    pub h: Vec<f64>,
    pub psi: Option<PsiValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiValue {
    pub l: usize,
    pub value: f64,
}

/// Flat dump of a [`PosteriorDraw`], truncated to its first `k` positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRecord {
    pub j: usize,
    pub w_x: f64,
    pub sticks: Vec<f64>,
    pub q: Vec<f64>,
    pub h: Vec<f64>,
}

impl PosteriorDraw {
    pub fn record(&self, k: usize) -> PosteriorRecord {
        let head = |xs: &[f64]| xs.iter().take(k).copied().collect::<Vec<_>>();
        PosteriorRecord {
            j: self.j,
            w_x: self.w_x,
            sticks: head(self.sticks.values()),
            q: head(&self.q),
            h: head(&self.h),
        }
    }

    /// Attach `ψ_{j,l}` for a requested level `l < j`.
    pub fn with_psi(mut self, l: usize) -> Result<Self> {
        let value = compute_psi(&self.sticks, l)?;
        self.psi = Some(PsiValue { l, value });
        Ok(self)
    }
}

/// Sticks under the posterior law given `J = j`, truncated by the same rule
/// as the prior and always at least `j + 1` long.
pub fn sample_posterior_sticks<R: Rng + ?Sized>(
    c: Concentration,
    j: usize,
    policy: &TruncationPolicy,
    rng: &mut R,
) -> Result<StickSequence> {
    if j == 0 {
        return Err(Error::invalid("j", "latent index starts at 1"));
    }
    sample_sticks(StickLaw::Posterior { j, c }, policy, rng)
}

fn posterior_index(s: &StickSequence) -> Result<usize> {
    match s.law() {
        StickLaw::Posterior { j, .. } => Ok(j),
        StickLaw::Prior { .. } => Err(Error::WrongLaw(
            "expected a posterior stick sequence, got prior sticks".into(),
        )),
    }
}

fn require_len(s: &StickSequence, needed: usize) -> Result<()> {
    if s.len() < needed {
        return Err(Error::SequenceTooShort {
            needed,
            have: s.len(),
        });
    }
    Ok(())
}

/// `w_x = v_j ∏_{l<j} (1 - v_l)`.
pub fn compute_w_x(s: &StickSequence) -> Result<f64> {
    let j = posterior_index(s)?;
    require_len(s, j)?;
    let v = s.values();
    let log_prefix: f64 = v[..j - 1].iter().map(|&x| ln_one_minus(x)).sum();
    Ok(v[j - 1] * log_prefix.exp())
}

/// `q_l = w_l / (1 - w_x)` for `l < j`, `q_l = w_{l+1} / (1 - w_x)` for
/// `l >= j`; one entry shorter than the stick prefix.
pub fn compute_q(s: &StickSequence, w_x: f64) -> Result<Vec<f64>> {
    let j = posterior_index(s)?;
    let expected = compute_w_x(s)?;
    if (w_x - expected).abs() > 1e-12 * expected {
        return Err(Error::invalid(
            "w_x",
            format!("{w_x} does not match the sticks' w_x = {expected}"),
        ));
    }
    let denom = 1.0 - w_x;
    if denom < DEGENERATE_TOL {
        return Err(Error::DegeneratePosterior { w_x });
    }
    let ws = sticks_to_weights(s);
    Ok(ws
        .weights
        .iter()
        .enumerate()
        .filter(|&(i, _)| i + 1 != j)
        .map(|(_, &w)| w / denom)
        .collect())
}

/// Leftover mass of `q` beyond the generated prefix, `∏ (1 - v_l) / (1 - w_x)`.
pub fn q_tail(s: &StickSequence, w_x: f64) -> f64 {
    s.log_tail().exp() / (1.0 - w_x)
}

/// `h_l = q_l / (1 - q_1 - ... - q_{l-1})`, with the tail mass taken as
/// `1 - Σ q`. Prefer [`compute_h_from_q_with_tail`] when the tail is known
/// exactly.
pub fn compute_h_from_q(q: &[f64]) -> Vec<f64> {
    let tail = (1.0 - q.iter().sum::<f64>()).max(0.0);
    compute_h_from_q_with_tail(q, tail)
}

/// `h_l = q_l / R_l` where the remainder `R_l = 1 - Σ_{r<l} q_r` is
/// evaluated as the suffix sum `tail + Σ_{r>=l} q_r`.
///
/// The suffix sum has no cancellation. Propagating the remainder forward
/// through `R_{l+1} = R_l (1 - h_l)` inflates its relative error by
/// `1 / (1 - h_l)` at every step. The list stops at the first position where
/// the remainder falls below 1e-14.
pub fn compute_h_from_q_with_tail(q: &[f64], tail: f64) -> Vec<f64> {
    let mut remainders = vec![0.0; q.len()];
    let mut acc = tail;
    for (r, &ql) in remainders.iter_mut().zip(q).rev() {
        acc += ql;
        *r = acc;
    }
    q.iter()
        .zip(&remainders)
        .map_while(|(&ql, &rem)| (rem >= REMAINDER_FLOOR).then(|| ql / rem))
        .collect()
}

/// `ψ_{j,l} = v_j ∏_{l<r<j} (1 - v_r)`, defined for `l < j`.
pub fn compute_psi(s: &StickSequence, l: usize) -> Result<f64> {
    let j = posterior_index(s)?;
    if l == 0 || l >= j {
        return Err(Error::invalid("l", format!("psi needs 1 <= l < j, got l={l}, j={j}")));
    }
    require_len(s, j)?;
    let v = s.values();
    let log_mid: f64 = v[l..j - 1].iter().map(|&x| ln_one_minus(x)).sum();
    Ok(v[j - 1] * log_mid.exp())
}

/// Closed form of `h_l`: `v_l / (1 - ψ_{j,l} (1 - v_l))` when `l < j`,
/// otherwise `v_{l+1}`.
pub fn compute_h_closed_form(s: &StickSequence, l: usize) -> Result<f64> {
    let j = posterior_index(s)?;
    if l == 0 {
        return Err(Error::invalid("l", "levels start at 1"));
    }
    if l >= j {
        require_len(s, l + 1)?;
        return Ok(s.values()[l]);
    }
    let psi = compute_psi(s, l)?;
    let vl = s.values()[l - 1];
    Ok(lemma2_transform(vl, psi)?.zeta)
}

/// `(v, ψ) -> (ξ, ζ)` with `ξ = ψ (1 - v)` and `ζ = v / (1 - ξ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformBundle {
    pub v: f64,
    pub psi: f64,
    pub xi: f64,
    pub zeta: f64,
    pub phi: Option<f64>,
}

impl TransformBundle {
    /// Independent extra factor `φ` scaling `ξ` in the companion ratio
    /// `w / (1 - ξ φ)`.
    pub fn with_phi(mut self, phi: f64) -> Result<Self> {
        check_open_unit("phi", phi)?;
        self.phi = Some(phi);
        Ok(self)
    }

    /// `(v, ψ)` rebuilt from `(ξ, ζ)`: `v = ζ (1 - ξ)`, `ψ = ξ / (1 - v)`.
    pub fn invert(&self) -> (f64, f64) {
        let v = self.zeta * (1.0 - self.xi);
        // 1 - ζ(1 - ξ) written without subtracting nearly equal terms.
        let one_minus_v = (1.0 - self.zeta) + self.zeta * self.xi;
        (v, self.xi / one_minus_v)
    }
}

fn check_open_unit(name: &'static str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::invalid(name, format!("must lie strictly inside (0, 1), got {x}")));
    }
    Ok(())
}

pub fn lemma2_transform(v: f64, psi: f64) -> Result<TransformBundle> {
    check_open_unit("v", v)?;
    check_open_unit("psi", psi)?;
    let xi = psi * (1.0 - v);
    let zeta = v / (1.0 - xi);
    Ok(TransformBundle {
        v,
        psi,
        xi,
        zeta,
        phi: None,
    })
}

/// Builds the full [`PosteriorDraw`] for a known latent index.
pub fn posterior_draw_from_sticks(sticks: StickSequence) -> Result<PosteriorDraw> {
    let j = posterior_index(&sticks)?;
    let w_x = compute_w_x(&sticks)?;
    let q = compute_q(&sticks, w_x)?;
    let tail = q_tail(&sticks, w_x);
    let h = compute_h_from_q_with_tail(&q, tail);
    Ok(PosteriorDraw {
        j,
        q_tail: tail,
        sticks,
        w_x,
        q,
        h,
        psi: None,
    })
}

/// Draws `J` and then the posterior sticks given `J`; the sequence's law
/// carries the drawn index.
pub fn sample_joint_sticks<R: Rng + ?Sized>(
    c: Concentration,
    policy: &TruncationPolicy,
    rng: &mut R,
) -> Result<StickSequence> {
    let j = usize::try_from(sample_latent_index(c, rng)).unwrap_or(usize::MAX);
    if j >= policy.hard_cap() {
        return Err(Error::TruncationOverflow {
            len: 0,
            tail_mass: 1.0,
        });
    }
    sample_posterior_sticks(c, j, policy, rng)
}

/// [`sample_joint_sticks`] followed by every derived quantity.
pub fn sample_posterior_draw<R: Rng + ?Sized>(
    c: Concentration,
    policy: &TruncationPolicy,
    rng: &mut R,
) -> Result<PosteriorDraw> {
    posterior_draw_from_sticks(sample_joint_sticks(c, policy, rng)?)
}

/// The latent index of a posterior stick sequence.
pub fn latent_index(s: &StickSequence) -> Result<usize> {
    posterior_index(s)
}

/// One draw of the posterior measure `P_x`: atom `x` with weight `w_x`, fresh
/// base atoms with weights `(1 - w_x) q_l`, and the truncation residue on one
/// more base atom.
pub fn sample_posterior_measure<R: Rng>(
    c: Concentration,
    x: Observation,
    g: &dyn AtomSource,
    policy: &TruncationPolicy,
    rng: &mut R,
) -> Result<(DiscreteMeasure, PosteriorDraw)> {
    let draw = sample_posterior_draw(c, policy, rng)?;
    let scale = 1.0 - draw.w_x;
    let weights: Vec<f64> = draw.q.iter().map(|&q| scale * q).collect();
    let atoms = (0..weights.len()).map(|_| g.draw(rng)).collect();
    let tail = WeightedAtom {
        atom: g.draw(rng),
        weight: scale * draw.q_tail,
    };
    let measure = DiscreteMeasure {
        atoms,
        weights,
        tail: Some(tail),
        observed: Some(WeightedAtom {
            atom: x.0,
            weight: draw.w_x,
        }),
    };
    Ok((measure, draw))
}
