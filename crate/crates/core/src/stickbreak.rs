//! Prior stick-breaking: sticks, weights, base-measure atoms and truncation.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::distmath::{ln_one_minus, sample_beta, BetaParams, Concentration};
use crate::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-10;
pub const DEFAULT_HARD_CAP: usize = 1_000_000;

/// Which beta law generated each position of a stick sequence.
///
/// `Posterior { j, c }` is the stick law given that the observation came
/// from component `j`: beta(1, c+1) before `j`, beta(2, c) at `j`,
/// beta(1, c) after it. New position-dependent laws slot in here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum StickLaw {
    Prior { c: Concentration },
    Posterior { j: usize, c: Concentration },
}

impl StickLaw {
    pub fn concentration(&self) -> Concentration {
        match *self {
            StickLaw::Prior { c } | StickLaw::Posterior { c, .. } => c,
        }
    }

    /// Beta law at 1-based `position`.
    pub fn params_at(&self, position: usize) -> BetaParams {
        let c = self.concentration().get();
        let (a, b) = match *self {
            StickLaw::Prior { .. } => (1.0, c),
            StickLaw::Posterior { j, .. } => match position.cmp(&j) {
                std::cmp::Ordering::Less => (1.0, c + 1.0),
                std::cmp::Ordering::Equal => (2.0, c),
                std::cmp::Ordering::Greater => (1.0, c),
            },
        };
        BetaParams::new(a, b).expect("concentration is positive")
    }

    /// Shortest prefix this law must produce: posterior sequences always
    /// extend one position past `j` so `q` and `h` have entries beyond it.
    fn min_len(&self) -> usize {
        match *self {
            StickLaw::Prior { .. } => 1,
            StickLaw::Posterior { j, .. } => j + 1,
        }
    }
}

/// Finite prefix of stick variables, each strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StickSequence {
    values: Vec<f64>,
    law: StickLaw,
}

impl StickSequence {
    pub fn new(values: Vec<f64>, law: StickLaw) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("values", "stick sequence must be nonempty"));
        }
        if let Some(bad) = values.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::invalid(
                "values",
                format!("sticks must lie strictly inside (0, 1), got {bad}"),
            ));
        }
        if let StickLaw::Posterior { j, .. } = law {
            if j == 0 {
                return Err(Error::invalid("j", "latent index starts at 1"));
            }
        }
        Ok(StickSequence { values, law })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn law(&self) -> StickLaw {
        self.law
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// 1-based stick `v_position`.
    pub fn get(&self, position: usize) -> Option<f64> {
        position.checked_sub(1).and_then(|i| self.values.get(i).copied())
    }

    /// `ln ∏ (1 - v_l)` over the whole prefix.
    pub fn log_tail(&self) -> f64 {
        self.values.iter().map(|&v| ln_one_minus(v)).sum()
    }

    /// `out[k] = ln ∏_{l <= k} (1 - v_l)` for `k = 0..=len`, with `out[0] = 0`.
    pub fn log_remaining(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for &v in &self.values {
            acc += ln_one_minus(v);
            out.push(acc);
        }
        out
    }
}

/// Stopping rule for the infinite stick sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    epsilon: f64,
    hard_cap: usize,
    min_len: usize,
}

impl TruncationPolicy {
    pub fn new(epsilon: f64, hard_cap: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid("epsilon", format!("must lie in (0, 1), got {epsilon}")));
        }
        if hard_cap == 0 {
            return Err(Error::invalid("hard_cap", "must be >= 1"));
        }
        Ok(TruncationPolicy {
            epsilon,
            hard_cap,
            min_len: 1,
        })
    }

    /// Keep drawing until at least `min_len` sticks exist, even when the
    /// remaining mass is already below epsilon. Used by the verification
    /// suites, which need `h_l` at fixed levels on every draw.
    pub fn with_min_len(mut self, min_len: usize) -> Self {
        self.min_len = min_len.max(1);
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn hard_cap(&self) -> usize {
        self.hard_cap
    }

    pub fn min_len(&self) -> usize {
        self.min_len
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            epsilon: DEFAULT_EPSILON,
            hard_cap: DEFAULT_HARD_CAP,
            min_len: 1,
        }
    }
}

/// Draws sticks from `law` until the remaining mass `∏ (1 - v_l)` drops
/// below the policy's epsilon (and the minimum length is reached).
pub fn sample_sticks<R: Rng + ?Sized>(
    law: StickLaw,
    policy: &TruncationPolicy,
    rng: &mut R,
) -> Result<StickSequence> {
    let min_len = policy.min_len.max(law.min_len());
    let log_eps = policy.epsilon.ln();
    let mut values = Vec::new();
    let mut log_tail = 0.0f64;
    loop {
        let position = values.len() + 1;
        if position > policy.hard_cap {
            return Err(Error::TruncationOverflow {
                len: values.len(),
                tail_mass: log_tail.exp(),
            });
        }
        let v = sample_beta(law.params_at(position), rng);
        log_tail += ln_one_minus(v);
        values.push(v);
        if values.len() >= min_len && log_tail < log_eps {
            return Ok(StickSequence { values, law });
        }
    }
}

/// Prior sticks, i.i.d. beta(1, c).
pub fn sample_prior_sticks<R: Rng + ?Sized>(
    c: Concentration,
    policy: &TruncationPolicy,
    rng: &mut R,
) -> Result<StickSequence> {
    sample_sticks(StickLaw::Prior { c }, policy, rng)
}

/// Weights `w_j = v_j ∏_{l<j} (1 - v_l)` and the leftover stick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    pub weights: Vec<f64>,
    pub tail_mass: f64,
}

impl WeightSequence {
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.tail_mass
    }
}

pub fn sticks_to_weights(s: &StickSequence) -> WeightSequence {
    let mut weights = Vec::with_capacity(s.len());
    let mut log_rem = 0.0f64;
    for &v in s.values() {
        weights.push(v * log_rem.exp());
        log_rem += ln_one_minus(v);
    }
    WeightSequence {
        weights,
        tail_mass: log_rem.exp(),
    }
}

/// A source of i.i.d. atoms from the base distribution `G` on the real line.
///
/// `G` is assumed atomless: two draws are never treated as the same atom.
pub trait AtomSource: Send + Sync {
    fn draw(&self, rng: &mut dyn RngCore) -> f64;

    /// `G((-inf, x])`.
    fn cdf(&self, x: f64) -> f64;

    fn descriptor(&self) -> String;

    /// `G((lo, hi])`.
    fn mass(&self, lo: f64, hi: f64) -> f64 {
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }
}

/// Uniform base measure on `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformSource {
    lo: f64,
    hi: f64,
}

impl UniformSource {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid("uniform", format!("need finite lo < hi, got [{lo}, {hi})")));
        }
        Ok(UniformSource { lo, hi })
    }

    pub fn unit() -> Self {
        UniformSource { lo: 0.0, hi: 1.0 }
    }
}

impl AtomSource for UniformSource {
    fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        self.lo + (self.hi - self.lo) * rng.random::<f64>()
    }

    fn cdf(&self, x: f64) -> f64 {
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    fn descriptor(&self) -> String {
        format!("uniform({}, {})", self.lo, self.hi)
    }
}

/// A finite, exactly normalised discrete random measure.
///
/// `atoms[i]` carries `weights[i]`. `tail` holds the truncation residue on
/// one extra base-measure atom, and `observed` holds the posterior's atom at
/// the observation `x` (never merged with base-measure atoms).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
    pub tail: Option<WeightedAtom>,
    pub observed: Option<WeightedAtom>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedAtom {
    pub atom: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Observed,
    Atom,
    Tail,
}

/// One flat `(kind, atom, weight)` row of a serialised measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureRecord {
    pub kind: RecordKind,
    pub atom: f64,
    pub weight: f64,
}

impl DiscreteMeasure {
    fn weighted_atoms(&self) -> impl Iterator<Item = (RecordKind, f64, f64)> + '_ {
        self.observed
            .iter()
            .map(|a| (RecordKind::Observed, a.atom, a.weight))
            .chain(
                self.atoms
                    .iter()
                    .zip(&self.weights)
                    .map(|(&a, &w)| (RecordKind::Atom, a, w)),
            )
            .chain(self.tail.iter().map(|a| (RecordKind::Tail, a.atom, a.weight)))
    }

    pub fn total_mass(&self) -> f64 {
        self.weighted_atoms().map(|(_, _, w)| w).sum()
    }

    /// Mass of the set `{ t : pred(t) }`.
    pub fn mass_where(&self, pred: impl Fn(f64) -> bool) -> f64 {
        self.weighted_atoms()
            .filter(|&(_, a, _)| pred(a))
            .map(|(_, _, w)| w)
            .sum()
    }

    /// Mass of the half-open interval `(lo, hi]`.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        self.mass_where(|t| t > lo && t <= hi)
    }

    /// Flat rows: observed atom first (if any), base atoms, then the tail.
    pub fn records(&self) -> Vec<MeasureRecord> {
        self.weighted_atoms()
            .map(|(kind, atom, weight)| MeasureRecord { kind, atom, weight })
            .collect()
    }
}

/// A truncated draw of `P ~ DP(c, G)`; the residual stick goes to one fresh
/// atom so the measure is exactly normalised.
pub fn sample_prior_measure<R: Rng>(
    c: Concentration,
    g: &dyn AtomSource,
    policy: &TruncationPolicy,
    rng: &mut R,
) -> Result<DiscreteMeasure> {
    let sticks = sample_prior_sticks(c, policy, rng)?;
    let ws = sticks_to_weights(&sticks);
    let atoms = (0..ws.weights.len()).map(|_| g.draw(rng)).collect();
    let tail = WeightedAtom {
        atom: g.draw(rng),
        weight: ws.tail_mass,
    };
    Ok(DiscreteMeasure {
        atoms,
        weights: ws.weights,
        tail: Some(tail),
        observed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn conc(c: f64) -> Concentration {
        Concentration::new(c).unwrap()
    }

    fn prior_seq(v: &[f64]) -> StickSequence {
        StickSequence::new(v.to_vec(), StickLaw::Prior { c: conc(1.0) }).unwrap()
    }

    // Direct product evaluation, no log domain.
    fn naive_weights(v: &[f64]) -> (Vec<f64>, f64) {
        let mut w = Vec::new();
        let mut rem = 1.0;
        for &x in v {
            w.push(x * rem);
            rem *= 1.0 - x;
        }
        (w, rem)
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::new(0.0, 10).is_err());
        assert!(TruncationPolicy::new(1.0, 10).is_err());
        assert!(TruncationPolicy::new(0.5, 0).is_err());
        let p = TruncationPolicy::default();
        assert_eq!(p.epsilon(), 1e-10);
        assert_eq!(p.hard_cap(), 1_000_000);
    }

    #[test]
    fn stick_sequence_rejects_boundary_values() {
        let law = StickLaw::Prior { c: conc(1.0) };
        assert!(StickSequence::new(vec![0.5, 1.0], law).is_err());
        assert!(StickSequence::new(vec![0.0], law).is_err());
        assert!(StickSequence::new(vec![], law).is_err());
        assert!(StickSequence::new(vec![0.5], StickLaw::Posterior { j: 0, c: conc(1.0) }).is_err());
    }

    #[test]
    fn posterior_law_table() {
        let law = StickLaw::Posterior { j: 3, c: conc(2.0) };
        let ab = |p: usize| {
            let b = law.params_at(p);
            (b.a(), b.b())
        };
        assert_eq!(ab(1), (1.0, 3.0));
        assert_eq!(ab(2), (1.0, 3.0));
        assert_eq!(ab(3), (2.0, 2.0));
        assert_eq!(ab(4), (1.0, 2.0));
        assert_eq!(ab(40), (1.0, 2.0));
    }

    #[test]
    fn weights_examples() {
        let ws = sticks_to_weights(&prior_seq(&[0.5, 0.5]));
        assert!((ws.weights[0] - 0.5).abs() < 1e-15);
        assert!((ws.weights[1] - 0.25).abs() < 1e-15);
        assert!((ws.tail_mass - 0.25).abs() < 1e-15);

        let v = [0.2, 0.3, 0.4];
        let (w, rem) = naive_weights(&v);
        let ws = sticks_to_weights(&prior_seq(&v));
        for ((a, b), expect) in ws.weights.iter().zip(&w).zip([0.2, 0.24, 0.224]) {
            assert!((a - b).abs() < 1e-15);
            assert!((a - expect).abs() < 1e-15);
        }
        assert!((ws.tail_mass - rem).abs() < 1e-15);
        assert!((ws.tail_mass - 0.336).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn weights_follow_product_formula(v in prop::collection::vec(1e-6f64..(1.0 - 1e-6), 1..200)) {
            let ws = sticks_to_weights(&prior_seq(&v));
            let (w, rem) = naive_weights(&v);
            for (a, b) in ws.weights.iter().zip(&w) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300));
            }
            prop_assert!((ws.tail_mass - rem).abs() <= 1e-12 * rem.max(1e-300));
            prop_assert!((ws.total_mass() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn prior_sticks_respect_stopping_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let policy = TruncationPolicy::new(0.5, 10_000).unwrap();
        for _ in 0..10_000 {
            let s = sample_prior_sticks(conc(1.0), &policy, &mut rng).unwrap();
            assert!(s.log_tail() < 0.5f64.ln());
            // The first stop: the prefix one shorter is still above epsilon.
            let lr = s.log_remaining();
            assert!(lr[s.len() - 1] >= 0.5f64.ln());
        }

        let policy = TruncationPolicy::new(1e-10, DEFAULT_HARD_CAP).unwrap();
        let runs = 10_000;
        let mut acc = 0.0;
        for _ in 0..runs {
            let s = sample_prior_sticks(conc(1.0), &policy, &mut rng).unwrap();
            acc += -s.log_tail();
        }
        assert!(acc / runs as f64 >= (1e10f64).ln());

        let policy = TruncationPolicy::new(1e-6, DEFAULT_HARD_CAP).unwrap();
        for _ in 0..1000 {
            let s = sample_prior_sticks(conc(0.5), &policy, &mut rng).unwrap();
            assert!(s.values().iter().all(|&v| v > 0.0 && v < 1.0));
            assert!(sticks_to_weights(&s).tail_mass < 1e-6);
        }
    }

    #[test]
    fn hard_cap_overflow_reports_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let policy = TruncationPolicy::new(1e-10, 5).unwrap();
        match sample_prior_sticks(conc(1000.0), &policy, &mut rng) {
            Err(Error::TruncationOverflow { len, tail_mass }) => {
                assert_eq!(len, 5);
                assert!(tail_mass > 1e-10 && tail_mass < 1.0);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn min_len_extends_past_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let policy = TruncationPolicy::new(0.9, 100).unwrap().with_min_len(7);
        for _ in 0..100 {
            assert!(sample_prior_sticks(conc(0.5), &policy, &mut rng).unwrap().len() >= 7);
        }
    }

    #[test]
    fn measure_is_normalised_and_serialises_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let g = UniformSource::unit();
        let policy = TruncationPolicy::default();
        for _ in 0..1000 {
            let m = sample_prior_measure(conc(2.0), &g, &policy, &mut rng).unwrap();
            assert!((m.total_mass() - 1.0).abs() <= 1e-12);
            assert_eq!(m.atoms.len(), m.weights.len());
            assert!(m.tail.unwrap().weight < 1e-10);
            let recs = m.records();
            assert_eq!(recs.len(), m.atoms.len() + 1);
            assert_eq!(recs.last().unwrap().kind, RecordKind::Tail);
        }
    }

    fn interval_mass_moments(c: f64, draws: usize, seed: u64) -> (f64, f64, f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = UniformSource::unit();
        let policy = TruncationPolicy::default();
        let xs: Vec<f64> = (0..draws)
            .map(|_| {
                sample_prior_measure(conc(c), &g, &policy, &mut rng)
                    .unwrap()
                    .mass_in(0.0, 0.5)
            })
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
        let var = dev.iter().sum::<f64>() / n;
        let sd = (dev.iter().sum::<f64>() / (n - 1.0)).sqrt();
        let var_sd = (dev.iter().map(|d| (d - var).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        (mean, sd / n.sqrt(), var, var_sd / n.sqrt())
    }

    #[test]
    fn interval_mass_has_dp_mean_and_variance() {
        // E P(A) = G(A)
        let (mean, se, _, _) = interval_mass_moments(1.0, 10_000, 25);
        assert!((mean - 0.5).abs() <= 4.0 * se, "mean={mean}");
        // Var P(A) = G(A)(1 - G(A)) / (c + 1)
        let (_, _, var, var_se) = interval_mass_moments(5.0, 10_000, 26);
        assert!((var - 0.25 / 6.0).abs() <= 4.0 * var_se, "var={var}");
    }
}
