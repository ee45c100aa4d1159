//! Sample statistics used by the suites: moment estimates with standard
//! errors, Kolmogorov-Smirnov and chi-square tests, and the bootstrap for
//! product-moment factorisation.

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::harness::stream_rng;
use rand::Rng;

/// Sample mean with its standard error `sd / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

pub fn mean_se<I>(xs: I) -> Estimate
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let it = xs.into_iter();
    let mut n = 0usize;
    let mut sum = 0.0;
    for x in it.clone() {
        n += 1;
        sum += x;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let ss: f64 = it.map(|x| (x - mean) * (x - mean)).sum();
    let se = if n > 1 { (ss / (nf - 1.0) / nf).sqrt() } else { 0.0 };
    Estimate { mean, se }
}

/// `E[X^n]` estimated from `xs`.
pub fn power_moment(xs: &[f64], n: u32) -> Estimate {
    mean_se(xs.iter().map(|&x| x.powi(n as i32)))
}

/// Bernoulli proportion with SE `sqrt(p (1 - p) / n)`.
pub fn proportion(hits: usize, n: usize) -> Estimate {
    let p = hits as f64 / n as f64;
    Estimate {
        mean: p,
        se: (p * (1.0 - p) / n as f64).sqrt(),
    }
}

/// Sample variance (divisor `n`) with the large-sample SE
/// `sqrt((m4 - s^4) / n)`.
pub fn variance(xs: &[f64]) -> Estimate {
    let m = mean_se(xs.iter().copied()).mean;
    let devs: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    mean_se(devs)
}

/// Sample covariance (divisor `n`) with SE from the centred products.
pub fn covariance(xs: &[f64], ys: &[f64]) -> Estimate {
    let mx = mean_se(xs.iter().copied()).mean;
    let my = mean_se(ys.iter().copied()).mean;
    mean_se(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)))
}

/// Pearson correlation with its null standard error `1 / sqrt(n)`.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Estimate {
    let cov = covariance(xs, ys).mean;
    let vx = variance(xs).mean;
    let vy = variance(ys).mean;
    Estimate {
        mean: cov / (vx * vy).sqrt(),
        se: 1.0 / (xs.len() as f64).sqrt(),
    }
}

/// `sup |F_n - F|` for the sample `xs` against the distribution function
/// `cdf`. Returns the statistic and the sorted sample.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, Vec<f64>) {
    let mut sorted = xs.to_vec();
    sorted.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .fold(0.0f64, |acc, (i, &x)| {
            let f = cdf(x);
            let above = (i as f64 + 1.0) / n - f;
            let below = f - i as f64 / n;
            acc.max(above).max(below)
        });
    (d, sorted)
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // The alternating series converges slowly here; the value is 1 to
        // double precision.
        return 1.0;
    }
    let mut acc = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        acc += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * acc).clamp(0.0, 1.0)
}

/// Critical value of the one-sample KS statistic at level `alpha`, using
/// the asymptotic Kolmogorov law with Stephens' finite-`n` scaling
/// `(sqrt(n) + 0.12 + 0.11 / sqrt(n)) D`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.2f64, 10.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let sn = (n as f64).sqrt();
    lambda / (sn + 0.12 + 0.11 / sn)
}

/// At most `points` evenly spaced `(value, F_n(value))` pairs from a sorted
/// sample.
pub fn thin_ecdf(sorted: &[f64], points: usize) -> Vec<(f64, f64)> {
    let n = sorted.len();
    if n == 0 || points == 0 {
        return Vec::new();
    }
    let step = n.div_ceil(points).max(1);
    let mut out: Vec<(f64, f64)> = (step - 1..n)
        .step_by(step)
        .map(|i| (sorted[i], (i + 1) as f64 / n as f64))
        .collect();
    if out.last().map(|&(_, p)| p < 1.0).unwrap_or(true) {
        out.push((sorted[n - 1], 1.0));
    }
    out
}

/// Index of the bin `(edges[i], edges[i+1]]` holding `x`; values beyond
/// the outer edges fall in the outer bins.
fn bin_of(edges: &[f64], x: f64) -> usize {
    let inner = &edges[1..edges.len() - 1];
    inner.partition_point(|&e| e < x)
}

/// Pearson chi-square statistic of independence on the contingency table
/// of `(xs, ys)` binned by `x_edges` and `y_edges`. Returns the statistic and
/// its degrees of freedom. Empty rows or columns are dropped.
pub fn chi_square_independence(
    xs: &[f64],
    ys: &[f64],
    x_edges: &[f64],
    y_edges: &[f64],
) -> (f64, usize) {
    let rows = x_edges.len() - 1;
    let cols = y_edges.len() - 1;
    let mut table = vec![vec![0usize; cols]; rows];
    for (&x, &y) in xs.iter().zip(ys) {
        table[bin_of(x_edges, x)][bin_of(y_edges, y)] += 1;
    }
    let n = xs.len() as f64;
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum::<usize>() as f64).collect();
    let col_sums: Vec<f64> = (0..cols)
        .map(|c| table.iter().map(|r| r[c]).sum::<usize>() as f64)
        .collect();
    let mut stat = 0.0;
    for (r, row) in table.iter().enumerate() {
        for (c, &obs) in row.iter().enumerate() {
            let expected = row_sums[r] * col_sums[c] / n;
            if expected > 0.0 {
                let d = obs as f64 - expected;
                stat += d * d / expected;
            }
        }
    }
    let nz_rows = row_sums.iter().filter(|&&s| s > 0.0).count();
    let nz_cols = col_sums.iter().filter(|&&s| s > 0.0).count();
    let df = nz_rows.saturating_sub(1) * nz_cols.saturating_sub(1);
    (stat, df)
}

/// Upper `alpha` quantile of the chi-square law with `df` degrees of freedom.
pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    ChiSquared::new(df as f64)
        .expect("df >= 1")
        .inverse_cdf(1.0 - alpha)
}

/// The four factorisation gaps `E[X^n Y^m] - E[X^n] E[Y^m]` for
/// `(n, m)` in `{1, 2}^2`, ordered `(1,1), (1,2), (2,1), (2,2)`.
pub const ORDER_PAIRS: [(u32, u32); 4] = [(1, 1), (1, 2), (2, 1), (2, 2)];

#[derive(Debug, Clone, Copy, Default)]
struct PowerSums {
    n: f64,
    x: [f64; 2],
    y: [f64; 2],
    xy: [[f64; 2]; 2],
}

impl PowerSums {
    #[inline]
    fn push(&mut self, x: f64, y: f64) {
        let xp = [x, x * x];
        let yp = [y, y * y];
        self.n += 1.0;
        for a in 0..2 {
            self.x[a] += xp[a];
            self.y[a] += yp[a];
            for (cell, yb) in self.xy[a].iter_mut().zip(yp) {
                *cell += xp[a] * yb;
            }
        }
    }

    /// `(joint, product of marginals)` per order pair.
    fn moments(&self) -> [(f64, f64); 4] {
        ORDER_PAIRS.map(|(n, m)| {
            let (a, b) = (n as usize - 1, m as usize - 1);
            let joint = self.xy[a][b] / self.n;
            let product = (self.x[a] / self.n) * (self.y[b] / self.n);
            (joint, product)
        })
    }
}

/// Empirical joint moment, product of empirical marginals, and bootstrap
/// standard error of their difference, for one order pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factorisation {
    pub n: u32,
    pub m: u32,
    pub joint: f64,
    pub product: f64,
    pub se: f64,
}

/// Product-moment factorisation gaps with standard errors from
/// `resamples` bootstrap resamples. Resample `b` draws its indices from the
/// stream `(seed, tag, b)`, so the result does not depend on scheduling.
pub fn factorisation_bootstrap(
    xs: &[f64],
    ys: &[f64],
    resamples: usize,
    seed: u64,
    tag: u32,
) -> Vec<Factorisation> {
    assert_eq!(xs.len(), ys.len());
    let len = xs.len();
    let mut full = PowerSums::default();
    for (&x, &y) in xs.iter().zip(ys) {
        full.push(x, y);
    }
    let point = full.moments();

    let gaps: Vec<[f64; 4]> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, tag, b as u32);
            let mut sums = PowerSums::default();
            for _ in 0..len {
                let i = rng.random_range(0..len);
                sums.push(xs[i], ys[i]);
            }
            sums.moments().map(|(j, p)| j - p)
        })
        .collect();

    ORDER_PAIRS
        .iter()
        .enumerate()
        .map(|(k, &(n, m))| {
            let est = mean_se(gaps.iter().map(|g| g[k]));
            // Bootstrap SE is the spread of the replicates, not of their mean.
            let se = est.se * (gaps.len() as f64).sqrt();
            Factorisation {
                n,
                m,
                joint: point[k].0,
                product: point[k].1,
                se,
            }
        })
        .collect()
}
