//! Small statistics helpers for Monte-Carlo reporting.

use serde::{Deserialize, Serialize};

use crate::special::q_function;

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and
/// `Normal(mean, sd^2)`. Tied samples are treated as a single atom.
pub fn ks_distance_normal(mut samples: Vec<f64>, mean: f64, sd: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < samples.len() {
        let x = samples[i];
        let mut j = i;
        while j < samples.len() && samples[j] == x {
            j += 1;
        }
        let cdf = 1.0 - q_function((x - mean) / sd);
        d = d.max((cdf - i as f64 / n).abs()).max((j as f64 / n - cdf).abs());
        i = j;
    }
    d
}

/// Sum with a fixed binary-tree shape, so the result depends only on the
/// order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (l, r) = values.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

/// Wilson score interval at `z` standard deviations.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// An empirical probability with its Monte-Carlo uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
    pub events: u64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl Proportion {
    pub fn new(events: u64, trials: u64) -> Self {
        let value = if trials == 0 { 0.0 } else { events as f64 / trials as f64 };
        let std_error = if trials == 0 { 0.0 } else { (value * (1.0 - value) / trials as f64).sqrt() };
        let (wilson_low, wilson_high) = wilson_interval(events, trials, 1.96);
        Self { value, std_error, trials, events, wilson_low, wilson_high }
    }
}

/// Sample mean and standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        // Midpoint quantiles of N(0,1) have KS distance exactly 1/(2n).
        let n = 1000;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let p = (i as f64 + 0.5) / n as f64;
                // invert by bisection
                let (mut lo, mut hi) = (-10.0, 10.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if 1.0 - q_function(mid) < p { lo = mid } else { hi = mid }
                }
                0.5 * (lo + hi)
            })
            .collect();
        let d = ks_distance_normal(samples, 0.0, 1.0);
        assert!((d - 0.5 / n as f64).abs() < 1e-9);
    }

    #[test]
    fn ks_counts_ties_as_one_atom() {
        let d = ks_distance_normal(vec![0.0; 10], 0.0, 1.0);
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }
}
