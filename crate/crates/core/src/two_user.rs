//! Separation of two intensity hypotheses with a linear weighted sum.
//!
//! Under hypothesis `A` the sector counts are Poisson with means `λ_a(m)`,
//! under `B` with `λ_b(m)` (signal plus background). The detector compares
//! `W = Σ α_m N_m` with a threshold. Weights maximize the Cauchy lower bound
//! of the normalized mean separation; the threshold is where the two Gaussian
//! surrogates of `W` have equal density.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::{dot_counts, weighted_sum_moments, PhotonCounts, SumMoments};
use crate::error::{contract, Error, Result};
use crate::lattice::{ml_mixture_error, LatticeSum};
use crate::special::{normal_pdf, q_function};

/// Default truncation mass for exact ML error sums.
pub const DEFAULT_TAIL_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    A,
    B,
}

impl Hypothesis {
    pub fn other(self) -> Self {
        match self {
            Hypothesis::A => Hypothesis::B,
            Hypothesis::B => Hypothesis::A,
        }
    }
}

/// Total per-sector intensities under the two hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoUserProblem {
    lambda_a: Vec<f64>,
    lambda_b: Vec<f64>,
}

impl TwoUserProblem {
    /// Both vectors must be equally long with strictly positive, finite entries.
    pub fn new(lambda_a: Vec<f64>, lambda_b: Vec<f64>) -> Result<Self> {
        if lambda_a.is_empty() || lambda_a.len() != lambda_b.len() {
            return Err(contract(format!(
                "intensity vectors must be nonempty and equally long ({} vs {})",
                lambda_a.len(),
                lambda_b.len()
            )));
        }
        for (name, v) in [("lambda_a", &lambda_a), ("lambda_b", &lambda_b)] {
            if let Some((m, x)) = v.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x > 0.0)) {
                return Err(contract(format!(
                    "{name}[{m}] = {x} must be positive; add a background floor such as 1e-12"
                )));
            }
        }
        Ok(Self { lambda_a, lambda_b })
    }

    /// Build from per-user signal gains and a shared background.
    pub fn from_signal(signal_a: &[f64], signal_b: &[f64], noise: &[f64]) -> Result<Self> {
        if signal_a.len() != noise.len() || signal_b.len() != noise.len() {
            return Err(contract("signal and noise vectors differ in length"));
        }
        let add = |s: &[f64]| s.iter().zip(noise).map(|(x, n)| x + n).collect();
        Self::new(add(signal_a), add(signal_b))
    }

    pub fn sectors(&self) -> usize {
        self.lambda_a.len()
    }

    pub fn lambda_a(&self) -> &[f64] {
        &self.lambda_a
    }

    pub fn lambda_b(&self) -> &[f64] {
        &self.lambda_b
    }

    pub fn intensity(&self, h: Hypothesis) -> &[f64] {
        match h {
            Hypothesis::A => &self.lambda_a,
            Hypothesis::B => &self.lambda_b,
        }
    }

    /// Moments of `W` under `A` and `B`.
    pub fn moments(&self, weights: &[f64]) -> Result<(SumMoments, SumMoments)> {
        Ok((weighted_sum_moments(weights, &self.lambda_a)?, weighted_sum_moments(weights, &self.lambda_b)?))
    }

    /// `G = sqrt(Σ (λa−λb)² / (2(λa+λb)))`.
    pub fn separation(&self) -> f64 {
        self.lambda_a
            .iter()
            .zip(&self.lambda_b)
            .map(|(a, b)| (a - b).powi(2) / (2.0 * (a + b)))
            .sum::<f64>()
            .sqrt()
    }
}

/// Weighted-sum threshold test. `W >= threshold` selects `upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdDetector {
    #[serde(serialize_with = "crate::fmt17::serialize_vec")]
    weights: Vec<f64>,
    #[serde(serialize_with = "crate::fmt17::serialize")]
    threshold: f64,
    #[serde(rename = "orientation")]
    upper: Hypothesis,
}

impl ThresholdDetector {
    pub fn new(weights: Vec<f64>, threshold: f64, upper: Hypothesis) -> Result<Self> {
        let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        if weights.is_empty() || (norm - 1.0).abs() > 1e-12 {
            return Err(contract(format!("detector weights must have unit norm, got {norm}")));
        }
        if !threshold.is_finite() {
            return Err(Error::Numeric(format!("threshold {threshold} is not finite")));
        }
        Ok(Self { weights, threshold, upper })
    }

    /// Cauchy-optimal weights with the equal-density threshold.
    pub fn optimal(p: &TwoUserProblem) -> Result<Self> {
        let w = optimal_weights(p)?;
        Self::with_weights(p, w)
    }

    /// Normalize `weights` and attach the optimal threshold for them.
    pub fn with_weights(p: &TwoUserProblem, weights: Vec<f64>) -> Result<Self> {
        let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(contract("weights must be nonzero"));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / norm).collect();
        let (upper, threshold) = oriented_threshold(p, &weights)?;
        Self::new(weights, threshold, upper)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// The hypothesis with the larger weighted mean.
    pub fn upper(&self) -> Hypothesis {
        self.upper
    }

    /// `Σ α_m N_m − threshold`, signed so that positive favours `upper`.
    pub fn margin(&self, counts: &[u64]) -> f64 {
        dot_counts(&self.weights, counts) - self.threshold
    }

    pub fn decide_counts(&self, counts: &[u64]) -> Hypothesis {
        if dot_counts(&self.weights, counts) >= self.threshold {
            self.upper
        } else {
            self.upper.other()
        }
    }

    /// Ties go to the upper-tail hypothesis.
    pub fn decide(&self, counts: &PhotonCounts) -> Result<Hypothesis> {
        if counts.len() != self.weights.len() {
            return Err(contract(format!("{} counts for {} weights", counts.len(), self.weights.len())));
        }
        Ok(self.decide_counts(counts.as_slice()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("detector serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wire {
            weights: Vec<f64>,
            threshold: f64,
            orientation: Hypothesis,
        }
        let w: Wire = serde_json::from_str(text).map_err(|e| contract(format!("detector JSON: {e}")))?;
        Self::new(w.weights, w.threshold, w.orientation)
    }
}

/// `K_m = (λa−λb)/(λa+λb)`, normalized to unit length.
pub fn optimal_weights(p: &TwoUserProblem) -> Result<Vec<f64>> {
    let k: Vec<f64> = p.lambda_a.iter().zip(&p.lambda_b).map(|(a, b)| (a - b) / (a + b)).collect();
    let norm = k.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Degenerate("λ_a equals λ_b in every sector".into()));
    }
    Ok(k.into_iter().map(|x| x / norm).collect())
}

/// Equal-density threshold between `N(μu, σu²)` and `N(μl, σl²)`, `μu >= μl`.
fn gaussian_crossing(upper: SumMoments, lower: SumMoments) -> Result<f64> {
    let (mu_u, mu_l) = (upper.mean, lower.mean);
    let (var_u, var_l) = (upper.variance, lower.variance);
    if !(var_u > 0.0 && var_l > 0.0) {
        return Err(Error::Degenerate(format!("zero variance (σu² = {var_u}, σl² = {var_l})")));
    }
    let diff = var_u - var_l;
    if diff.abs() < 1e-9 * (var_u + var_l) {
        return Ok(0.5 * (mu_u + mu_l));
    }
    let (s_u, s_l) = (var_u.sqrt(), var_l.sqrt());
    let disc = (mu_u - mu_l).powi(2) + 2.0 * diff * (s_u / s_l).ln();
    let t = (s_u * s_l * disc.sqrt() + var_u * mu_l - var_l * mu_u) / diff;
    if !t.is_finite() {
        return Err(Error::Numeric(format!(
            "threshold not finite for μu = {mu_u}, μl = {mu_l}, σu² = {var_u}, σl² = {var_l}"
        )));
    }
    Ok(t)
}

fn oriented_threshold(p: &TwoUserProblem, weights: &[f64]) -> Result<(Hypothesis, f64)> {
    let (ma, mb) = p.moments(weights)?;
    if ma.mean >= mb.mean {
        Ok((Hypothesis::A, gaussian_crossing(ma, mb)?))
    } else {
        Ok((Hypothesis::B, gaussian_crossing(mb, ma)?))
    }
}

/// Optimal Gaussian threshold for the given weights.
///
/// The hypothesis with the larger weighted mean takes the upper tail; callers
/// need not order `A` and `B`.
pub fn optimal_threshold(p: &TwoUserProblem, weights: &[f64]) -> Result<f64> {
    oriented_threshold(p, weights).map(|(_, t)| t)
}

/// Gaussian-surrogate error `½(Q((μu−t)/σu) + Q((t−μl)/σl))` with equal priors.
pub fn pe_gaussian(p: &TwoUserProblem, weights: &[f64], threshold: f64) -> Result<f64> {
    let (ma, mb) = p.moments(weights)?;
    let (u, l) = if ma.mean >= mb.mean { (ma, mb) } else { (mb, ma) };
    if !(u.variance > 0.0 && l.variance > 0.0) {
        return Err(Error::Degenerate("weighted sum has zero variance".into()));
    }
    Ok(0.5 * (q_function((u.mean - threshold) / u.std_dev()) + q_function((threshold - l.mean) / l.std_dev())))
}

/// Closed-form minimum error `Q(G)`.
pub fn pe_threshold_closed_form(p: &TwoUserProblem) -> f64 {
    q_function(p.separation())
}

/// Per-sector `ln λ`, cached for repeated likelihood evaluation.
#[derive(Debug, Clone)]
pub(crate) struct LogIntensity {
    pub lambda: Vec<f64>,
    pub ln_lambda: Vec<f64>,
}

impl LogIntensity {
    pub fn new(lambda: &[f64]) -> Self {
        Self { lambda: lambda.to_vec(), ln_lambda: lambda.iter().map(|l| l.ln()).collect() }
    }

    /// `Σ_m N_m ln λ_m − λ_m`, the log-likelihood up to the `ln N_m!` terms.
    pub fn log_likelihood(&self, counts: &[u64]) -> f64 {
        let mut acc = 0.0;
        for ((&n, &ll), &l) in counts.iter().zip(&self.ln_lambda).zip(&self.lambda) {
            acc += n as f64 * ll - l;
        }
        acc
    }
}

/// Pairwise ML detector with cached logarithms.
#[derive(Debug, Clone)]
pub struct MlPairDetector {
    a: LogIntensity,
    b: LogIntensity,
}

impl MlPairDetector {
    pub fn new(p: &TwoUserProblem) -> Self {
        Self { a: LogIntensity::new(&p.lambda_a), b: LogIntensity::new(&p.lambda_b) }
    }

    /// Ties go to `A`.
    pub fn decide_counts(&self, counts: &[u64]) -> Hypothesis {
        if self.a.log_likelihood(counts) >= self.b.log_likelihood(counts) {
            Hypothesis::A
        } else {
            Hypothesis::B
        }
    }
}

/// Equal-prior ML decision between the two Poisson hypotheses.
pub fn ml_decide_pair(p: &TwoUserProblem, counts: &PhotonCounts) -> Result<Hypothesis> {
    if counts.len() != p.sectors() {
        return Err(contract(format!("{} counts for {} sectors", counts.len(), p.sectors())));
    }
    Ok(MlPairDetector::new(p).decide_counts(counts.as_slice()))
}

/// Exact pairwise ML error `Σ_N ½ min(P(N|A), P(N|B))` on a truncated lattice.
pub fn pe_ml_pair(p: &TwoUserProblem, tail_epsilon: f64) -> Result<LatticeSum> {
    ml_mixture_error(&[p.lambda_a.clone()], &[p.lambda_b.clone()], tail_epsilon)
}

/// `|1 − (2/(1+x))²|` with `x = λa(m)/λb(m)`; at most 3 for any `x > 0`.
pub fn ratio_factor(x: f64) -> f64 {
    (1.0 - (2.0 / (1.0 + x)).powi(2)).abs()
}

fn checked_sector(p: &TwoUserProblem, m: usize) -> Result<f64> {
    if m >= p.sectors() {
        return Err(contract(format!("sector {m} out of range")));
    }
    let g = p.separation();
    if g == 0.0 {
        return Err(Error::Degenerate("G = 0: hypotheses coincide".into()));
    }
    Ok(g)
}

/// `|∂Q(G)/∂λa(m)| = φ(G) · |1 − (2/(1+x))²| / (4G)`.
pub fn pe_derivative_magnitude(p: &TwoUserProblem, m: usize) -> Result<f64> {
    let g = checked_sector(p, m)?;
    Ok(normal_pdf(g) * ratio_factor(p.lambda_a[m] / p.lambda_b[m]) / (4.0 * g))
}

/// The product `φ(G)/(2G) · |1 − (2/(1+x))²|` on which the sensitivity
/// constant is built. It is twice [`pe_derivative_magnitude`].
pub fn printed_derivative_bound(p: &TwoUserProblem, m: usize) -> Result<f64> {
    let g = checked_sector(p, m)?;
    Ok(normal_pdf(g) * ratio_factor(p.lambda_a[m] / p.lambda_b[m]) / (2.0 * g))
}

/// Sensitivity constant `3 exp(−C/(8D)) / sqrt(2π C/D)`.
pub fn sensitivity_constant(c: f64, d: f64) -> Result<f64> {
    if !(c > 0.0 && d > 0.0 && c.is_finite() && d.is_finite()) {
        return Err(contract(format!("C = {c} and D = {d} must be positive")));
    }
    Ok(3.0 * (-c / (8.0 * d)).exp() / (2.0 * PI * c / d).sqrt())
}

/// Bound `K·δ` on the change in `Q(G)` when one `λa(m)` moves by at most `δ`,
/// given `Σ(λa−λb)² >= C` and every intensity `<= D`.
pub fn sensitivity_bound(c: f64, d: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(contract(format!("δ = {delta} must be positive")));
    }
    Ok(sensitivity_constant(c, d)? * delta)
}

fn check_weights(weights: &[f64], p: &TwoUserProblem) -> Result<()> {
    if weights.len() != p.sectors() {
        return Err(contract(format!("{} weights for {} sectors", weights.len(), p.sectors())));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(contract("all-zero weights"));
    }
    Ok(())
}

/// `Σα(λa−λb) / (sqrt(Σα²λa) + sqrt(Σα²λb))`.
pub fn div_objective(weights: &[f64], p: &TwoUserProblem) -> Result<f64> {
    check_weights(weights, p)?;
    let (ma, mb) = p.moments(weights)?;
    Ok((ma.mean - mb.mean) / (ma.std_dev() + mb.std_dev()))
}

/// `Σα(λa−λb) / sqrt(2 Σα²(λa+λb))`, the Cauchy lower bound of [`div_objective`].
pub fn div_lower_bound(weights: &[f64], p: &TwoUserProblem) -> Result<f64> {
    check_weights(weights, p)?;
    let (ma, mb) = p.moments(weights)?;
    Ok((ma.mean - mb.mean) / (2.0 * (ma.variance + mb.variance)).sqrt())
}
