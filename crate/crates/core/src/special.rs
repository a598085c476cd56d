//! Scalar special functions shared by the detectors and the error formulas.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Upper-tail probability of the standard normal distribution.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Log of the Poisson probability mass `P(N = n)` for mean `lambda`.
///
/// `lambda == 0` is the point mass at zero.
pub fn poisson_ln_pmf(n: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    n as f64 * lambda.ln() - lambda - ln_factorial(n)
}

/// Smallest `n` with `P(N > n) <= tail` for a Poisson variable of mean `lambda`.
pub fn poisson_upper_quantile(lambda: f64, tail: f64) -> u64 {
    if lambda == 0.0 {
        return 0;
    }
    // Mass past this cap is far below any representable tail.
    let cap = (lambda + 40.0 * lambda.sqrt() + 60.0).ceil() as u64;
    let pmf: Vec<f64> = (0..=cap).map(|n| poisson_ln_pmf(n, lambda).exp()).collect();
    let mut upper = 0.0;
    for n in (0..=cap).rev() {
        // `upper` is P(N > n) here.
        if upper > tail {
            return n + 1;
        }
        upper += pmf[n as usize];
    }
    0
}

/// Numerically stable `ln(sum(exp(x)))`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Binomial coefficient with `C(n, k) = 0` outside `0 <= k <= n`.
pub fn binomial(n: i64, k: i64) -> u64 {
    if k < 0 || n < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}
