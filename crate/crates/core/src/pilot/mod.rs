//! Balanced pilot design and least-squares channel estimation.
//!
//! A pilot matrix is *balanced* when the number of slots in which a set of
//! users is jointly active depends only on the size of that set. For such
//! matrices the Gram matrix `X Xᵀ` is `L[(a−b)I + bE]`, and the LS estimation
//! MSE has a closed form in the activity frequencies `(a, b, c)`. The dense
//! trace expression in [`exact_mse_trace`] is kept as an independent route.

mod estimate;
mod matrix;
mod pattern;
mod search;

use serde::{Deserialize, Serialize};

pub use estimate::{exact_mse_trace, ls_estimate, ChannelEstimate, InverseMethod, LsEstimator};
pub use matrix::{PilotDocument, PilotMatrix, PilotOrigin};
pub use pattern::{basic_matrix, concat_pattern, expand_to_length, BalancedPattern};
pub use search::{optimize_pattern, optimize_pattern_sectors, PatternScore, PatternSearch, SectorLoad};

use crate::error::{contract, Error, Result};
use crate::special::binomial;

/// Single, pairwise and triple activity frequencies of a balanced pilot,
/// kept as exact fractions over a common denominator.
#[derive(Debug, Clone, Copy, Eq, Serialize, Deserialize)]
pub struct AbcCoefficients {
    a_num: u64,
    b_num: u64,
    c_num: u64,
    den: u64,
}

impl PartialEq for AbcCoefficients {
    fn eq(&self, o: &Self) -> bool {
        let cross = |x: u64, y: u64| x as u128 * o.den as u128 == y as u128 * self.den as u128;
        cross(self.a_num, o.a_num) && cross(self.b_num, o.b_num) && cross(self.c_num, o.c_num)
    }
}

impl AbcCoefficients {
    pub(crate) fn from_counts(a: u64, b: u64, c: u64, den: u64) -> Self {
        Self { a_num: a, b_num: b, c_num: c, den }
    }

    /// Closed forms `sum_s C(K-i, beta_s-i) / sum_s C(K, beta_s)` for i = 1, 2, 3.
    pub fn of_pattern(pattern: &BalancedPattern) -> Self {
        let k = pattern.users() as i64;
        let sum = |shift: i64| -> u64 {
            pattern.weights().iter().map(|&b| binomial(k - shift, b as i64 - shift)).sum()
        };
        Self::from_counts(sum(1), sum(2), sum(3), sum(0))
    }

    pub fn a(&self) -> f64 {
        self.a_num as f64 / self.den as f64
    }

    pub fn b(&self) -> f64 {
        self.b_num as f64 / self.den as f64
    }

    pub fn c(&self) -> f64 {
        self.c_num as f64 / self.den as f64
    }

    pub fn as_f64(&self) -> (f64, f64, f64) {
        (self.a(), self.b(), self.c())
    }

    /// `(numerator_a, numerator_b, numerator_c, denominator)`.
    pub fn as_fractions(&self) -> (u64, u64, u64, u64) {
        (self.a_num, self.b_num, self.c_num, self.den)
    }

    /// `a == b` exactly, which makes `X Xᵀ` singular.
    pub fn is_singular(&self) -> bool {
        self.a_num == self.b_num
    }
}

/// Shorthand for [`AbcCoefficients::of_pattern`].
pub fn abc_of_pattern(pattern: &BalancedPattern) -> AbcCoefficients {
    AbcCoefficients::of_pattern(pattern)
}

/// Shorthand for [`PilotMatrix::abc`].
pub fn abc_of_matrix(x: &PilotMatrix) -> Result<AbcCoefficients> {
    x.abc()
}

/// Closed-form LS estimation MSE of one sector for a balanced pilot:
///
/// ```text
/// F = λn K (1 − b/s) / (L(a−b))
///   + ‖λ‖₁ / (L(a−b)²) · ( s + ((2−K)b² − 2ab)/s² · (a + 3b(K−1) + c(K−1)(K−2)) ),
/// s = a + (K−1) b
/// ```
pub fn theoretical_mse(users: usize, length: usize, abc: &AbcCoefficients, noise: f64, gain_l1: f64) -> Result<f64> {
    if users == 0 || length == 0 {
        return Err(contract("K and L must be positive"));
    }
    if abc.is_singular() {
        return Err(Error::Singular(format!("a = b = {} makes X Xᵀ singular", abc.a())));
    }
    let (a, b, c) = abc.as_f64();
    let k = users as f64;
    let l = length as f64;
    let s = a + (k - 1.0) * b;
    if s <= 0.0 {
        return Err(Error::Singular("a + (K−1)b must be positive".into()));
    }
    let d = a - b;
    let noise_term = noise * k * (1.0 - b / s) / (l * d);
    let correction = ((2.0 - k) * b * b - 2.0 * a * b) / (s * s);
    let cubic = a + 3.0 * b * (k - 1.0) + c * (k - 1.0) * (k - 2.0);
    let gain_term = gain_l1 / (l * d * d) * (s + correction * cubic);
    Ok(noise_term + gain_term)
}
