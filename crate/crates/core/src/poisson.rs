//! Exact Poisson variate generation.
//!
//! Small means use inversion by sequential search; means of 30 and above use
//! Hörmann's transformed rejection with squeeze (PTRS). Both branches sample
//! the exact distribution.

use rand::Rng;

/// Means below this use sequential inversion.
pub const INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy)]
enum Method {
    Zero,
    Inversion { exp_neg: f64 },
    Ptrs(Ptrs),
}

#[derive(Debug, Clone, Copy)]
struct Ptrs {
    lambda: f64,
    ln_lambda: f64,
    a: f64,
    b: f64,
    ln_inv_alpha: f64,
    v_r: f64,
}

/// A Poisson sampler for a fixed mean.
#[derive(Debug, Clone, Copy)]
pub struct Poisson {
    lambda: f64,
    method: Method,
}

impl Poisson {
    /// `lambda` must be finite and nonnegative.
    pub fn new(lambda: f64) -> Option<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return None;
        }
        let method = if lambda == 0.0 {
            Method::Zero
        } else if lambda < INVERSION_LIMIT {
            Method::Inversion { exp_neg: (-lambda).exp() }
        } else {
            let slam = lambda.sqrt();
            let b = 0.931 + 2.53 * slam;
            let a = -0.059 + 0.02483 * b;
            let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
            let v_r = 0.9277 - 3.6224 / (b - 2.0);
            Method::Ptrs(Ptrs {
                lambda,
                ln_lambda: lambda.ln(),
                a,
                b,
                ln_inv_alpha: inv_alpha.ln(),
                v_r,
            })
        };
        Some(Self { lambda, method })
    }

    pub fn mean(&self) -> f64 {
        self.lambda
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self.method {
            Method::Zero => 0,
            Method::Inversion { exp_neg } => {
                let u: f64 = rng.random();
                let mut k = 0u64;
                let mut p = exp_neg;
                let mut cdf = p;
                while u > cdf {
                    k += 1;
                    p *= self.lambda / k as f64;
                    let next = cdf + p;
                    if next == cdf {
                        // u sits above the representable CDF
                        break;
                    }
                    cdf = next;
                }
                k
            }
            Method::Ptrs(ref c) => c.sample(rng),
        }
    }
}

impl Ptrs {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        loop {
            let u = rng.random::<f64>() - 0.5;
            let v: f64 = rng.random();
            let us = 0.5 - u.abs();
            let k = ((2.0 * self.a / us + self.b) * u + self.lambda + 0.43).floor();
            if us >= 0.07 && v <= self.v_r {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = v.ln() + self.ln_inv_alpha - (self.a / (us * us) + self.b).ln();
            let rhs = -self.lambda + k * self.ln_lambda - libm::lgamma(k + 1.0);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::special::poisson_ln_pmf;

    fn chi_square(lambda: f64, n: usize, seed: u64) -> (f64, usize) {
        let sampler = Poisson::new(lambda).unwrap();
        let mut rng = stream(seed, 0);
        let hi = (lambda + 8.0 * lambda.sqrt() + 10.0) as usize;
        let mut hist = vec![0usize; hi + 1];
        for _ in 0..n {
            let k = sampler.sample(&mut rng) as usize;
            hist[k.min(hi)] += 1;
        }
        // pool bins with expected count < 5
        let mut stat = 0.0;
        let mut bins = 0;
        let (mut obs, mut exp) = (0.0, 0.0);
        for (k, &h) in hist.iter().enumerate() {
            let p = if k == hi {
                1.0 - (0..hi).map(|j| poisson_ln_pmf(j as u64, lambda).exp()).sum::<f64>()
            } else {
                poisson_ln_pmf(k as u64, lambda).exp()
            };
            obs += h as f64;
            exp += p * n as f64;
            if exp >= 5.0 {
                stat += (obs - exp).powi(2) / exp;
                bins += 1;
                obs = 0.0;
                exp = 0.0;
            }
        }
        if exp > 0.0 {
            stat += (obs - exp).powi(2) / exp.max(1e-12);
            bins += 1;
        }
        (stat, bins - 1)
    }

    #[test]
    fn zero_mean_is_degenerate() {
        let s = Poisson::new(0.0).unwrap();
        let mut rng = stream(1, 0);
        assert!((0..100).all(|_| s.sample(&mut rng) == 0));
    }

    #[test]
    fn rejects_bad_means() {
        assert!(Poisson::new(-1.0).is_none());
        assert!(Poisson::new(f64::NAN).is_none());
        assert!(Poisson::new(f64::INFINITY).is_none());
    }

    #[test]
    fn both_branches_pass_chi_square() {
        // df-dependent 99.9% critical value approximated by Wilson-Hilferty.
        for &lambda in &[0.3, 4.0, 29.9, 30.0, 55.0, 400.0] {
            let (stat, df) = chi_square(lambda, 200_000, 11);
            let d = df as f64;
            let z = 3.09;
            let crit = d * (1.0 - 2.0 / (9.0 * d) + z * (2.0 / (9.0 * d)).sqrt()).powi(3);
            assert!(stat < crit, "lambda {lambda}: chi2 {stat} df {df} crit {crit}");
        }
    }

    #[test]
    fn mean_and_variance_at_ten() {
        let s = Poisson::new(10.0).unwrap();
        let mut rng = stream(5, 0);
        let n = 1_000_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let k = s.sample(&mut rng) as f64;
            sum += k;
            sq += k * k;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!((mean - 10.0).abs() < 3.0 * (10.0f64 / n as f64).sqrt());
        assert!((var - 10.0).abs() < 0.5);
    }
}
