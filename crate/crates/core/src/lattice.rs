//! Truncated count-lattice sums for exact ML error probabilities.
//!
//! The ML error between two hypothesis *mixtures* `C` and `D` (each a set of
//! equally likely intensity vectors) is
//! `sum_N 1/(2|C|) · min(sum_k P(N|C_k), sum_k P(N|D_k))`. Each sector is cut
//! at the Poisson quantile `1 − ε/(2M)` of the largest intensity seen there;
//! by stochastic ordering of the Poisson family every hypothesis loses at
//! most `ε/(2M)` per sector, so the discarded mass is at most `ε/4`.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::special::{poisson_ln_pmf, poisson_upper_quantile};

/// Largest lattice we are willing to enumerate.
pub const MAX_LATTICE_POINTS: u128 = 100_000_000;

/// A truncated-lattice probability with its rigorous truncation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSum {
    pub value: f64,
    /// The untruncated sum lies in `[value, value + tail_bound]`.
    pub tail_bound: f64,
    pub points: u64,
}

/// ML error between equal-size, equally likely hypothesis mixtures.
pub fn ml_mixture_error(c_set: &[Vec<f64>], d_set: &[Vec<f64>], tail_epsilon: f64) -> Result<LatticeSum> {
    if c_set.is_empty() || c_set.len() != d_set.len() {
        return Err(contract("hypothesis sets must be nonempty and of equal size"));
    }
    if !(tail_epsilon > 0.0 && tail_epsilon < 1.0) {
        return Err(contract(format!("tail epsilon {tail_epsilon} must lie in (0, 1)")));
    }
    let sectors = c_set[0].len();
    if sectors == 0 || c_set.iter().chain(d_set).any(|h| h.len() != sectors) {
        return Err(contract("every hypothesis needs the same positive number of sectors"));
    }
    let per_sector_tail = tail_epsilon / (2.0 * sectors as f64);
    let caps: Vec<u64> = (0..sectors)
        .map(|m| {
            let top = c_set.iter().chain(d_set).map(|h| h[m]).fold(0.0, f64::max);
            poisson_upper_quantile(top, per_sector_tail)
        })
        .collect();
    let points: u128 = caps.iter().map(|&c| c as u128 + 1).product();
    if points > MAX_LATTICE_POINTS {
        return Err(Error::Unsupported(format!(
            "count lattice has {points} points (caps {caps:?}); use Monte-Carlo instead"
        )));
    }
    // pmf[h][m][n]
    let table = |set: &[Vec<f64>]| -> Vec<Vec<Vec<f64>>> {
        set.iter()
            .map(|h| {
                (0..sectors)
                    .map(|m| (0..=caps[m]).map(|n| poisson_ln_pmf(n, h[m]).exp()).collect())
                    .collect()
            })
            .collect()
    };
    let tc = table(c_set);
    let td = table(d_set);
    let hyps = c_set.len();
    let mut acc = Accumulator { total: 0.0, hyps };
    let mut pc = vec![1.0; hyps];
    let mut pd = vec![1.0; hyps];
    recurse(0, &caps, &tc, &td, &mut pc, &mut pd, &mut acc);
    Ok(LatticeSum {
        value: acc.total / (2.0 * hyps as f64),
        tail_bound: tail_epsilon / 4.0,
        points: points as u64,
    })
}

struct Accumulator {
    total: f64,
    hyps: usize,
}

fn recurse(
    depth: usize,
    caps: &[u64],
    tc: &[Vec<Vec<f64>>],
    td: &[Vec<Vec<f64>>],
    pc: &mut [f64],
    pd: &mut [f64],
    acc: &mut Accumulator,
) {
    if depth == caps.len() {
        let sc: f64 = pc.iter().sum();
        let sd: f64 = pd.iter().sum();
        acc.total += sc.min(sd);
        return;
    }
    let saved_c = pc.to_vec();
    let saved_d = pd.to_vec();
    for n in 0..=caps[depth] as usize {
        for h in 0..acc.hyps {
            pc[h] = saved_c[h] * tc[h][depth][n];
            pd[h] = saved_d[h] * td[h][depth][n];
        }
        recurse(depth + 1, caps, tc, td, pc, pd, acc);
    }
    pc.copy_from_slice(&saved_c);
    pd.copy_from_slice(&saved_d);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_hypotheses_give_one_half() {
        let s = ml_mixture_error(&[vec![3.0, 2.0]], &[vec![3.0, 2.0]], 1e-12).unwrap();
        assert!((s.value - 0.5).abs() < 1e-11);
    }

    #[test]
    fn single_sector_direct_sum() {
        // 1/2 sum_n min(P(n|9), P(n|4)) summed far past the cap.
        let oracle: f64 = (0..200)
            .map(|n| 0.5 * poisson_ln_pmf(n, 9.0).exp().min(poisson_ln_pmf(n, 4.0).exp()))
            .sum();
        let s = ml_mixture_error(&[vec![9.0]], &[vec![4.0]], 1e-10).unwrap();
        assert!((s.value - oracle).abs() <= s.tail_bound + 1e-15);
        assert!((s.value - 0.158_727_409_131_280_33).abs() < 1e-9);
    }

    #[test]
    fn oversized_lattice_is_rejected() {
        let big = vec![vec![5000.0; 4]];
        assert!(matches!(ml_mixture_error(&big, &big, 1e-10), Err(Error::Unsupported(_))));
    }
}
