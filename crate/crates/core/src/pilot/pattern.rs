use std::fmt;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::matrix::{PilotMatrix, PilotOrigin};
use crate::error::{contract, Result};
use crate::rng;

/// A nonempty set of distinct column weights `beta ⊆ {1, …, K}`.
///
/// The pilot it denotes concatenates, in ascending weight order, the basic
/// matrices whose columns are all weight-`beta_s` binary vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BalancedPattern {
    users: usize,
    weights: Vec<usize>,
}

impl BalancedPattern {
    pub fn new(users: usize, mut weights: Vec<usize>) -> Result<Self> {
        if users == 0 {
            return Err(contract("pattern needs at least one user"));
        }
        if weights.is_empty() {
            return Err(contract("pattern weight set is empty"));
        }
        weights.sort_unstable();
        if let Some(w) = weights.iter().find(|&&w| w == 0 || w > users) {
            return Err(contract(format!("weight {w} outside 1..={users}")));
        }
        if weights.windows(2).any(|p| p[0] == p[1]) {
            return Err(contract(format!("repeated weight in {weights:?}")));
        }
        Ok(Self { users, weights })
    }

    /// Pattern whose weight set is given by the set bits of `mask` (bit r-1 ↔ weight r).
    pub fn from_mask(users: usize, mask: u64) -> Result<Self> {
        let weights = (1..=users).filter(|r| mask >> (r - 1) & 1 == 1).collect();
        Self::new(users, weights)
    }

    /// Every nonempty pattern for `users`, in mask order.
    pub fn all(users: usize) -> impl Iterator<Item = BalancedPattern> {
        (1u64..(1u64 << users)).map(move |m| Self::from_mask(users, m).expect("mask is in range"))
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn weights(&self) -> &[usize] {
        &self.weights
    }

    /// Column count `sum_s C(K, beta_s)`.
    pub fn width(&self) -> usize {
        self.weights
            .iter()
            .map(|&w| crate::special::binomial(self.users as i64, w as i64) as usize)
            .sum()
    }
}

impl fmt::Display for BalancedPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, w) in self.weights.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, "}}")
    }
}

/// Supports of size `r` drawn from `0..n`, in lexicographic order.
pub(crate) fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        let mut i = r;
        while i > 0 && idx[i - 1] == n - r + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn support_columns(users: usize, weight: usize) -> Vec<Vec<bool>> {
    combinations(users, weight)
        .into_iter()
        .map(|support| {
            let mut col = vec![false; users];
            for k in support {
                col[k] = true;
            }
            col
        })
        .collect()
}

/// `K × C(K, R)` matrix of all weight-`R` columns, ordered by support.
pub fn basic_matrix(users: usize, weight: usize) -> Result<PilotMatrix> {
    if weight == 0 || weight > users {
        return Err(contract(format!("column weight {weight} outside 1..={users}")));
    }
    PilotMatrix::from_columns(users, &support_columns(users, weight))
}

/// Column concatenation of the basic matrices of `pattern`.
pub fn concat_pattern(pattern: &BalancedPattern) -> PilotMatrix {
    let columns = pattern_columns(pattern);
    let mut x = PilotMatrix::from_columns(pattern.users(), &columns).expect("pattern columns are well formed");
    x.set_origin(PilotOrigin { pattern: pattern.clone(), seed: None, removed: 0 });
    x
}

fn pattern_columns(pattern: &BalancedPattern) -> Vec<Vec<bool>> {
    pattern
        .weights()
        .iter()
        .flat_map(|&w| support_columns(pattern.users(), w))
        .collect()
}

/// Repeat the pattern block until it reaches `length` columns, then drop
/// uniformly chosen columns of the last block to trim the excess.
pub fn expand_to_length(pattern: &BalancedPattern, length: usize, seed: u64) -> Result<PilotMatrix> {
    if length == 0 {
        return Err(contract("pilot length must be at least 1"));
    }
    let block = pattern_columns(pattern);
    let width = block.len();
    let reps = length.div_ceil(width);
    let removed = width * reps - length;
    let mut columns = Vec::with_capacity(length);
    for _ in 0..reps - 1 {
        columns.extend(block.iter().cloned());
    }
    if removed == 0 {
        columns.extend(block.iter().cloned());
    } else {
        let mut r = rng::stream(seed, 0);
        let mut drop = vec![false; width];
        for i in index::sample(&mut r, width, removed) {
            drop[i] = true;
        }
        columns.extend(block.iter().zip(&drop).filter(|(_, &d)| !d).map(|(c, _)| c.clone()));
    }
    let mut x = PilotMatrix::from_columns(pattern.users(), &columns)?;
    x.set_origin(PilotOrigin {
        pattern: pattern.clone(),
        seed: (removed > 0).then_some(seed),
        removed,
    });
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(x: &PilotMatrix) -> Vec<String> {
        x.row_strings()
    }

    #[test]
    fn basic_k4_r2_layout() {
        let x = basic_matrix(4, 2).unwrap();
        assert_eq!(rows(&x), vec!["111000", "100110", "010101", "001011"]);
    }

    #[test]
    fn basic_edges() {
        assert_eq!(rows(&basic_matrix(3, 1).unwrap()), vec!["100", "010", "001"]);
        assert_eq!(rows(&basic_matrix(4, 4).unwrap()), vec!["1", "1", "1", "1"]);
        assert!(basic_matrix(4, 0).is_err());
        assert!(basic_matrix(4, 5).is_err());
    }

    #[test]
    fn concat_examples() {
        let p = BalancedPattern::new(4, vec![4, 1]).unwrap();
        assert_eq!(rows(&concat_pattern(&p)), vec!["10001", "01001", "00101", "00011"]);
        let p = BalancedPattern::new(4, vec![1, 2, 4]).unwrap();
        assert_eq!(
            rows(&concat_pattern(&p)),
            vec!["10001110001", "01001001101", "00100101011", "00010010111"]
        );
        for k in 1..6 {
            let p = BalancedPattern::new(k, vec![k]).unwrap();
            assert_eq!(concat_pattern(&p).length(), 1);
        }
    }

    #[test]
    fn pattern_validation() {
        assert!(BalancedPattern::new(4, vec![]).is_err());
        assert!(BalancedPattern::new(4, vec![5]).is_err());
        assert!(BalancedPattern::new(4, vec![2, 2]).is_err());
        assert_eq!(BalancedPattern::all(4).count(), 15);
        assert_eq!(BalancedPattern::new(4, vec![4, 1]).unwrap().to_string(), "{1,4}");
    }

    #[test]
    fn expansion_exact_multiple_is_pure_repetition() {
        let p = BalancedPattern::new(4, vec![1, 4]).unwrap();
        let x = expand_to_length(&p, 100, 7).unwrap();
        assert_eq!(x.length(), 100);
        let block = concat_pattern(&p);
        for l in 0..100 {
            for k in 0..4 {
                assert_eq!(x.bit(k, l), block.bit(k, l % 5));
            }
        }
        assert_eq!(x.origin().unwrap().removed, 0);
    }

    #[test]
    fn truncated_expansion() {
        let p = BalancedPattern::new(4, vec![1, 2, 4]).unwrap();
        let x = expand_to_length(&p, 100, 3).unwrap();
        assert_eq!(x.length(), 100);
        let removed = x.origin().unwrap().removed;
        assert_eq!(removed, 11 * 10 - 100);
        assert!(x.user_activity_spread() <= removed);
        assert_eq!(x, expand_to_length(&p, 100, 3).unwrap());
        let other = expand_to_length(&p, 100, 4).unwrap();
        assert_eq!(other.length(), 100);
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(
            combinations(4, 2),
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
    }
}
