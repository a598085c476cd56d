use serde::{Deserialize, Serialize};

use super::pattern::{expand_to_length, BalancedPattern};
use super::AbcCoefficients;
use crate::error::{contract, Error, Result};
use crate::linalg::Matrix;

/// Where a pilot matrix came from, when it was built from a pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotOrigin {
    pub pattern: BalancedPattern,
    /// Seed of the last-block truncation; `None` when nothing was removed.
    pub seed: Option<u64>,
    /// Columns deleted from the final block.
    pub removed: usize,
}

/// A `K × L` binary OOK pilot matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotMatrix {
    users: usize,
    length: usize,
    /// Row-major bits, `bits[k * length + l]`.
    bits: Vec<bool>,
    origin: Option<PilotOrigin>,
}

impl PilotMatrix {
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let users = rows.len();
        if users == 0 {
            return Err(contract("pilot matrix has no rows"));
        }
        let length = rows[0].len();
        if length == 0 {
            return Err(contract("pilot matrix has no columns"));
        }
        if let Some(k) = rows.iter().position(|r| r.len() != length) {
            return Err(contract(format!("pilot row {k} has {} columns, expected {length}", rows[k].len())));
        }
        Ok(Self { users, length, bits: rows.concat(), origin: None })
    }

    pub fn from_columns(users: usize, columns: &[Vec<bool>]) -> Result<Self> {
        if columns.iter().any(|c| c.len() != users) {
            return Err(contract(format!("pilot column height differs from {users}")));
        }
        let rows: Vec<Vec<bool>> = (0..users).map(|k| columns.iter().map(|c| c[k]).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn identity(users: usize) -> Self {
        let rows: Vec<Vec<bool>> = (0..users).map(|k| (0..users).map(|l| k == l).collect()).collect();
        Self::from_rows(&rows).expect("identity is well formed")
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn bit(&self, user: usize, slot: usize) -> bool {
        self.bits[user * self.length + slot]
    }

    pub fn row(&self, user: usize) -> &[bool] {
        &self.bits[user * self.length..(user + 1) * self.length]
    }

    pub fn column(&self, slot: usize) -> Vec<bool> {
        (0..self.users).map(|k| self.bit(k, slot)).collect()
    }

    pub fn origin(&self) -> Option<&PilotOrigin> {
        self.origin.as_ref()
    }

    pub(crate) fn set_origin(&mut self, origin: PilotOrigin) {
        self.origin = Some(origin);
    }

    /// Rows as `'0'`/`'1'` strings.
    pub fn row_strings(&self) -> Vec<String> {
        (0..self.users)
            .map(|k| self.row(k).iter().map(|&b| if b { '1' } else { '0' }).collect())
            .collect()
    }

    /// Dense 0/1 copy.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.users, self.length, |k, l| if self.bit(k, l) { 1.0 } else { 0.0 })
    }

    /// Max minus min of the per-user active-slot counts.
    pub fn user_activity_spread(&self) -> usize {
        let sums: Vec<usize> = (0..self.users).map(|k| self.row(k).iter().filter(|&&b| b).count()).collect();
        sums.iter().max().unwrap() - sums.iter().min().unwrap()
    }

    /// Whether the matrix is exactly a whole number of pattern blocks.
    pub fn is_untruncated_pattern(&self) -> bool {
        matches!(&self.origin, Some(o) if o.removed == 0)
    }

    fn column_masks(&self) -> Vec<u64> {
        (0..self.length)
            .map(|l| (0..self.users).filter(|&k| self.bit(k, l)).fold(0u64, |m, k| m | 1 << k))
            .collect()
    }

    /// Number of columns whose support contains every user in `theta` (0-based).
    pub fn zeta(&self, theta: &[usize]) -> Result<usize> {
        if theta.is_empty() {
            return Err(contract("zeta needs a nonempty index set"));
        }
        if let Some(&k) = theta.iter().find(|&&k| k >= self.users) {
            return Err(contract(format!("user index {k} out of range for K = {}", self.users)));
        }
        Ok((0..self.length).filter(|&l| theta.iter().all(|&k| self.bit(k, l))).count())
    }

    /// True iff `zeta(theta)` depends only on `|theta|`, checked over every
    /// nonempty subset.
    pub fn is_balanced(&self) -> Result<bool> {
        const MAX_USERS: usize = 20;
        if self.users > MAX_USERS {
            return Err(Error::Unsupported(format!(
                "exhaustive balance check limited to K <= {MAX_USERS}, got {}",
                self.users
            )));
        }
        let k = self.users;
        let mut count = vec![0u32; 1 << k];
        for m in self.column_masks() {
            count[m as usize] += 1;
        }
        // superset sums: count[s] becomes #columns whose support contains s
        for bit in 0..k {
            for s in 0..(1usize << k) {
                if s & (1 << bit) == 0 {
                    count[s] += count[s | (1 << bit)];
                }
            }
        }
        let mut by_size: Vec<Option<u32>> = vec![None; k + 1];
        for (s, &c) in count.iter().enumerate().skip(1) {
            let r = s.count_ones() as usize;
            match by_size[r] {
                None => by_size[r] = Some(c),
                Some(v) if v != c => return Ok(false),
                _ => {}
            }
        }
        Ok(true)
    }

    /// Empirical `(a, b, c)` from single, pairwise and triple activity counts.
    pub fn abc(&self) -> Result<AbcCoefficients> {
        let k = self.users;
        let masks = self.column_masks();
        let count = |users: &[usize]| -> u64 {
            let want = users.iter().fold(0u64, |m, &u| m | 1 << u);
            masks.iter().filter(|&&m| m & want == want).count() as u64
        };
        let uniform = |order: usize| -> Result<u64> {
            let sets = super::pattern::combinations(k, order);
            let mut value = None;
            for s in &sets {
                let c = count(s);
                match value {
                    None => value = Some(c),
                    Some(v) if v != c => {
                        return Err(Error::Inconsistent(format!(
                            "order-{order} activity differs across users ({v} vs {c} at {s:?})"
                        )))
                    }
                    _ => {}
                }
            }
            Ok(value.unwrap_or(0))
        };
        let a = uniform(1)?;
        let b = uniform(2)?;
        let c = uniform(3)?;
        Ok(AbcCoefficients::from_counts(a, b, c, self.length as u64))
    }
}

/// Wire form: `{K, L, beta?, seed?, rows: [bitstrings]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotDocument {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "L")]
    pub length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub rows: Vec<String>,
}

impl From<&PilotMatrix> for PilotDocument {
    fn from(x: &PilotMatrix) -> Self {
        Self {
            users: x.users,
            length: x.length,
            beta: x.origin.as_ref().map(|o| o.pattern.weights().to_vec()),
            seed: x.origin.as_ref().and_then(|o| o.seed),
            rows: x.row_strings(),
        }
    }
}

impl TryFrom<PilotDocument> for PilotMatrix {
    type Error = Error;

    fn try_from(doc: PilotDocument) -> Result<Self> {
        if doc.rows.len() != doc.users {
            return Err(contract(format!("K = {} but {} rows given", doc.users, doc.rows.len())));
        }
        let rows = doc
            .rows
            .iter()
            .enumerate()
            .map(|(k, s)| {
                if s.len() != doc.length {
                    return Err(contract(format!("rows[{k}] has {} bits, L = {}", s.len(), doc.length)));
                }
                s.chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(contract(format!("rows[{k}] contains {other:?}"))),
                    })
                    .collect::<Result<Vec<bool>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let x = PilotMatrix::from_rows(&rows)?;
        match doc.beta {
            None => {
                if doc.seed.is_some() {
                    return Err(contract("seed given without beta"));
                }
                Ok(x)
            }
            Some(beta) => {
                let pattern = BalancedPattern::new(doc.users, beta)?;
                let rebuilt = expand_to_length(&pattern, doc.length, doc.seed.unwrap_or(0))?;
                if rebuilt.bits != x.bits || rebuilt.origin.as_ref().and_then(|o| o.seed) != doc.seed {
                    return Err(contract(format!(
                        "rows do not match pattern {pattern} expanded to L = {}",
                        doc.length
                    )));
                }
                Ok(rebuilt)
            }
        }
    }
}

impl PilotMatrix {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PilotDocument::from(self)).expect("pilot document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PilotDocument = serde_json::from_str(text).map_err(|e| contract(format!("pilot JSON: {e}")))?;
        doc.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pilot::{basic_matrix, concat_pattern};
    use crate::special::binomial;
    use proptest::prelude::*;

    #[test]
    fn zeta_examples() {
        let x = basic_matrix(4, 2).unwrap();
        assert_eq!(x.zeta(&[0, 1]).unwrap(), 1);
        let x = concat_pattern(&BalancedPattern::new(4, vec![1, 2]).unwrap());
        assert_eq!(x.zeta(&[1]).unwrap(), 4);
        assert!(x.zeta(&[]).is_err());
        assert!(x.zeta(&[0, 1, 2, 3]).unwrap() <= x.length());
    }

    #[test]
    fn balance_examples() {
        let x = PilotMatrix::from_rows(&[vec![true, true], vec![false, true]]).unwrap();
        assert!(!x.is_balanced().unwrap());
        assert!(PilotMatrix::identity(5).is_balanced().unwrap());
        for p in BalancedPattern::all(4) {
            assert!(concat_pattern(&p).is_balanced().unwrap());
        }
        let wide = PilotMatrix::identity(21);
        assert!(matches!(wide.is_balanced(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn every_pattern_up_to_six_users_is_balanced_with_closed_form_zeta() {
        for k in 1..=6 {
            for p in BalancedPattern::all(k) {
                let x = concat_pattern(&p);
                assert!(x.is_balanced().unwrap(), "{p} K={k}");
                for r in 1..=k {
                    let expected: u64 = p
                        .weights()
                        .iter()
                        .map(|&b| binomial(k as i64 - r as i64, b as i64 - r as i64))
                        .sum();
                    for theta in crate::pilot::pattern::combinations(k, r) {
                        assert_eq!(x.zeta(&theta).unwrap() as u64, expected, "{p} theta {theta:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn abc_of_matrix_examples() {
        let p = BalancedPattern::new(4, vec![1, 4]).unwrap();
        let abc = concat_pattern(&p).abc().unwrap();
        assert_eq!(abc, AbcCoefficients::of_pattern(&p));
        assert_eq!(abc.as_f64(), (0.4, 0.2, 0.2));
        assert_eq!(PilotMatrix::identity(4).abc().unwrap().as_f64(), (0.25, 0.0, 0.0));
        let ones = PilotMatrix::from_rows(&vec![vec![true]; 4]).unwrap();
        assert_eq!(ones.abc().unwrap().as_f64(), (1.0, 1.0, 1.0));
        let skew = PilotMatrix::from_rows(&[vec![true, true], vec![false, true]]).unwrap();
        assert!(matches!(skew.abc(), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let p = BalancedPattern::new(4, vec![1, 2, 4]).unwrap();
        let x = crate::pilot::expand_to_length(&p, 30, 9).unwrap();
        let text = x.to_json();
        assert_eq!(PilotMatrix::from_json(&text).unwrap(), x);

        let plain = PilotMatrix::identity(3);
        assert_eq!(PilotMatrix::from_json(&plain.to_json()).unwrap(), plain);

        let bad = r#"{"K":2,"L":2,"rows":["10","2a"]}"#;
        assert!(PilotMatrix::from_json(bad).is_err());
        let unknown = r#"{"K":1,"L":1,"rows":["1"],"extra":1}"#;
        assert!(PilotMatrix::from_json(unknown).is_err());
        let mismatch = r#"{"K":2,"L":2,"beta":[1],"rows":["01","10"]}"#;
        assert!(PilotMatrix::from_json(mismatch).is_err());
    }

    proptest! {
        #[test]
        fn pilot_json_is_lossless(rows in prop::collection::vec(prop::collection::vec(any::<bool>(), 7), 1..6)) {
            let x = PilotMatrix::from_rows(&rows).unwrap();
            prop_assert_eq!(PilotMatrix::from_json(&x.to_json()).unwrap(), x);
        }
    }
}
