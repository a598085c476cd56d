use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{theoretical_mse, AbcCoefficients, BalancedPattern};
use crate::error::{contract, Error, Result};

/// Noise level and gain ℓ1 norm seen by one sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorLoad {
    pub noise: f64,
    pub gain_l1: f64,
}

/// Closed-form MSE of one pattern, per sector and summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternScore {
    pub pattern: BalancedPattern,
    pub abc: AbcCoefficients,
    pub per_sector: Vec<f64>,
    pub aggregate: f64,
}

/// Patterns ranked by ascending aggregate MSE, plus the singular ones left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSearch {
    pub ranked: Vec<PatternScore>,
    pub excluded: Vec<BalancedPattern>,
}

/// Rank every nonempty pattern for a single sector.
pub fn optimize_pattern(users: usize, length: usize, noise: f64, gain_l1: f64) -> Result<PatternSearch> {
    optimize_pattern_sectors(users, length, &[SectorLoad { noise, gain_l1 }])
}

/// Rank every nonempty pattern by the sum of per-sector closed-form MSEs.
///
/// Ties are broken by smaller pattern width, then lexicographic weight set.
pub fn optimize_pattern_sectors(users: usize, length: usize, sectors: &[SectorLoad]) -> Result<PatternSearch> {
    const MAX_USERS: usize = 20;
    if users == 0 || users > MAX_USERS {
        return Err(Error::Unsupported(format!("pattern search needs 1 <= K <= {MAX_USERS}, got {users}")));
    }
    if length == 0 || sectors.is_empty() {
        return Err(contract("pattern search needs L >= 1 and at least one sector"));
    }
    let patterns: Vec<BalancedPattern> = BalancedPattern::all(users).collect();
    let scored: Vec<std::result::Result<PatternScore, BalancedPattern>> = patterns
        .into_par_iter()
        .map(|pattern| {
            let abc = AbcCoefficients::of_pattern(&pattern);
            if abc.is_singular() {
                return Err(pattern);
            }
            let per_sector: Vec<f64> = sectors
                .iter()
                .map(|s| theoretical_mse(users, length, &abc, s.noise, s.gain_l1).expect("nonsingular pattern"))
                .collect();
            let aggregate = per_sector.iter().sum();
            Ok(PatternScore { pattern, abc, per_sector, aggregate })
        })
        .collect();
    let mut ranked = Vec::new();
    let mut excluded = Vec::new();
    for s in scored {
        match s {
            Ok(score) => ranked.push(score),
            Err(p) => excluded.push(p),
        }
    }
    if ranked.is_empty() {
        return Err(contract(format!("every pattern is singular for K = {users}")));
    }
    ranked.sort_by(|x, y| {
        x.aggregate
            .total_cmp(&y.aggregate)
            .then(x.pattern.width().cmp(&y.pattern.width()))
            .then_with(|| x.pattern.weights().cmp(y.pattern.weights()))
    });
    excluded.sort();
    Ok(PatternSearch { ranked, excluded })
}
