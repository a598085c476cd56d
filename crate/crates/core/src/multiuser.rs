//! Detection of one desired OOK user under unknown on/off interference.
//!
//! With `K′` interferers there are `2^K′` interference modes. Mode `i` turns on
//! interferer `k` when bit `k` of `i` is set (mode 0 is all-off). The desired
//! bit `a = 1` corresponds to the mixture `C_i = λ_a + φ_i + λ_n` and `a = 0`
//! to `D_i = φ_i + λ_n`, all modes equally likely.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{dot_counts, NoiseVector, PhotonCounts};
use crate::error::{contract, Error, Result};
use crate::lattice::{ml_mixture_error, LatticeSum};
use crate::special::q_function;
use crate::two_user::{Hypothesis, LogIntensity, ThresholdDetector, TwoUserProblem};

/// Enumeration bound on the interferer count.
pub const MAX_INTERFERERS: usize = 16;
/// A pairwise table holds `4^K′` detectors, so it is capped lower.
pub const MAX_TABLE_INTERFERERS: usize = 10;

/// Desired-user gains, interferer gain rows and background, per sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceScenario {
    lambda_a: Vec<f64>,
    interferers: Vec<Vec<f64>>,
    noise: NoiseVector,
}

impl InterferenceScenario {
    pub fn new(lambda_a: Vec<f64>, interferers: Vec<Vec<f64>>, noise: NoiseVector) -> Result<Self> {
        let m = noise.len();
        if lambda_a.len() != m {
            return Err(contract(format!("lambda_a has {} sectors, noise has {m}", lambda_a.len())));
        }
        if interferers.len() > MAX_INTERFERERS {
            return Err(Error::Unsupported(format!(
                "{} interferers exceed the enumeration bound {MAX_INTERFERERS}",
                interferers.len()
            )));
        }
        let check = |name: String, v: &[f64]| -> Result<()> {
            if v.len() != m {
                return Err(contract(format!("{name} has {} sectors, expected {m}", v.len())));
            }
            match v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                Some(i) => Err(contract(format!("{name}[{i}] = {} must be finite and >= 0", v[i]))),
                None => Ok(()),
            }
        };
        check("lambda_a".into(), &lambda_a)?;
        for (k, row) in interferers.iter().enumerate() {
            check(format!("interferers[{k}]"), row)?;
        }
        if let Some(i) = noise.as_slice().iter().position(|&x| x <= 0.0) {
            return Err(contract(format!("noise[{i}] must be > 0 for multiuser detection")));
        }
        Ok(Self { lambda_a, interferers, noise })
    }

    pub fn lambda_a(&self) -> &[f64] {
        &self.lambda_a
    }

    pub fn interferers(&self) -> &[Vec<f64>] {
        &self.interferers
    }

    pub fn noise(&self) -> &NoiseVector {
        &self.noise
    }

    pub fn sectors(&self) -> usize {
        self.lambda_a.len()
    }

    pub fn interferer_count(&self) -> usize {
        self.interferers.len()
    }

    pub fn mode_count(&self) -> usize {
        1 << self.interferers.len()
    }

    /// SHA-256 over the 17-digit rendering of every number in the scenario.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let mut feed = |tag: &str, v: &[f64]| {
            h.update(tag.as_bytes());
            for x in v {
                h.update(crate::fmt17::format(*x).as_bytes());
                h.update(b",");
            }
        };
        feed("a:", &self.lambda_a);
        for row in &self.interferers {
            feed("b:", row);
        }
        feed("n:", self.noise.as_slice());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Interferer on/off pattern of a mode index.
pub fn mode_bits(index: usize, interferers: usize) -> Vec<bool> {
    (0..interferers).map(|k| index >> k & 1 == 1).collect()
}

/// Interference intensity `φ_i(m) = Σ_k b_k λ_{b_k}(m)` of every mode.
pub fn enumerate_modes(s: &InterferenceScenario) -> Result<Vec<Vec<f64>>> {
    let k = s.interferer_count();
    if k > MAX_INTERFERERS {
        return Err(Error::Unsupported(format!("{k} interferers exceed {MAX_INTERFERERS}")));
    }
    Ok((0..1usize << k)
        .map(|i| {
            let mut phi = vec![0.0; s.sectors()];
            for (b, row) in s.interferers.iter().enumerate() {
                if i >> b & 1 == 1 {
                    for (p, g) in phi.iter_mut().zip(row) {
                        *p += g;
                    }
                }
            }
            phi
        })
        .collect())
}

/// The two equally likely hypothesis mixtures, indexed by mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSets {
    pub interferers: usize,
    /// `C_i = D_i + λ_a`.
    pub c: Vec<Vec<f64>>,
    /// `D_i = φ_i + λ_n`.
    pub d: Vec<Vec<f64>>,
}

impl HypothesisSets {
    pub fn mode_count(&self) -> usize {
        self.c.len()
    }

    pub fn sectors(&self) -> usize {
        self.c[0].len()
    }

    /// The `(C_i, D_j)` two-hypothesis subproblem with `C_i` as `A`.
    pub fn pair(&self, i: usize, j: usize) -> Result<TwoUserProblem> {
        TwoUserProblem::new(self.c[i].clone(), self.d[j].clone())
    }
}

pub fn build_hypotheses(s: &InterferenceScenario) -> Result<HypothesisSets> {
    let modes = enumerate_modes(s)?;
    let noise = s.noise.as_slice();
    let d: Vec<Vec<f64>> = modes.iter().map(|phi| phi.iter().zip(noise).map(|(p, n)| p + n).collect()).collect();
    let c = d.iter().map(|dk| dk.iter().zip(&s.lambda_a).map(|(x, a)| x + a).collect()).collect();
    Ok(HypothesisSets { interferers: s.interferer_count(), c, d })
}

/// Streaming `ln Σ exp(v)`; a single term is returned unchanged.
struct OnlineLse {
    max: f64,
    sum: f64,
}

impl OnlineLse {
    fn new() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    fn push(&mut self, v: f64) {
        if v > self.max {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.sum += (v - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// Equal-prior ML detector over the two mixtures.
#[derive(Debug, Clone)]
pub struct MultiMlDetector {
    c: Vec<LogIntensity>,
    d: Vec<LogIntensity>,
}

impl MultiMlDetector {
    pub fn new(h: &HypothesisSets) -> Self {
        Self {
            c: h.c.iter().map(|v| LogIntensity::new(v)).collect(),
            d: h.d.iter().map(|v| LogIntensity::new(v)).collect(),
        }
    }

    /// `ln Σ_k P(N|C_k) − ln Σ_k P(N|D_k)`, up to the common `ln N!` terms.
    pub fn log_ratio(&self, counts: &[u64]) -> f64 {
        let mut c = OnlineLse::new();
        let mut d = OnlineLse::new();
        for h in &self.c {
            c.push(h.log_likelihood(counts));
        }
        for h in &self.d {
            d.push(h.log_likelihood(counts));
        }
        c.value() - d.value()
    }

    /// `true` decodes `a = 1`; ties go to `a = 1`.
    pub fn decide_counts(&self, counts: &[u64]) -> bool {
        let mut c = OnlineLse::new();
        let mut d = OnlineLse::new();
        for h in &self.c {
            c.push(h.log_likelihood(counts));
        }
        for h in &self.d {
            d.push(h.log_likelihood(counts));
        }
        c.value() >= d.value()
    }
}

pub fn ml_decide_multi(h: &HypothesisSets, counts: &PhotonCounts) -> Result<bool> {
    if counts.len() != h.sectors() {
        return Err(contract(format!("{} counts for {} sectors", counts.len(), h.sectors())));
    }
    Ok(MultiMlDetector::new(h).decide_counts(counts.as_slice()))
}

/// Exact ML error `Σ_N 2^{−(K′+1)} min(Σ_k P(N|C_k), Σ_k P(N|D_k))` on a truncated lattice.
pub fn pe_ml_multi(h: &HypothesisSets, tail_epsilon: f64) -> Result<LatticeSum> {
    ml_mixture_error(&h.c, &h.d, tail_epsilon)
}

/// Closed-form upper bound
/// `2^{−K′} Σ_{i,j} Q(sqrt(Σ_m (λa+φi−φj)² / (2(λa+φi+φj+2λn))))`.
pub fn pe_upper_bound(s: &InterferenceScenario) -> Result<f64> {
    let modes = enumerate_modes(s)?;
    let noise = s.noise.as_slice();
    let mut total = 0.0;
    for phi_i in &modes {
        for phi_j in &modes {
            let mut g2 = 0.0;
            for m in 0..s.sectors() {
                let a = s.lambda_a[m];
                let num = (a + phi_i[m] - phi_j[m]).powi(2);
                let den = 2.0 * (a + phi_i[m] + phi_j[m] + 2.0 * noise[m]);
                g2 += num / den;
            }
            total += q_function(g2.sqrt());
        }
    }
    Ok(total / modes.len() as f64)
}

/// Order in which surviving `C` members are probed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeOrder {
    #[default]
    Ascending,
    Descending,
}

/// Offline `(C_i, D_j)` detectors for successive elimination.
///
/// Weights are stored flat and pre-signed so that `U(C_i, D_j, N) =
/// Σ α_m N_m − th` is positive when `C_i` is favoured.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTable {
    modes: usize,
    sectors: usize,
    scenario_hash: String,
    weights: Vec<f64>,
    thresholds: Vec<f64>,
    degenerate: Vec<bool>,
}

fn pair_detector(h: &HypothesisSets, i: usize, j: usize) -> Result<Option<ThresholdDetector>> {
    match ThresholdDetector::optimal(&h.pair(i, j)?) {
        Ok(det) => Ok(Some(det)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

impl PairwiseTable {
    pub fn build(s: &InterferenceScenario) -> Result<Self> {
        Self::from_hypotheses(&build_hypotheses(s)?, s.hash())
    }

    pub fn from_hypotheses(h: &HypothesisSets, scenario_hash: String) -> Result<Self> {
        if h.interferers > MAX_TABLE_INTERFERERS {
            return Err(Error::Unsupported(format!(
                "pairwise table for {} interferers has 4^{} entries; limit is {MAX_TABLE_INTERFERERS}",
                h.interferers, h.interferers
            )));
        }
        let n = h.mode_count();
        let entries: Vec<Option<ThresholdDetector>> =
            (0..n * n).into_par_iter().map(|e| pair_detector(h, e / n, e % n)).collect::<Result<_>>()?;
        Ok(Self::from_entries(n, h.sectors(), scenario_hash, &entries))
    }

    fn from_entries(modes: usize, sectors: usize, scenario_hash: String, entries: &[Option<ThresholdDetector>]) -> Self {
        let mut weights = vec![0.0; modes * modes * sectors];
        let mut thresholds = vec![0.0; modes * modes];
        let mut degenerate = vec![false; modes * modes];
        for (e, entry) in entries.iter().enumerate() {
            match entry {
                Some(det) => {
                    let sign = if det.upper() == Hypothesis::A { 1.0 } else { -1.0 };
                    for (w, x) in weights[e * sectors..(e + 1) * sectors].iter_mut().zip(det.weights()) {
                        *w = sign * x;
                    }
                    thresholds[e] = sign * det.threshold();
                }
                None => degenerate[e] = true,
            }
        }
        Self { modes, sectors, scenario_hash, weights, thresholds, degenerate }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn sectors(&self) -> usize {
        self.sectors
    }

    pub fn len(&self) -> usize {
        self.modes * self.modes
    }

    pub fn is_empty(&self) -> bool {
        self.modes == 0
    }

    pub fn scenario_hash(&self) -> &str {
        &self.scenario_hash
    }

    pub fn is_degenerate(&self, i: usize, j: usize) -> bool {
        self.degenerate[i * self.modes + j]
    }

    /// The `(C_i, D_j)` detector in C-positive form (`A = C_i` is always the
    /// upper tail), or `None` when the pair is flagged degenerate.
    pub fn entry(&self, i: usize, j: usize) -> Option<ThresholdDetector> {
        let e = i * self.modes + j;
        if self.degenerate[e] {
            return None;
        }
        let w = self.weights[e * self.sectors..(e + 1) * self.sectors].to_vec();
        Some(ThresholdDetector::new(w, self.thresholds[e], Hypothesis::A).expect("table entries keep unit norm"))
    }

    /// `U(C_i, D_j, N)`; `None` for a flagged pair.
    pub fn u(&self, i: usize, j: usize, counts: &[u64]) -> Option<f64> {
        let e = i * self.modes + j;
        if self.degenerate[e] {
            return None;
        }
        Some(dot_counts(&self.weights[e * self.sectors..(e + 1) * self.sectors], counts) - self.thresholds[e])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_wire()).expect("table serializes")
    }

    fn to_wire(&self) -> TableWire {
        let entries = (0..self.len())
            .map(|e| {
                if self.degenerate[e] {
                    None
                } else {
                    Some(EntryWire {
                        weights: self.weights[e * self.sectors..(e + 1) * self.sectors].to_vec(),
                        threshold: self.thresholds[e],
                    })
                }
            })
            .collect();
        TableWire {
            version: TABLE_FORMAT_VERSION,
            scenario_hash: self.scenario_hash.clone(),
            modes: self.modes,
            sectors: self.sectors,
            entries,
        }
    }

    /// Parse a saved table, refusing it unless it was built for `s`.
    pub fn from_json(text: &str, s: &InterferenceScenario) -> Result<Self> {
        let w: TableWire = serde_json::from_str(text).map_err(|e| contract(format!("pairwise table JSON: {e}")))?;
        if w.version != TABLE_FORMAT_VERSION {
            return Err(contract(format!("pairwise table version {} is not {TABLE_FORMAT_VERSION}", w.version)));
        }
        if w.scenario_hash != s.hash() {
            return Err(Error::Inconsistent("pairwise table was built for a different scenario".into()));
        }
        if w.modes != s.mode_count() || w.sectors != s.sectors() || w.entries.len() != w.modes * w.modes {
            return Err(Error::Inconsistent("pairwise table dimensions do not match the scenario".into()));
        }
        let mut weights = Vec::with_capacity(w.entries.len() * w.sectors);
        let mut thresholds = Vec::with_capacity(w.entries.len());
        let mut degenerate = Vec::with_capacity(w.entries.len());
        for (e, entry) in w.entries.into_iter().enumerate() {
            match entry {
                Some(x) => {
                    // Validates length and unit norm.
                    if x.weights.len() != w.sectors {
                        return Err(contract(format!("entry {e} has {} weights", x.weights.len())));
                    }
                    ThresholdDetector::new(x.weights.clone(), x.threshold, Hypothesis::A)?;
                    weights.extend(x.weights);
                    thresholds.push(x.threshold);
                    degenerate.push(false);
                }
                None => {
                    weights.extend(std::iter::repeat_n(0.0, w.sectors));
                    thresholds.push(0.0);
                    degenerate.push(true);
                }
            }
        }
        Ok(Self { modes: w.modes, sectors: w.sectors, scenario_hash: w.scenario_hash, weights, thresholds, degenerate })
    }
}

const TABLE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryWire {
    #[serde(serialize_with = "crate::fmt17::serialize_vec")]
    weights: Vec<f64>,
    #[serde(serialize_with = "crate::fmt17::serialize")]
    threshold: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableWire {
    version: u32,
    scenario_hash: String,
    modes: usize,
    sectors: usize,
    /// Row-major over `(i, j)`; `null` marks a degenerate pair.
    entries: Vec<Option<EntryWire>>,
}

/// One elimination round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EliminationRound {
    pub probe: usize,
    pub eliminated_d: Vec<usize>,
    /// `D` members the probe lost against (`U < 0`).
    pub lost_to: Vec<usize>,
    /// Comparisons skipped because the pair is degenerate.
    pub skipped: Vec<usize>,
    pub probe_eliminated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EliminationTrace {
    pub decision: bool,
    pub rounds: Vec<EliminationRound>,
}

impl EliminationTrace {
    pub fn skipped_comparisons(&self) -> usize {
        self.rounds.iter().map(|r| r.skipped.len()).sum()
    }
}

const MASK_WORDS: usize = (1 << MAX_TABLE_INTERFERERS) / 64;

struct Mask {
    words: [u64; MASK_WORDS],
    alive: usize,
}

impl Mask {
    fn full(n: usize) -> Self {
        let mut words = [0u64; MASK_WORDS];
        for (w, word) in words.iter_mut().enumerate() {
            let lo = w * 64;
            if lo >= n {
                break;
            }
            let bits = (n - lo).min(64);
            *word = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        }
        Self { words, alive: n }
    }

    fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1u64 << (i % 64));
        self.alive -= 1;
    }

    fn lowest(&self) -> Option<usize> {
        self.words.iter().enumerate().find(|(_, w)| **w != 0).map(|(k, w)| k * 64 + w.trailing_zeros() as usize)
    }

    fn highest(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .rev()
            .find(|(_, w)| **w != 0)
            .map(|(k, w)| k * 64 + 63 - w.leading_zeros() as usize)
    }
}

fn eliminate(
    t: &PairwiseTable,
    counts: &[u64],
    order: ProbeOrder,
    mut on_round: impl FnMut(EliminationRound),
    record: bool,
) -> bool {
    let n = t.modes;
    let mut c = Mask::full(n);
    let mut d = Mask::full(n);
    let max_rounds = 2 * n;
    let mut rounds = 0;
    loop {
        if d.alive == 0 {
            return true;
        }
        if c.alive == 0 {
            return false;
        }
        rounds += 1;
        assert!(rounds <= max_rounds, "successive elimination made no progress");
        let probe = match order {
            ProbeOrder::Ascending => c.lowest(),
            ProbeOrder::Descending => c.highest(),
        }
        .expect("nonempty C");
        let mut round = EliminationRound {
            probe,
            eliminated_d: Vec::new(),
            lost_to: Vec::new(),
            skipped: Vec::new(),
            probe_eliminated: false,
        };
        let (mut lost, mut skipped) = (false, false);
        for j in 0..n {
            if !d.contains(j) {
                continue;
            }
            match t.u(probe, j, counts) {
                Some(u) if u >= 0.0 => {
                    d.remove(j);
                    if record {
                        round.eliminated_d.push(j);
                    }
                }
                Some(_) => {
                    lost = true;
                    if record {
                        round.lost_to.push(j);
                    }
                }
                None => {
                    skipped = true;
                    if record {
                        round.skipped.push(j);
                    }
                }
            }
        }
        // A probe blocked only by degenerate pairs cannot make further progress.
        if lost || skipped {
            c.remove(probe);
            round.probe_eliminated = true;
        }
        if record {
            on_round(round);
        }
    }
}

/// Successive comparison and elimination; `true` decodes `a = 1`.
///
/// Each round the first surviving `C` member (in `order`) is tested against
/// every surviving `D_j`: `U >= 0` eliminates `D_j`, and any `U < 0` eliminates
/// the probe at the end of the round. Returns `true` iff `D` empties first.
pub fn successive_elimination(t: &PairwiseTable, counts: &[u64], order: ProbeOrder) -> bool {
    if t.modes <= 64 && counts.len() == t.sectors {
        eliminate_word(t, counts, order)
    } else {
        eliminate(t, counts, order, |_| {}, false)
    }
}

// Single-word sets for tables of at most 64 modes. Same rounds and the same
// U values as `eliminate`, without the trace bookkeeping.
fn eliminate_word(t: &PairwiseTable, counts: &[u64], order: ProbeOrder) -> bool {
    let n = t.modes;
    let m = t.sectors;
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let (mut c, mut d) = (full, full);
    let mut rounds = 0;
    while d != 0 {
        if c == 0 {
            return false;
        }
        rounds += 1;
        assert!(rounds <= 2 * n, "successive elimination made no progress");
        let probe = match order {
            ProbeOrder::Ascending => c.trailing_zeros() as usize,
            ProbeOrder::Descending => 63 - c.leading_zeros() as usize,
        };
        let row = probe * n;
        let mut blocked = false;
        let mut rest = d;
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let e = row + j;
            if t.degenerate[e] {
                blocked = true;
                continue;
            }
            if dot_counts(&t.weights[e * m..(e + 1) * m], counts) - t.thresholds[e] >= 0.0 {
                d &= !(1u64 << j);
            } else {
                blocked = true;
            }
        }
        if blocked {
            c &= !(1u64 << probe);
        }
    }
    true
}

/// As [`successive_elimination`], recording every round.
pub fn successive_elimination_traced(t: &PairwiseTable, counts: &[u64], order: ProbeOrder) -> EliminationTrace {
    let mut rounds = Vec::new();
    let decision = eliminate(t, counts, order, |r| rounds.push(r), true);
    EliminationTrace { decision, rounds }
}
