//! Poisson photon-count channel primitives.
//!
//! Intensities are dimensionless mean counts per symbol slot. A sector's
//! count is Poisson with mean equal to the sum of the active users' gains at
//! that sector plus its background level.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::poisson::Poisson;

/// Planck constant in J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Mean signal counts `lambda_s[k][m]` from user `k` at sector `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct GainMatrix {
    users: usize,
    sectors: usize,
    data: Vec<f64>,
}

impl GainMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let users = rows.len();
        if users == 0 {
            return Err(contract("gain matrix needs at least one user"));
        }
        let sectors = rows[0].len();
        if sectors == 0 {
            return Err(contract("gain matrix needs at least one sector"));
        }
        let mut data = Vec::with_capacity(users * sectors);
        for (k, row) in rows.into_iter().enumerate() {
            if row.len() != sectors {
                return Err(contract(format!(
                    "gain row {k} has {} sectors, expected {sectors}",
                    row.len()
                )));
            }
            for (m, &g) in row.iter().enumerate() {
                if !(g.is_finite() && g >= 0.0) {
                    return Err(contract(format!("gain[{k}][{m}] = {g} must be finite and >= 0")));
                }
            }
            data.extend(row);
        }
        Ok(Self { users, sectors, data })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn sectors(&self) -> usize {
        self.sectors
    }

    pub fn get(&self, user: usize, sector: usize) -> f64 {
        self.data[user * self.sectors + sector]
    }

    /// Gains of one user across all sectors.
    pub fn user_row(&self, user: usize) -> &[f64] {
        &self.data[user * self.sectors..(user + 1) * self.sectors]
    }

    /// Gains of all users at one sector.
    pub fn sector_column(&self, sector: usize) -> Vec<f64> {
        (0..self.users).map(|k| self.get(k, sector)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.sectors).map(<[f64]>::to_vec).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for GainMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<GainMatrix> for Vec<Vec<f64>> {
    fn from(g: GainMatrix) -> Self {
        g.rows()
    }
}

/// Mean background counts per sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct NoiseVector(Vec<f64>);

impl NoiseVector {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(contract("noise vector is empty"));
        }
        for (m, &v) in levels.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(contract(format!("noise[{m}] = {v} must be finite and >= 0")));
            }
        }
        Ok(Self(levels))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for NoiseVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<NoiseVector> for Vec<f64> {
    fn from(n: NoiseVector) -> Self {
        n.0
    }
}

/// Photoelectron counts of one symbol slot, one entry per sector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotonCounts(pub Vec<u64>);

impl PhotonCounts {
    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Physical link budget of one user/sector pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalLink {
    /// Quantum efficiency, in (0, 1].
    pub eta: f64,
    /// Emitted optical power in watts.
    pub power: f64,
    /// Symbol duration in seconds.
    pub symbol_time: f64,
    /// Path loss, >= 1.
    pub path_loss: f64,
    /// Optical frequency in hertz.
    pub frequency: f64,
}

/// Mean and variance of a weighted count sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumMoments {
    pub mean: f64,
    pub variance: f64,
}

impl SumMoments {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Mean detected signal count `eta * P * Ts / (xi * h * nu)`.
pub fn gain_from_physics(link: &PhysicalLink) -> Result<f64> {
    let PhysicalLink { eta, power, symbol_time, path_loss, frequency } = *link;
    let fields = [("eta", eta), ("power", power), ("symbol_time", symbol_time), ("path_loss", path_loss), ("frequency", frequency)];
    for (name, v) in fields {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("{name} = {v} must be positive and finite")));
        }
    }
    if eta > 1.0 {
        return Err(Error::Domain(format!("eta = {eta} exceeds 1")));
    }
    if path_loss < 1.0 {
        return Err(Error::Domain(format!("path_loss = {path_loss} is below 1")));
    }
    let lambda = eta * power * symbol_time / (path_loss * PLANCK * frequency);
    if !lambda.is_finite() {
        return Err(Error::Domain(format!("mean count overflowed for {link:?}")));
    }
    Ok(lambda)
}

/// Per-sector intensity with the users flagged in `active` switched on.
pub fn compose_intensity(gains: &GainMatrix, noise: &NoiseVector, active: &[bool]) -> Result<Vec<f64>> {
    if active.len() != gains.users() {
        return Err(contract(format!("{} activity flags for {} users", active.len(), gains.users())));
    }
    if noise.len() != gains.sectors() {
        return Err(contract(format!("{} noise levels for {} sectors", noise.len(), gains.sectors())));
    }
    let mut out = noise.as_slice().to_vec();
    for (k, _) in active.iter().enumerate().filter(|(_, &on)| on) {
        for (o, g) in out.iter_mut().zip(gains.user_row(k)) {
            *o += g;
        }
    }
    Ok(out)
}

/// Precomputed per-sector samplers for a fixed intensity vector.
#[derive(Debug, Clone)]
pub struct CountSampler {
    sectors: Vec<Poisson>,
}

impl CountSampler {
    pub fn new(intensity: &[f64]) -> Result<Self> {
        let sectors = intensity
            .iter()
            .enumerate()
            .map(|(m, &l)| Poisson::new(l).ok_or_else(|| contract(format!("intensity[{m}] = {l} must be finite and >= 0"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sectors })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhotonCounts {
        PhotonCounts(self.sectors.iter().map(|p| p.sample(rng)).collect())
    }

    /// Fill `out` in place, avoiding an allocation per slot.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [u64]) {
        for (o, p) in out.iter_mut().zip(&self.sectors) {
            *o = p.sample(rng);
        }
    }
}

/// Draw one slot of counts, independently per sector.
pub fn sample_counts<R: Rng + ?Sized>(intensity: &[f64], rng: &mut R) -> Result<PhotonCounts> {
    Ok(CountSampler::new(intensity)?.sample(rng))
}

pub(crate) fn dot_counts(weights: &[f64], counts: &[u64]) -> f64 {
    weights.iter().zip(counts).map(|(w, &n)| w * n as f64).sum()
}

/// `sum_m weights[m] * counts[m]`.
pub fn weighted_sum(weights: &[f64], counts: &PhotonCounts) -> Result<f64> {
    if weights.len() != counts.len() {
        return Err(contract(format!("{} weights for {} sectors", weights.len(), counts.len())));
    }
    Ok(dot_counts(weights, counts.as_slice()))
}

/// Mean `sum a_m l_m` and variance `sum a_m^2 l_m` of the weighted sum.
pub fn weighted_sum_moments(weights: &[f64], intensity: &[f64]) -> Result<SumMoments> {
    if weights.len() != intensity.len() {
        return Err(contract(format!("{} weights for {} intensities", weights.len(), intensity.len())));
    }
    if let Some((m, l)) = intensity.iter().enumerate().find(|(_, l)| !(l.is_finite() && **l >= 0.0)) {
        return Err(contract(format!("intensity[{m}] = {l} must be finite and >= 0")));
    }
    let mut mean = 0.0;
    let mut variance = 0.0;
    for (a, l) in weights.iter().zip(intensity) {
        mean += a * l;
        variance += a * a * l;
    }
    Ok(SumMoments { mean, variance })
}
