use serde::{Deserialize, Serialize};

use super::{AbcCoefficients, PilotMatrix};
use crate::error::{contract, Error, Result};
use crate::linalg::Matrix;

/// LS estimate of the `K` gains seen by one sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub sector: usize,
    /// May be negative; the estimator is linear and unbiased.
    pub values: Vec<f64>,
}

impl ChannelEstimate {
    /// Copy with negative entries clamped to zero. Breaks unbiasedness.
    pub fn clipped(&self) -> ChannelEstimate {
        ChannelEstimate { sector: self.sector, values: self.values.iter().map(|v| v.max(0.0)).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseMethod {
    /// `(X Xᵀ)⁻¹ = [I − b/(a+(K−1)b)·E] / (L(a−b))` for whole pattern blocks.
    ClosedForm,
    /// Gauss–Jordan with partial pivoting.
    Elimination,
}

/// `λ̂ = (X Xᵀ)⁻¹ X (u − λn·1)` with the `K × L` projector precomputed.
#[derive(Debug, Clone)]
pub struct LsEstimator {
    users: usize,
    length: usize,
    projector: Matrix,
    method: InverseMethod,
}

fn describe(x: &PilotMatrix) -> String {
    match x.origin() {
        Some(o) => format!("pattern {} (K = {}, L = {})", o.pattern, x.users(), x.length()),
        None => format!("pilot matrix (K = {}, L = {})", x.users(), x.length()),
    }
}

fn gram_inverse(x: &PilotMatrix) -> Result<(Matrix, InverseMethod)> {
    let k = x.users();
    if let Some(origin) = x.origin().filter(|o| o.removed == 0) {
        let abc = AbcCoefficients::of_pattern(&origin.pattern);
        if abc.is_singular() {
            return Err(Error::Singular(format!("X Xᵀ is singular for {}", describe(x))));
        }
        let (a, b, _) = abc.as_f64();
        let l = x.length() as f64;
        let off = b / (a + (k as f64 - 1.0) * b);
        let scale = 1.0 / (l * (a - b));
        let inv = Matrix::from_fn(k, k, |r, c| scale * (if r == c { 1.0 } else { 0.0 } - off));
        return Ok((inv, InverseMethod::ClosedForm));
    }
    let xm = x.to_matrix();
    let gram = xm.mul(&xm.transpose());
    let inv = gram
        .inverse()
        .map_err(|_| Error::Singular(format!("X Xᵀ is singular for {}", describe(x))))?;
    Ok((inv, InverseMethod::Elimination))
}

impl LsEstimator {
    pub fn new(x: &PilotMatrix) -> Result<Self> {
        let (inv, method) = gram_inverse(x)?;
        let projector = inv.mul(&x.to_matrix());
        Ok(Self { users: x.users(), length: x.length(), projector, method })
    }

    pub fn method(&self) -> InverseMethod {
        self.method
    }

    pub fn estimate(&self, sector: usize, counts: &[f64], noise: f64) -> Result<ChannelEstimate> {
        if counts.len() != self.length {
            return Err(contract(format!("{} pilot observations for L = {}", counts.len(), self.length)));
        }
        let centered: Vec<f64> = counts.iter().map(|u| u - noise).collect();
        let values = self.projector.mul_vec(&centered);
        debug_assert_eq!(values.len(), self.users);
        Ok(ChannelEstimate { sector, values })
    }
}

/// One-shot LS estimate from the pilot observations `counts` of one sector.
pub fn ls_estimate(x: &PilotMatrix, sector: usize, counts: &[f64], noise: f64) -> Result<ChannelEstimate> {
    LsEstimator::new(x)?.estimate(sector, counts, noise)
}

/// `Tr((XXᵀ)⁻¹ X diag(Xᵀλ) Xᵀ (XXᵀ)⁻¹) + λn Tr((XXᵀ)⁻¹)`, evaluated densely.
pub fn exact_mse_trace(x: &PilotMatrix, gains: &[f64], noise: f64) -> Result<f64> {
    if gains.len() != x.users() {
        return Err(contract(format!("{} gains for K = {}", gains.len(), x.users())));
    }
    let xm = x.to_matrix();
    let xt = xm.transpose();
    let inv = xm
        .mul(&xt)
        .inverse()
        .map_err(|_| Error::Singular(format!("X Xᵀ is singular for {}", describe(x))))?;
    let slot_means = xt.mul_vec(gains);
    let proj = inv.mul(&xm);
    let mut signal = 0.0;
    for (l, &d) in slot_means.iter().enumerate() {
        let col: f64 = (0..x.users()).map(|k| proj[(k, l)].powi(2)).sum();
        signal += d * col;
    }
    Ok(signal + noise * inv.trace())
}
