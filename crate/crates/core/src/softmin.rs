//! Soft minimum `−(1/ρ) log Σ exp(−ρ zᵢ)` and its softmax weights.
//!
//! Both are evaluated with the minimum shifted out of the exponent, so large
//! barrier values at large `ρ` do not overflow.

use crate::error::{Error, Result};

/// Sharpness parameter `ρ > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftminParams {
    rho: f64,
}

impl SoftminParams {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Contract(format!("softmin sharpness must be positive, got {rho}")));
        }
        Ok(SoftminParams { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn value(&self, values: &[f64]) -> Result<f64> {
        let zmin = check_values(values)?;
        let sum: f64 = values.iter().map(|&z| (-self.rho * (z - zmin)).exp()).sum();
        Ok(zmin - sum.ln() / self.rho)
    }

    /// `wᵢ = exp(−ρ zᵢ) / Σₖ exp(−ρ zₖ)`, so that `∇softmin = Σ wᵢ ∇zᵢ`.
    pub fn weights(&self, values: &[f64]) -> Result<Vec<f64>> {
        let zmin = check_values(values)?;
        let mut w: Vec<f64> = values
            .iter()
            .map(|&z| (-self.rho * (z - zmin)).exp())
            .collect();
        let sum: f64 = w.iter().sum();
        for wi in &mut w {
            *wi /= sum;
        }
        Ok(w)
    }
}

fn check_values(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Contract("softmin of an empty list".into()));
    }
    if let Some(bad) = values.iter().find(|z| !z.is_finite()) {
        return Err(Error::Contract(format!("softmin argument is not finite: {bad}")));
    }
    Ok(values.iter().copied().fold(f64::INFINITY, f64::min))
}

pub fn softmin(values: &[f64], rho: f64) -> Result<f64> {
    SoftminParams::new(rho)?.value(values)
}

pub fn softmin_weights(values: &[f64], rho: f64) -> Result<Vec<f64>> {
    SoftminParams::new(rho)?.weights(values)
}
