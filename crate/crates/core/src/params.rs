//! Model constants shared by every estimator.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Coupling data (γ, μ, R) plus the derived Q and μ_R.
///
/// Construct with [`validate_params`]; fields are public for reading only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: f64,
    pub mu: f64,
    pub radius: f64,
    pub q_const: f64,
    pub mu_scaled: f64,
}

pub fn validate_params(gamma: f64, mu: f64, radius: f64) -> Result<ModelParams> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::OutOfRangeGamma(gamma));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::NonPositive { name: "mu", value: mu });
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::NonPositive { name: "radius", value: radius });
    }
    let q_const = q_of(gamma);
    Ok(ModelParams {
        gamma,
        mu,
        radius,
        q_const,
        mu_scaled: mu * radius.powf(gamma * q_const),
    })
}

/// Q = γ/2 + 2/γ.
pub fn q_of(gamma: f64) -> f64 {
    gamma / 2.0 + 2.0 / gamma
}

impl ModelParams {
    /// γQ = 2 + γ²/2, the scaling exponent of the GMC masses.
    pub fn gamma_q(&self) -> f64 {
        self.gamma * self.q_const
    }

    /// The R = 1 problem with cosmological constant μ_R.
    pub fn at_unit_radius(&self) -> ModelParams {
        ModelParams {
            gamma: self.gamma,
            mu: self.mu_scaled,
            radius: 1.0,
            q_const: self.q_const,
            mu_scaled: self.mu_scaled,
        }
    }

    /// Inverse of [`at_unit_radius`](Self::at_unit_radius).
    pub fn from_unit_radius(unit: &ModelParams, radius: f64) -> Result<ModelParams> {
        validate_params(unit.gamma, unit.mu / radius.powf(unit.gamma_q()), radius)
    }

    pub fn with_mu(&self, mu: f64) -> Result<ModelParams> {
        validate_params(self.gamma, mu, self.radius)
    }

    pub fn is_admissible(&self, alpha: f64) -> bool {
        alpha.abs() < self.q_const
    }

    /// Hex SHA-256 of the exact bit patterns of (γ, μ, R).
    pub fn fingerprint(&self) -> String {
        fingerprint_parts(&[
            ("gamma", format!("{:016x}", self.gamma.to_bits())),
            ("mu", format!("{:016x}", self.mu.to_bits())),
            ("radius", format!("{:016x}", self.radius.to_bits())),
        ])
    }
}

/// Hash of `key=value` pairs joined by newlines, in the order given.
pub fn fingerprint_parts(parts: &[(&str, String)]) -> String {
    let mut h = Sha256::new();
    for (k, v) in parts {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
