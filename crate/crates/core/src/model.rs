//! Model parameters shared by the closed forms and the simulator.

use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawParams {
    lambdas: Vec<f64>,
    mu: f64,
}

/// Per-source Poisson arrival rates and the common exponential service rate.
///
/// Source indices are 1-based everywhere in the public API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    lambdas: Vec<f64>,
    mu: f64,
    total: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = AoiError;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.lambdas, raw.mu)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            lambdas: p.lambdas,
            mu: p.mu,
        }
    }
}

fn check_rate(field: String, value: f64) -> Result<()> {
    if value.is_nan() || value.is_infinite() {
        return Err(AoiError::NonFiniteRate { field, value });
    }
    if value <= 0.0 {
        return Err(AoiError::NonPositiveRate { field, value });
    }
    Ok(())
}

impl ModelParams {
    pub fn new(lambdas: Vec<f64>, mu: f64) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(AoiError::EmptySourceList);
        }
        for (i, &l) in lambdas.iter().enumerate() {
            check_rate(format!("lambdas[{}]", i + 1), l)?;
        }
        check_rate("mu".to_string(), mu)?;
        let total = lambdas.iter().sum();
        Ok(Self { lambdas, mu, total })
    }

    /// Shorthand for the two-source model.
    pub fn two_source(lambda1: f64, lambda2: f64, mu: f64) -> Result<Self> {
        Self::new(vec![lambda1, lambda2], mu)
    }

    pub fn sources(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Aggregate arrival rate over all sources.
    pub fn total_rate(&self) -> f64 {
        self.total
    }

    /// Arrival rate of source `k` (1-based).
    pub fn lambda(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        Ok(self.lambdas[k - 1])
    }

    pub fn check_index(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.lambdas.len() {
            return Err(AoiError::IndexOutOfRange {
                index: k,
                sources: self.lambdas.len(),
            });
        }
        Ok(())
    }

    pub fn require_two_sources(&self) -> Result<(f64, f64)> {
        match self.lambdas[..] {
            [a, b] => Ok((a, b)),
            _ => Err(AoiError::RequiresTwoSources(self.lambdas.len())),
        }
    }

    /// Probability that a packet finishes service before the next arrival,
    /// μ/(λ+μ).
    pub fn valid_packet_probability(&self) -> f64 {
        self.mu / (self.total + self.mu)
    }

    /// Rate of valid (delivered) packets of source `k`, λ_k μ/(λ+μ).
    pub fn effective_update_rate(&self, k: usize) -> Result<f64> {
        Ok(self.lambda(k)? * self.valid_packet_probability())
    }

    /// Multiplies every rate by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.lambdas.iter().map(|l| l * c).collect(), self.mu * c)
    }
}
