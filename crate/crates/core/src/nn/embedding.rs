//! Task embeddings and their normalization.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Invertible map from raw task parameters to the hypernetwork input range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingCodec {
    /// Affine `[lo, hi] → [-1, 1]` (Reynolds number).
    Affine { lo: f64, hi: f64 },
    /// `log₁₀`, then affine `[log lo, log hi] → [-1, 1]` (viscosity).
    Log10 { lo: f64, hi: f64 },
    /// Unchanged vector of the given length (discretized initial condition).
    Identity { dim: usize },
}

impl EmbeddingCodec {
    pub fn reynolds() -> Self {
        EmbeddingCodec::Affine { lo: 20.0, hi: 100.0 }
    }

    pub fn viscosity() -> Self {
        EmbeddingCodec::Log10 { lo: 1e-4, hi: 1e-3 }
    }

    pub fn dim(&self) -> usize {
        match self {
            EmbeddingCodec::Affine { .. } | EmbeddingCodec::Log10 { .. } => 1,
            EmbeddingCodec::Identity { dim } => *dim,
        }
    }

    pub fn encode(&self, raw: &[f64]) -> Result<TaskEmbedding> {
        if raw.len() != self.dim() {
            return Err(Error::Shape {
                context: "task embedding",
                expected: self.dim(),
                found: raw.len(),
                offset: None,
            });
        }
        let normalized = match *self {
            EmbeddingCodec::Affine { lo, hi } => Vec::from([affine(raw[0], lo, hi)]),
            EmbeddingCodec::Log10 { lo, hi } => {
                if raw[0] <= 0.0 {
                    return Err(Error::Config(format!(
                        "viscosity must be positive, got {}",
                        raw[0]
                    )));
                }
                Vec::from([affine(
                    libm::log10(raw[0]),
                    libm::log10(lo),
                    libm::log10(hi),
                )])
            }
            EmbeddingCodec::Identity { .. } => raw.to_vec(),
        };
        Ok(TaskEmbedding {
            raw: raw.to_vec(),
            normalized,
        })
    }

    pub fn decode(&self, normalized: &[f64]) -> Vec<f64> {
        match *self {
            EmbeddingCodec::Affine { lo, hi } => Vec::from([unaffine(normalized[0], lo, hi)]),
            EmbeddingCodec::Log10 { lo, hi } => Vec::from([libm::pow(
                10.0,
                unaffine(normalized[0], libm::log10(lo), libm::log10(hi)),
            )]),
            EmbeddingCodec::Identity { .. } => normalized.to_vec(),
        }
    }
}

fn affine(x: f64, lo: f64, hi: f64) -> f64 {
    2.0 * (x - lo) / (hi - lo) - 1.0
}

fn unaffine(y: f64, lo: f64, hi: f64) -> f64 {
    lo + (y + 1.0) * (hi - lo) / 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskEmbedding {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}
