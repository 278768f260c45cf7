//! Bounded sinusoidal embedding of event timestamps.

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    /// Embedding width; even and at least 2.
    pub dim: usize,
    /// Frequency base `M`.
    pub base: f64,
    /// Raw timestamps are divided by this before embedding.
    pub time_scale: f64,
}

impl EmbeddingConfig {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            base: 10_000.0,
            time_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 || self.dim % 2 != 0 {
            return Err(Error::Config(format!(
                "embedding dimension must be even and >= 2, got {}",
                self.dim
            )));
        }
        if !(self.base > 1.0) {
            return Err(Error::Config(format!("embedding base must exceed 1, got {}", self.base)));
        }
        if !(self.time_scale > 0.0) {
            return Err(Error::Config(format!(
                "time_scale must be positive, got {}",
                self.time_scale
            )));
        }
        Ok(())
    }
}

/// `x[2k] = sin(t' / M^(2k/d))`, `x[2k+1] = cos(t' / M^(2k/d))` with `t' = t / time_scale`,
/// returned as a `[1, d]` row.
pub fn embed_time(t: f64, cfg: &EmbeddingConfig) -> Result<Tensor> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("timestamp must be >= 0, got {t}")));
    }
    let ts = t / cfg.time_scale;
    let d = cfg.dim as f64;
    let mut x = Vec::with_capacity(cfg.dim);
    for k in 0..cfg.dim / 2 {
        let angle = ts / cfg.base.powf(2.0 * k as f64 / d);
        x.push(angle.sin());
        x.push(angle.cos());
    }
    Ok(Tensor::row(x))
}
