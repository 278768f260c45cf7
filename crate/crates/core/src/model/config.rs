use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub num_types: usize,
    /// Shared width of the time embedding, node states and global state.
    pub d_in: usize,
    /// Per-head edge payload width.
    pub d_e: usize,
    /// Attention heads per layer; 0 removes the graph-attention stage.
    pub num_heads: usize,
    pub num_gat_layers: usize,
    pub dropout: f64,
    pub leaky_slope: f64,
    /// Fixed per-type slope on the elapsed-time term of the intensity. Empty means all zero.
    pub alpha: Vec<f64>,
    pub shared_lstm: bool,
    /// Use the score projection as the payload projection.
    pub tie_edge_projections: bool,
    pub epsilon_t: f64,
    pub embedding_base: f64,
    pub time_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_types: 1,
            d_in: 32,
            d_e: 16,
            num_heads: 4,
            num_gat_layers: 2,
            dropout: 0.1,
            leaky_slope: 0.2,
            alpha: Vec::new(),
            shared_lstm: false,
            tie_edge_projections: true,
            epsilon_t: 1e-6,
            embedding_base: 10_000.0,
            time_scale: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn new(num_types: usize, d_in: usize, d_e: usize, num_heads: usize) -> Self {
        Self {
            num_types,
            d_in,
            d_e,
            num_heads,
            ..Self::default()
        }
    }

    pub fn embedding(&self) -> EmbeddingConfig {
        EmbeddingConfig {
            dim: self.d_in,
            base: self.embedding_base,
            time_scale: self.time_scale,
        }
    }

    pub fn alpha_for(&self, y: usize) -> f64 {
        self.alpha.get(y).copied().unwrap_or(0.0)
    }

    /// Stored attention scores per event: one per directed edge, head and layer.
    pub fn attention_scores_per_event(&self) -> usize {
        self.num_gat_layers * self.num_heads * self.num_types * self.num_types
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_types == 0 {
            return bad("num_types must be >= 1".into());
        }
        if self.d_e == 0 {
            return bad("d_e must be >= 1".into());
        }
        if self.num_gat_layers == 0 {
            return bad("num_gat_layers must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !self.leaky_slope.is_finite() {
            return bad("leaky_slope must be finite".into());
        }
        if !self.alpha.is_empty() && self.alpha.len() != self.num_types {
            return bad(format!(
                "alpha has {} entries but there are {} types",
                self.alpha.len(),
                self.num_types
            ));
        }
        if self.alpha.iter().any(|a| !a.is_finite()) {
            return bad("alpha entries must be finite".into());
        }
        if !(self.epsilon_t > 0.0) {
            return bad(format!("epsilon_t must be positive, got {}", self.epsilon_t));
        }
        self.embedding().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = ModelConfig::default();
        c.d_in = 3;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::default();
        c.dropout = 1.0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::new(2, 8, 4, 2);
        c.alpha = vec![0.1];
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<ModelConfig>(r#"{"num_types": 2, "d_model": 8}"#);
        assert!(err.is_err());
        let c: ModelConfig = serde_json::from_str(r#"{"num_types": 2}"#).unwrap();
        assert_eq!(c.d_in, 32);
    }
}
