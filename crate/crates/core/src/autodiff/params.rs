//! Named parameter registry with ADAM state.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second ADAM moments for one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ParamStore {
    names: Vec<String>,
    index: HashMap<String, ParamId>,
    values: Vec<Tensor>,
    grads: Vec<Option<Tensor>>,
    moments: Vec<Moments>,
    step: u64,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            index: HashMap::new(),
            values: Vec::new(),
            grads: Vec::new(),
            moments: Vec::new(),
            step: 0,
        }
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateParameter(name));
        }
        let id = ParamId(self.values.len());
        let n = value.numel();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        self.grads.push(None);
        self.moments.push(Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    /// Replace a parameter's value; the shape must not change.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let cur = &self.values[id.0];
        if cur.shape() != value.shape() {
            return Err(Error::shape("set_value", cur.shape(), value.shape()));
        }
        self.values[id.0] = value;
        Ok(())
    }

    pub fn grad(&self, id: ParamId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    pub fn moments(&self, id: ParamId) -> &Moments {
        &self.moments[id.0]
    }

    pub fn set_moments(&mut self, id: ParamId, moments: Moments) -> Result<()> {
        let n = self.values[id.0].numel();
        if moments.m.len() != n || moments.v.len() != n {
            return Err(Error::Checkpoint(format!(
                "moment length mismatch for `{}`",
                self.names[id.0]
            )));
        }
        self.moments[id.0] = moments;
        Ok(())
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn set_step_count(&mut self, step: u64) {
        self.step = step;
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    /// Populate every gradient with zeros.
    pub fn zero_grads(&mut self) {
        for (g, v) in self.grads.iter_mut().zip(&self.values) {
            *g = Some(Tensor::zeros(v.shape()));
        }
    }

    /// Add `grads * scale` into the stored gradients.
    pub fn accumulate(&mut self, grads: &Gradients, scale: f64) -> Result<()> {
        if grads.grads.len() > self.values.len() {
            return Err(Error::InvalidArgument(
                "gradient set has more entries than the store".into(),
            ));
        }
        for (i, g) in grads.grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let slot = self.grads[i].get_or_insert_with(|| Tensor::zeros(self.values[i].shape()));
            if slot.shape() != g.shape() {
                return Err(Error::shape("accumulate", slot.shape(), g.shape()));
            }
            for (s, x) in slot.data_mut().iter_mut().zip(g.data()) {
                *s += scale * x;
            }
        }
        Ok(())
    }

    pub fn grad_norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .map(Tensor::sum_squares)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescale stored gradients so their global L2 norm is at most `max_norm`.
    /// Returns the pre-clip norm.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for g in self.grads.iter_mut().flatten() {
                g.data_mut().iter_mut().for_each(|x| *x *= s);
            }
        }
        norm
    }

    /// Bias-corrected ADAM update over every parameter, then zero the gradients.
    ///
    /// A parameter whose gradient is identically zero is left untouched, moments
    /// included; the step counter is shared and advances once per call.
    pub fn adam_step(&mut self, lr: f64, cfg: &AdamConfig) -> Result<()> {
        if let Some(i) = self.grads.iter().position(Option::is_none) {
            return Err(Error::MissingGradient(self.names[i].clone()));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for i in 0..self.values.len() {
            let g = self.grads[i].as_mut().expect("checked above");
            if g.data().iter().all(|&x| x == 0.0) {
                continue;
            }
            let Moments { m, v } = &mut self.moments[i];
            let p = self.values[i].data_mut();
            for (((p, m), v), &g) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g.data()) {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
            g.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        Ok(())
    }
}

/// Gradients produced by one backward pass, indexed by [`ParamId`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    pub(crate) grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }

    pub fn norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .map(Tensor::sum_squares)
            .sum::<f64>()
            .sqrt()
    }
}
