//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Graph`] records operations against a borrowed [`ParamStore`]; calling
//! [`Graph::backward`] on a scalar returns [`Gradients`] keyed by parameter,
//! which are accumulated into the store and consumed by
//! [`ParamStore::adam_step`].

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::{grad_check, rel_err, GradCheckConfig, GradCheckReport, ParamCheck};
pub use graph::{sigmoid, softplus, Graph, Var, LAYER_NORM_EPS, LOG_FLOOR};
pub use params::{AdamConfig, Gradients, Moments, ParamId, ParamStore};
pub use tensor::Tensor;
