//! Marked temporal point processes learned with a recurrent graph network.
//!
//! Each event type owns an LSTM node; stacked multi-head graph attention mixes
//! node states after every event, and a global readout parameterizes a
//! softplus conditional intensity together with next-type and next-time heads.
//! Training maximizes the log-likelihood with a Monte-Carlo compensator;
//! fit is checked with the time-rescaling goodness-of-fit test.
//!
//! See the crate's `examples/` directory for one runnable program per
//! capability, and the `rgn` binary for the command-line workflow.

pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod datagen;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod objectives;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
