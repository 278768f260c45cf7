//! Event sequences, synthetic ground-truth generators and dataset files.

mod io;
mod process;
mod sequence;

pub use io::{load_jsonl, save_jsonl, split, Splits};
pub use process::{
    oracle_loglik, sample_hawkes, sample_inhomogeneous, sample_poisson, GroundTruth, Hawkes,
    Poisson, Process, SineRate,
};
pub use sequence::{Event, EventSequence};

pub(crate) use sequence::check_all;
