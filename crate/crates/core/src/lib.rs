//! Algorithmic core of the multimodal screening engine.
//!
//! Everything in this crate is pure computation over in-memory data and only
//! needs `alloc`: cohort labelling, temporal summarisation (pooling, uniform
//! resampling, four-state Gaussian HMM dynamics), the shallow classifier zoo,
//! late fusion, the nested cross-validation harness, MM-SHAP modality
//! attribution, fairness auditing with equalized-odds thresholds, and the
//! seeded synthetic cohort generator. File formats, the CLI and thread-level
//! parallelism live in the `mmscreen` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attribution;
pub mod cohort;
pub mod error;
pub mod evaluation;
pub mod fairness;
pub mod fusion;
pub mod learners;
pub mod math;
pub mod matrix;
pub mod synth;
pub mod temporal;

pub use error::{Error, Result};
pub use matrix::Matrix;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
