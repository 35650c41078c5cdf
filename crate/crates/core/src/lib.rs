//! Mixture invariant training (MixIT) losses and their over-separation
//! regularizers, with the evaluation metrics and a synthetic experiment
//! harness built around them.
//!
//! The crate is organised bottom-up:
//!
//! - [`signal`]: waveform primitives (RMS, SI-SNR, thresholded SNR loss,
//!   mixture-consistency projection).
//! - [`mixit`]: exhaustive and least-squares mixing-matrix search.
//! - [`regularizers`]: sparsity and covariance penalties with gradients.
//! - [`semantic`]: soft-OR / soft-XOR aggregation, weak-label cross entropy,
//!   posterior cosine loss and a band-energy toy classifier.
//! - [`metrics`]: Hungarian alignment, MSi, 1S, MoMi and active-source counts.
//! - [`datagen`]: seeded synthetic corpus, manifest and WAV persistence.
//! - [`optimizer`]: direct Adam minimization of the composite loss over the
//!   source estimates, and the regularization-weight sweep.
//! - [`report`] and [`bench`]: CSV/JSON emission and the assignment benchmark
//!   used by the `mixkit` binary.

pub mod bench;
pub mod datagen;
pub mod error;
mod linalg;
pub mod metrics;
pub mod mixit;
pub mod optimizer;
pub mod regularizers;
pub mod report;
pub mod semantic;
pub mod signal;

pub use error::{MixkitError, Result};
pub use mixit::{BinaryMixingMatrix, MixitResult};
pub use signal::{MixtureBatch, SourceSet, Waveform};

/// Default SNR ceiling of the thresholded loss, in dB.
pub const DEFAULT_SNR_MAX_DB: f64 = 30.0;
