//! Generative modelling by optimal transport in an autoencoder's latent space.
//!
//! A fixed autoencoder maps data into a low-dimensional latent space. A scalar
//! network `D` is then regressed onto the Kantorovich potentials of batched
//! discrete transport problems between Gaussian noise and latent codes, and
//! new samples are produced by pushing noise through `z + ∇D(z)` and decoding.
//!
//! Module map:
//!
//! * [`ot`]: cost matrices, the exact assignment solver, primal plans, dual
//!   potentials, c-transforms and the ordering (matching) function.
//! * [`nn`]: a small fully connected network with exact first- and
//!   second-order gradients, plus Adam.
//! * [`potential`]: the two-step training loop for the potential network.
//! * [`autoencoder`]: the vanilla MLP autoencoder.
//! * [`generator`]: transport, generation and latent interpolation.
//! * [`datasets`]: the eight-Gaussian sampler and the IDX reader/writer.
//! * [`eval`]: energy distance, mode coverage and toy figure emission.
//! * [`checkpoint`]: versioned JSON checkpoints.
//! * [`experiment`]: the end-to-end toy and MNIST runs with their metrics.
//!
//! Data-parallel inner loops go through [`par`], which uses rayon when the
//! `parallel` feature is on and falls back to plain iteration otherwise. Both
//! paths produce bit-identical results.

pub mod autoencoder;
pub mod checkpoint;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod generator;
pub mod image;
pub mod linalg;
pub mod nn;
pub mod ot;
pub mod par;
pub mod potential;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::Matrix;
