//! Regularized graph embeddings under graphon models.
//!
//! The crate is organised bottom-up:
//!
//! - [`graphon`]: graphon families, degree functions and latent-variable graph sampling.
//! - [`sampler`]: uniform vertex, uniform edge and random-walk subsampling schemes with
//!   unigram negative sampling, plus a Monte Carlo estimator of inclusion probabilities.
//! - [`formulas`]: closed-form limits of the inclusion probabilities for each scheme.
//! - [`risk`]: cross-entropy losses, the stochastic and weighted empirical risks and their gradients.
//! - [`trainer`]: full-batch projected descent and Adam-based stochastic training.
//! - [`population`]: the discretized population risk and its penalized minimizer on the PSD cone.
//! - [`harness`]: verification experiments and link-prediction evaluation.
//! - [`cli`]: manifest loading, edge-list ingestion and experiment orchestration.

pub mod cli;
pub mod error;
pub mod formulas;
pub mod graphon;
pub mod harness;
pub mod population;
pub mod quadrature;
pub mod risk;
pub mod rng;
pub mod sampler;
pub mod trainer;

pub use error::{Error, Result};
