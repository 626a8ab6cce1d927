//! Targeted adversarial denoising of single-channel time series.
//!
//! The crate is organised bottom-up:
//!
//! - [`sigcore`]: segments, SNR-controlled mixing, spectra, metrics, proxy generators
//!   and the segment file formats.
//! - [`gradnet`]: a small reverse-mode differentiation engine with the layers the
//!   networks need, Adam, and a text weight format.
//! - [`models`]: the denoising autoencoder, the adversarial discriminator and the
//!   LSTM/CNN ensemble that predicts the contamination level.
//! - [`training`]: the correlation/spectral/entropy loss, pretraining, adversarial
//!   cycles, meta-targeter training and calibration statistics.
//! - [`targeting`]: logistic covariance-driven scale targeting with its two
//!   fallback paths.
//! - [`pipeline`]: end-to-end inference, benchmarking and report emission.
//! - [`cli`]: the `tada` command-line front end.

pub mod cli;
pub mod error;
pub mod gradnet;
pub mod models;
pub mod pipeline;
pub mod sigcore;
pub mod targeting;
pub mod training;

pub use error::{Error, Result};
pub use sigcore::{ContaminatedPair, MetricsTriple, PowerSpectrum, Segment, SnrLevel};
