//! Minimal reverse-mode differentiation for the layers the denoiser needs.
//!
//! A [`Tape`] is confined to one thread for the duration of a pass. Distinct tapes
//! can run concurrently; parameter tensors are plain data and may move between
//! threads whenever no pass is in flight.

mod adam;
pub mod init;
mod tape;
mod tensor;
mod weights;

pub use adam::AdamState;
pub use tape::{Grads, Mode, RunningStats, Tape, Var, BCE_CLAMP, BN_EPS, BN_MOMENTUM};
pub use tensor::Tensor;
pub use weights::WeightFile;
