//! Dual-channel speech enhancement for low-SNR conditions.
//!
//! The processing chain is:
//!
//! 1. [`dsp::stft`] of a two-microphone recording,
//! 2. blind two-source separation with auxiliary-function IVA ([`auxiva`]),
//! 3. a lightweight grouped temporal convolutional recurrent network
//!    ([`model`]) that looks at both the noisy mixture and the IVA estimates
//!    and predicts a complex ratio mask,
//! 4. masking and [`dsp::istft`].
//!
//! Supporting modules provide the ERB band compression used by the network
//! ([`bands`]), framework-free inference primitives ([`nn`]), training-loss
//! components usable as evaluation metrics ([`loss`]) and an image-method
//! scene simulator ([`simkit`]).

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auxiva;
pub mod bands;
pub mod dsp;
mod error;
pub mod loss;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod simkit;

#[cfg(any(test, feature = "oracles"))]
pub mod oracles;

pub use error::{Error, Result};
pub use rustfft::num_complex::Complex64;

pub(crate) use error::invalid;
