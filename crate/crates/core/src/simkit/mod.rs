//! Two-microphone room acoustics simulation for building training and test
//! mixtures.
//!
//! A scene places a 4 cm two-microphone array, a speech source and a point
//! noise source in a shoebox room. Impulse responses come from the image
//! method with uniform Sabine absorption; mixtures are formed at a requested
//! SNR measured on the first microphone after reverberation.

mod mix;
mod rir;
mod scene;

pub use mix::{early_target, fft_convolve, mix_at_snr, render_scene, MixResult, RenderedScene, EARLY_WINDOW_SECS};
pub use rir::{default_max_order, image_rir, image_rir_at, noise_rir, sabine_absorption, schroeder_curve_db, schroeder_rt60, Rir, SPEED_OF_SOUND};
pub use scene::{doa_degrees, sample_scene, ManifestRecord, Point, SceneConstraints, SceneSpec};
