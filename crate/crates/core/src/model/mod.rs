//! Dual-channel grouped temporal convolutional recurrent network.
//!
//! ```text
//! Y, Y_iva ─► feature planes ─► band merge (257→129) ─► SFE (×3 channels)
//!   ─► encoder: conv (1,5)/(1,2) ×2 (129→65→33) ─► GT-Conv d=1,2,5
//!   ─► G-DPRNN ×2 ─► + encoder output
//!   ─► decoder: GT-Conv d=5,2,1 ─► deconv ×2 (33→65→129) ─► tanh
//!   ─► band split (129→257) ─► complex ratio mask
//! ```
//!
//! The dual-encoder variant runs the noisy planes and the IVA planes through
//! separate 12-channel encoders and fuses them with a pointwise conv.
//!
//! Every block is causal in time, and inference runs frame by frame with an
//! explicit [`StreamState`]; [`Network::forward`] simply steps through all
//! frames.

mod blocks;
mod config;
mod features;
mod network;
mod params;
mod weights;

pub use blocks::{ConvStage, DeconvStage, DprnnBlock, DprnnState, GtConv, GtState, Linear, LN_EPS};
pub use config::{EncoderKind, FeatureKind, IvaChannels, Masking, ModelConfig, PRESET_NAMES};
pub use features::{build_features, sfe};
pub use network::{count_params, layout, Encoder, FrameTrace, Network, StreamState};
pub use params::{fan_in_bound, Kind, Loader, ParamSource, RandomInit, Recorder, TensorInfo};
pub use weights::{init_random, load_weights, save_weights, ModelWeights, WeightMeta, WeightTensor, FORMAT_VERSION, MAGIC};

use crate::auxiva::{iva_macs_per_second, IvaConfig};
use crate::dsp::{ComplexSpectrogram, StftConfig};
use crate::{invalid, Complex64, Result};

/// Real and imaginary mask planes, `[frame][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexRatioMask {
    frames: usize,
    bins: usize,
    re: Vec<f32>,
    im: Vec<f32>,
}

impl ComplexRatioMask {
    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self { frames, bins, re: vec![0.0; frames * bins], im: vec![0.0; frames * bins] }
    }

    pub fn from_planes(frames: usize, bins: usize, re: Vec<f32>, im: Vec<f32>) -> Result<Self> {
        if re.len() != frames * bins || im.len() != frames * bins {
            return invalid(format!("mask planes do not match {frames}x{bins}"));
        }
        Ok(Self { frames, bins, re, im })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn re(&self) -> &[f32] {
        &self.re
    }

    pub fn im(&self) -> &[f32] {
        &self.im
    }

    pub fn frame(&self, l: usize) -> (&[f32], &[f32]) {
        let r = l * self.bins..(l + 1) * self.bins;
        (&self.re[r.clone()], &self.im[r])
    }

    pub fn frame_mut(&mut self, l: usize) -> (&mut [f32], &mut [f32]) {
        let r = l * self.bins..(l + 1) * self.bins;
        (&mut self.re[r.clone()], &mut self.im[r])
    }

    pub fn get(&self, l: usize, k: usize) -> Complex64 {
        let i = l * self.bins + k;
        Complex64::new(self.re[i] as f64, self.im[i] as f64)
    }
}

/// `Ŝ = (M_r + i·M_i) ⊙ T`, where `T` is the IVA speech output (`Masking::Iva`)
/// or noisy microphone 1 (`Masking::Noisy`).
pub fn apply_mask(mask: &ComplexRatioMask, y: &ComplexSpectrogram, y_iva: &ComplexSpectrogram, mode: Masking) -> Result<ComplexSpectrogram> {
    let target = match mode {
        Masking::Iva => y_iva,
        Masking::Noisy => y,
    };
    let (_, frames, bins) = target.shape();
    if target.channels() == 0 || frames != mask.frames || bins != mask.bins {
        return invalid(format!("mask {}x{} does not match target {:?}", mask.frames, mask.bins, target.shape()));
    }
    let mut out = ComplexSpectrogram::zeros(1, frames, bins);
    for l in 0..frames {
        let src = target.frame(0, l);
        for (k, (o, t)) in out.frame_mut(0, l).iter_mut().zip(src).enumerate() {
            *o = mask.get(l, k) * t;
        }
    }
    Ok(out)
}

/// Convenience wrapper: bind `weights` and run [`Network::forward`].
pub fn forward(y: &ComplexSpectrogram, y_iva: &ComplexSpectrogram, weights: &ModelWeights, cfg: &ModelConfig) -> Result<ComplexRatioMask> {
    Network::new(cfg, weights)?.forward(y, y_iva)
}

/// Analytic complexity, in multiply-accumulates per second of audio.
///
/// Convolutions count `kernel weights × output positions` (transposed
/// convolutions: `× input positions`), GRUs count their input and recurrent
/// matrices once per step, linear layers their weight matrix per position,
/// and batch/layer norms and elementwise gates one MAC per element.
/// Activations, band merging and sub-band stacking are free.
#[derive(Debug, Clone, PartialEq)]
pub struct MacReport {
    pub layers: Vec<(String, f64)>,
    pub network: f64,
    pub iva: f64,
    pub total: f64,
}

pub fn mac_report(cfg: &ModelConfig, stft: &StftConfig, iva: &IvaConfig) -> Result<MacReport> {
    let rec = layout(cfg)?;
    let fps = stft.frames_per_second();
    let layers: Vec<(String, f64)> = rec.layers.iter().map(|(n, m)| (n.clone(), *m as f64 * fps)).collect();
    let network = rec.macs_per_frame() as f64 * fps;
    let iva = iva_macs_per_second(iva, stft);
    Ok(MacReport { layers, network, iva, total: network + iva })
}

/// Total MACs per second with the default IVA iteration count.
pub fn count_macs(cfg: &ModelConfig, stft: &StftConfig) -> Result<f64> {
    Ok(mac_report(cfg, stft, &IvaConfig::default())?.total)
}
