//! Input feature planes and sub-band feature extraction.
//!
//! Plane order: `Re Y₁, Im Y₁, Re Y₂, Im Y₂`, then the IVA planes: real and
//! imaginary parts (complex) or log power (LPS) of the IVA speech output,
//! followed by the noise output when both are selected.

use super::config::{FeatureKind, IvaChannels, ModelConfig};
use crate::bands::ErbFilterbank;
use crate::dsp::{ComplexSpectrogram, LPS_FLOOR};
use crate::nn::FeatureTensor;
use crate::{invalid, Complex64, Result};

/// Writes the feature planes of one frame into `out` (`[plane][bin]`).
pub(crate) fn frame_planes(y: [&[Complex64]; 2], iva: [&[Complex64]; 2], cfg: &ModelConfig, out: &mut [f32]) {
    let bins = y[0].len();
    let mut planes = out.chunks_exact_mut(bins);
    for ch in y {
        let re = planes.next().unwrap();
        for (o, v) in re.iter_mut().zip(ch) {
            *o = v.re as f32;
        }
        let im = planes.next().unwrap();
        for (o, v) in im.iter_mut().zip(ch) {
            *o = v.im as f32;
        }
    }
    let selected = match cfg.iva_channels {
        IvaChannels::Speech => &iva[..1],
        IvaChannels::SpeechAndNoise => &iva[..],
    };
    for ch in selected {
        match cfg.feature {
            FeatureKind::Complex => {
                let re = planes.next().unwrap();
                for (o, v) in re.iter_mut().zip(*ch) {
                    *o = v.re as f32;
                }
                let im = planes.next().unwrap();
                for (o, v) in im.iter_mut().zip(*ch) {
                    *o = v.im as f32;
                }
            }
            FeatureKind::Lps => {
                let p = planes.next().unwrap();
                for (o, v) in p.iter_mut().zip(*ch) {
                    *o = v.norm_sqr().max(LPS_FLOOR).ln() as f32;
                }
            }
        }
    }
}

fn check_pair(y: &ComplexSpectrogram, y_iva: &ComplexSpectrogram) -> Result<()> {
    if y.channels() != 2 || y.shape() != y_iva.shape() {
        return invalid(format!(
            "expected two matching 2-channel spectrograms, got {:?} and {:?}",
            y.shape(),
            y_iva.shape()
        ));
    }
    Ok(())
}

/// Full-resolution feature planes, `[plane][frame][bin]`.
pub fn build_features(y: &ComplexSpectrogram, y_iva: &ComplexSpectrogram, cfg: &ModelConfig) -> Result<FeatureTensor> {
    check_pair(y, y_iva)?;
    let (_, frames, bins) = y.shape();
    let planes = cfg.feature_planes();
    let mut out = FeatureTensor::zeros(planes, frames, bins);
    let mut buf = vec![0.0; planes * bins];
    for l in 0..frames {
        frame_planes([y.frame(0, l), y.frame(1, l)], [y_iva.frame(0, l), y_iva.frame(1, l)], cfg, &mut buf);
        for (p, row) in buf.chunks_exact(bins).enumerate() {
            out.row_mut(p, l).copy_from_slice(row);
        }
    }
    Ok(out)
}

/// Band-merges `[plane][bin]` into `[plane][band]`.
pub(crate) fn merge_frame(planes: &[f32], fb: &ErbFilterbank, out: &mut [f32]) {
    for (src, dst) in planes.chunks_exact(fb.n_bins()).zip(out.chunks_exact_mut(fb.n_bands())) {
        fb.merge_row(src, dst);
    }
}

/// Stacks each band with its `kernel − 1` neighbours (edge-replicated):
/// output channel `c·kernel + j` at band `f` is input `c` at band
/// `f + j − kernel/2`. `x` and `out` are `[channel][band]` rows of one frame.
pub(crate) fn sfe_frame(x: &[f32], bands: usize, kernel: usize, out: &mut [f32]) {
    let half = kernel / 2;
    for (c, row) in x.chunks_exact(bands).enumerate() {
        for j in 0..kernel {
            let dst = &mut out[(c * kernel + j) * bands..(c * kernel + j + 1) * bands];
            for (f, d) in dst.iter_mut().enumerate() {
                let src = (f + j).saturating_sub(half).min(bands - 1);
                *d = row[src];
            }
        }
    }
}

/// Sub-band feature extraction over a whole tensor.
pub fn sfe(x: &FeatureTensor, kernel: usize) -> Result<FeatureTensor> {
    if kernel % 2 == 0 {
        return invalid(format!("SFE kernel must be odd, got {kernel}"));
    }
    let (c, t, f) = (x.channels(), x.frames(), x.bands());
    let mut out = FeatureTensor::zeros(c * kernel, t, f);
    if f == 0 {
        return Ok(out);
    }
    let mut frame = vec![0.0; c * f];
    let mut stacked = vec![0.0; c * kernel * f];
    for l in 0..t {
        for ch in 0..c {
            frame[ch * f..(ch + 1) * f].copy_from_slice(x.row(ch, l));
        }
        sfe_frame(&frame, f, kernel, &mut stacked);
        for (ch, row) in stacked.chunks_exact(f).enumerate() {
            out.row_mut(ch, l).copy_from_slice(row);
        }
    }
    Ok(out)
}
