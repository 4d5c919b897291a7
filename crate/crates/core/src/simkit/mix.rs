use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::rir::{image_rir, noise_rir, Rir};
use super::scene::SceneSpec;
use crate::dsp::Waveform;
use crate::{invalid, Result};

/// Length of the early-reflection window kept in the training target.
pub const EARLY_WINDOW_SECS: f64 = 0.050;

/// Peak level the mixture is normalized to when it would clip.
const PEAK_TARGET: f64 = 0.9;

/// Linear convolution of `x` with `h`, truncated to `out_len` samples.
pub fn fft_convolve(x: &[f64], h: &[f64], out_len: usize) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return vec![0.0; out_len];
    }
    let full = x.len() + h.len() - 1;
    let n = full.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |v: &[f64]| {
        let mut b: Vec<Complex64> = v.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        b.resize(n, Complex64::new(0.0, 0.0));
        b
    };
    let mut a = pad(x);
    let mut b = pad(h);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q;
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    (0..out_len).map(|i| if i < full { a[i].re * scale } else { 0.0 }).collect()
}

/// Speech convolved with the first channel of `rir`, keeping only the taps
/// within `window` seconds after the direct path. Output length matches the
/// input, so the target stays time-aligned with the mixture.
pub fn early_target(speech: &Waveform, rir: &Rir, window: f64) -> Result<Waveform> {
    if rir.is_empty() {
        return invalid("impulse response is empty");
    }
    if speech.n_channels() != 1 {
        return invalid(format!("early target expects mono speech, got {} channels", speech.n_channels()));
    }
    let start = rir.direct_path_index[0];
    let end = (start + (window * rir.sample_rate as f64).round() as usize).min(rir.len());
    let mut kernel = vec![0.0; end];
    kernel[start..end].copy_from_slice(&rir.taps[0][start..end]);
    let out = fft_convolve(&speech.channels[0], &kernel, speech.len());
    Waveform::mono(speech.sample_rate, out)
}

/// Result of [`mix_at_snr`].
#[derive(Debug, Clone, PartialEq)]
pub struct MixResult {
    pub mixture: Waveform,
    /// Gain applied to the noise before summation.
    pub noise_gain: f64,
    /// Peak normalization applied after summation; apply it to any target too.
    pub scale: f64,
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Adds `noise_img` to `speech_img` at `snr_db`, measured on the first
/// channel. The same gain scales both noise channels.
pub fn mix_at_snr(speech_img: &Waveform, noise_img: &Waveform, snr_db: f64) -> Result<MixResult> {
    if speech_img.n_channels() != 2 || noise_img.n_channels() != 2 {
        return invalid("mixing expects two-channel speech and noise images");
    }
    if speech_img.len() != noise_img.len() {
        return invalid(format!("speech has {} samples, noise has {}", speech_img.len(), noise_img.len()));
    }
    if !snr_db.is_finite() {
        return invalid(format!("SNR {snr_db} dB is not finite"));
    }
    let es = energy(&speech_img.channels[0]);
    let en = energy(&noise_img.channels[0]);
    if es <= 0.0 {
        return invalid("speech image has zero energy on the reference channel");
    }
    if en <= 0.0 {
        return invalid("noise image has zero energy on the reference channel");
    }
    let g = (es / (en * 10f64.powf(snr_db / 10.0))).sqrt();
    let mut channels: Vec<Vec<f64>> = speech_img
        .channels
        .iter()
        .zip(&noise_img.channels)
        .map(|(s, n)| s.iter().zip(n).map(|(a, b)| a + g * b).collect())
        .collect();
    let peak = channels.iter().flatten().fold(0.0f64, |a, &v| a.max(v.abs()));
    let scale = if peak > 1.0 { PEAK_TARGET / peak } else { 1.0 };
    if scale != 1.0 {
        channels.iter_mut().flatten().for_each(|v| *v *= scale);
    }
    Ok(MixResult { mixture: Waveform::new(speech_img.sample_rate, channels)?, noise_gain: g, scale })
}

/// Everything produced when a scene is rendered with concrete signals.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    pub mixture: Waveform,
    /// Early-reflection target, already multiplied by the mixture's scale.
    pub target: Waveform,
    pub speech_rir: Rir,
    pub noise_rir: Rir,
    pub noise_gain: f64,
    pub scale: f64,
    /// SNR recomputed on the first channel of the final mixture components.
    pub measured_snr_db: f64,
}

/// Renders `scene` with mono `speech` and `noise`. The noise is looped or
/// cut to the speech length.
pub fn render_scene(scene: &SceneSpec, speech: &[f64], noise: &[f64], max_order: Option<usize>) -> Result<RenderedScene> {
    if speech.is_empty() || noise.is_empty() {
        return invalid("speech and noise must be non-empty");
    }
    let fs = scene.sample_rate;
    let n = speech.len();
    let noise: Vec<f64> = noise.iter().copied().cycle().take(n).collect();
    let speech_rir = image_rir(scene, max_order)?;
    let noise_rir = noise_rir(scene, max_order)?;
    let image = |x: &[f64], r: &Rir| -> Result<Waveform> {
        Waveform::new(fs, r.taps.iter().map(|h| fft_convolve(x, h, n)).collect())
    };
    let speech_img = image(speech, &speech_rir)?;
    let noise_img = image(&noise, &noise_rir)?;
    let mix = mix_at_snr(&speech_img, &noise_img, scene.snr_db)?;
    let mut target = early_target(&Waveform::mono(fs, speech.to_vec())?, &speech_rir, EARLY_WINDOW_SECS)?;
    target.channels[0].iter_mut().for_each(|v| *v *= mix.scale);
    let es = energy(&speech_img.channels[0]) * mix.scale * mix.scale;
    let en = energy(&noise_img.channels[0]) * (mix.noise_gain * mix.scale).powi(2);
    Ok(RenderedScene {
        mixture: mix.mixture,
        target,
        speech_rir,
        noise_rir,
        noise_gain: mix.noise_gain,
        scale: mix.scale,
        measured_snr_db: 10.0 * (es / en).log10(),
    })
}
