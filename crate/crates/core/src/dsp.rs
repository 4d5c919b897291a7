//! Short-time Fourier analysis and synthesis.
//!
//! Frames start at sample 0 and advance by `hop`; samples past the end of the
//! signal are zero. The forward transform is unnormalized and `1/N` is applied
//! on synthesis, so `istft(stft(x))` reproduces `x` everywhere except the
//! first `hop` samples, which are covered by a single frame.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::nn::FeatureTensor;
use crate::{invalid, Complex64, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Floor applied to `|Y|²` before the logarithm in [`log_power`].
pub const LPS_FLOOR: f64 = 1e-12;

/// Multichannel time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

impl Waveform {
    pub fn new(sample_rate: u32, channels: Vec<Vec<f64>>) -> Result<Self> {
        if channels.is_empty() {
            return invalid("waveform has no channels");
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return invalid("waveform channels differ in length");
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("waveform contains non-finite samples");
        }
        Ok(Self { sample_rate, channels })
    }

    pub fn mono(sample_rate: u32, samples: Vec<f64>) -> Result<Self> {
        Self::new(sample_rate, vec![samples])
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }
}

/// Periodic square-root Hann window.
pub fn sqrt_hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| (0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos()).sqrt())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub window: Vec<f64>,
    pub sample_rate: u32,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self::new(512, 256, DEFAULT_SAMPLE_RATE).expect("default STFT geometry is valid")
    }
}

impl StftConfig {
    /// Square-root Hann analysis/synthesis at the given geometry.
    pub fn new(fft_size: usize, hop: usize, sample_rate: u32) -> Result<Self> {
        if !fft_size.is_power_of_two() || fft_size < 2 {
            return invalid(format!("fft_size {fft_size} is not a power of two"));
        }
        if hop == 0 || fft_size % hop != 0 {
            return invalid(format!("hop {hop} does not divide fft_size {fft_size}"));
        }
        if sample_rate == 0 {
            return invalid("sample rate must be positive");
        }
        Ok(Self { fft_size, hop, window: sqrt_hann(fft_size), sample_rate })
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn frames_per_second(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        len.div_ceil(self.hop)
    }

    /// `Σ_m w²(t − m·hop)`, constant in `t` for a COLA window.
    pub fn overlap_gain(&self) -> f64 {
        (0..self.fft_size)
            .step_by(self.hop)
            .map(|t| self.window[t] * self.window[t])
            .sum()
    }

    fn validate(&self) -> Result<()> {
        if self.window.len() != self.fft_size {
            return invalid("window length differs from fft_size");
        }
        Ok(())
    }
}

/// Complex STFT, indexed `[channel][frame][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    channels: usize,
    frames: usize,
    bins: usize,
    data: Vec<Complex64>,
}

impl ComplexSpectrogram {
    pub fn zeros(channels: usize, frames: usize, bins: usize) -> Self {
        Self { channels, frames, bins, data: vec![Complex64::new(0.0, 0.0); channels * frames * bins] }
    }

    pub fn from_vec(channels: usize, frames: usize, bins: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != channels * frames * bins {
            return invalid(format!(
                "spectrogram data length {} does not match {channels}x{frames}x{bins}",
                data.len()
            ));
        }
        Ok(Self { channels, frames, bins, data })
    }

    /// Stacks single-channel spectrograms of identical geometry.
    pub fn stack(parts: &[&ComplexSpectrogram]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return invalid("nothing to stack");
        };
        let mut data = Vec::new();
        let mut channels = 0;
        for p in parts {
            if p.frames != first.frames || p.bins != first.bins {
                return invalid("stacked spectrograms differ in shape");
            }
            data.extend_from_slice(&p.data);
            channels += p.channels;
        }
        Self::from_vec(channels, first.frames, first.bins, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.frames, self.bins)
    }

    #[inline]
    pub fn get(&self, c: usize, l: usize, k: usize) -> Complex64 {
        self.data[(c * self.frames + l) * self.bins + k]
    }

    #[inline]
    pub fn set(&mut self, c: usize, l: usize, k: usize, v: Complex64) {
        self.data[(c * self.frames + l) * self.bins + k] = v;
    }

    pub fn frame(&self, c: usize, l: usize) -> &[Complex64] {
        let start = (c * self.frames + l) * self.bins;
        &self.data[start..start + self.bins]
    }

    pub fn frame_mut(&mut self, c: usize, l: usize) -> &mut [Complex64] {
        let start = (c * self.frames + l) * self.bins;
        &mut self.data[start..start + self.bins]
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let n = self.frames * self.bins;
        &self.data[c * n..(c + 1) * n]
    }

    /// Copy of a single channel.
    pub fn select(&self, c: usize) -> ComplexSpectrogram {
        Self { channels: 1, frames: self.frames, bins: self.bins, data: self.channel(c).to_vec() }
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn is_all_zero(&self) -> bool {
        self.data.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }
}

/// Analysis of every channel of `wave`.
pub fn stft(wave: &Waveform, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    if wave.sample_rate != cfg.sample_rate {
        return invalid(format!(
            "sample rate {} does not match STFT config {}",
            wave.sample_rate, cfg.sample_rate
        ));
    }
    if wave.is_empty() {
        return invalid("empty waveform");
    }
    let n = cfg.fft_size;
    let bins = cfg.n_bins();
    let frames = cfg.n_frames(wave.len());
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut out = ComplexSpectrogram::zeros(wave.n_channels(), frames, bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (c, samples) in wave.channels.iter().enumerate() {
        for l in 0..frames {
            let start = l * cfg.hop;
            for (i, b) in buf.iter_mut().enumerate() {
                let x = samples.get(start + i).copied().unwrap_or(0.0);
                *b = Complex64::new(x * cfg.window[i], 0.0);
            }
            fft.process(&mut buf);
            out.frame_mut(c, l).copy_from_slice(&buf[..bins]);
        }
    }
    Ok(out)
}

/// Weighted overlap-add synthesis, trimmed or zero-extended to `length` samples.
pub fn istft(spec: &ComplexSpectrogram, cfg: &StftConfig, length: usize) -> Result<Waveform> {
    cfg.validate()?;
    if spec.bins() != cfg.n_bins() {
        return invalid(format!(
            "spectrogram has {} bins, STFT config expects {}",
            spec.bins(),
            cfg.n_bins()
        ));
    }
    let n = cfg.fft_size;
    let half = n / 2;
    let scale = 1.0 / (n as f64 * cfg.overlap_gain());
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut channels = Vec::with_capacity(spec.channels());
    for c in 0..spec.channels() {
        let mut out = vec![0.0; length];
        for l in 0..spec.frames() {
            let frame = spec.frame(c, l);
            // Rebuild the Hermitian full spectrum; DC and Nyquist must be real.
            buf[0] = Complex64::new(frame[0].re, 0.0);
            buf[half] = Complex64::new(frame[half].re, 0.0);
            for k in 1..half {
                buf[k] = frame[k];
                buf[n - k] = frame[k].conj();
            }
            ifft.process(&mut buf);
            let start = l * cfg.hop;
            for (i, b) in buf.iter().enumerate() {
                let Some(o) = out.get_mut(start + i) else { break };
                *o += b.re * cfg.window[i] * scale;
            }
        }
        channels.push(out);
    }
    Waveform::new(cfg.sample_rate, channels)
}

/// `ln(max(|Y|², floor))` per channel, frame and bin.
pub fn log_power(spec: &ComplexSpectrogram, floor: f64) -> Result<FeatureTensor> {
    if !(floor > 0.0) {
        return invalid(format!("log-power floor must be positive, got {floor}"));
    }
    let (c, t, f) = spec.shape();
    let data = spec.data().iter().map(|v| v.norm_sqr().max(floor).ln() as f32).collect();
    FeatureTensor::from_vec(c, t, f, data)
}
