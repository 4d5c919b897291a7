//! Training-objective components, usable as evaluation metrics.
//!
//! All arithmetic is f64. Spectral terms compare spectrograms of identical
//! shape cell by cell with magnitudes compressed by `|S|^c`.

use crate::dsp::ComplexSpectrogram;
use crate::{invalid, Complex64, Result};

/// Magnitude floor applied before fractional powers.
pub const MAG_FLOOR: f64 = 1e-12;
/// Bound on the returned SI-SNR loss, in dB.
pub const SISNR_CAP_DB: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub compression: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 0.01, beta: 0.3, compression: 0.3 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !(0.0..=1.0).contains(&self.beta) || !(self.compression > 0.0 && self.compression <= 1.0) {
            return invalid(format!("invalid loss weights {self:?}"));
        }
        Ok(())
    }
}

/// Negative scale-invariant SNR in dB, clamped to `±SISNR_CAP_DB`.
///
/// A zero residual gives `-SISNR_CAP_DB`; an all-zero estimate gives `+SISNR_CAP_DB`.
pub fn sisnr_loss(est: &[f64], reference: &[f64]) -> Result<f64> {
    if est.len() != reference.len() {
        return invalid(format!("length mismatch: {} vs {}", est.len(), reference.len()));
    }
    let ref_energy: f64 = reference.iter().map(|v| v * v).sum();
    if !(ref_energy > 0.0) {
        return invalid("SI-SNR reference is all zero");
    }
    let dot: f64 = est.iter().zip(reference).map(|(e, r)| e * r).sum();
    let scale = dot / ref_energy;
    let (mut target, mut residual) = (0.0, 0.0);
    for (e, r) in est.iter().zip(reference) {
        let t = scale * r;
        target += t * t;
        residual += (e - t) * (e - t);
    }
    let loss = if residual == 0.0 {
        if target == 0.0 { SISNR_CAP_DB } else { -SISNR_CAP_DB }
    } else {
        -10.0 * (target / residual).log10()
    };
    Ok(loss.clamp(-SISNR_CAP_DB, SISNR_CAP_DB))
}

/// SI-SNR in dB (the negated loss).
pub fn si_snr(est: &[f64], reference: &[f64]) -> Result<f64> {
    sisnr_loss(est, reference).map(|l| -l)
}

fn check_shapes(est: &ComplexSpectrogram, target: &ComplexSpectrogram) -> Result<()> {
    if est.shape() != target.shape() {
        return invalid(format!("spectrogram shapes differ: {:?} vs {:?}", est.shape(), target.shape()));
    }
    if est.data().is_empty() {
        return invalid("empty spectrogram");
    }
    Ok(())
}

fn cell_mse(est: &ComplexSpectrogram, target: &ComplexSpectrogram, f: impl Fn(Complex64) -> f64) -> Result<f64> {
    check_shapes(est, target)?;
    let sum: f64 = est.data().iter().zip(target.data()).map(|(a, b)| (f(*a) - f(*b)).powi(2)).sum();
    Ok(sum / est.data().len() as f64)
}

/// MSE of compressed magnitudes `|S|^c`.
pub fn mag_loss(est: &ComplexSpectrogram, target: &ComplexSpectrogram, compression: f64) -> Result<f64> {
    cell_mse(est, target, |s| s.norm().max(MAG_FLOOR).powf(compression))
}

/// MSE of `Re S / |S|^(1-c)`.
pub fn real_loss(est: &ComplexSpectrogram, target: &ComplexSpectrogram, compression: f64) -> Result<f64> {
    cell_mse(est, target, |s| s.re / s.norm().max(MAG_FLOOR).powf(1.0 - compression))
}

/// MSE of `Im S / |S|^(1-c)`.
pub fn imag_loss(est: &ComplexSpectrogram, target: &ComplexSpectrogram, compression: f64) -> Result<f64> {
    cell_mse(est, target, |s| s.im / s.norm().max(MAG_FLOOR).powf(1.0 - compression))
}

/// `α·sisnr + (1−β)·mag + β·(real + imag)`.
pub fn hybrid_loss(
    est_wave: &[f64],
    ref_wave: &[f64],
    est_spec: &ComplexSpectrogram,
    ref_spec: &ComplexSpectrogram,
    w: &LossWeights,
) -> Result<f64> {
    w.validate()?;
    let sisnr = sisnr_loss(est_wave, ref_wave)?;
    let mag = mag_loss(est_spec, ref_spec, w.compression)?;
    let re = real_loss(est_spec, ref_spec, w.compression)?;
    let im = imag_loss(est_spec, ref_spec, w.compression)?;
    Ok(w.alpha * sisnr + (1.0 - w.beta) * mag + w.beta * (re + im))
}
