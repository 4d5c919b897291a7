//! Shared fixtures: synthetic signals, mixtures and temporary WAV files.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use dcse::dsp::Waveform;
use dcse::simkit::fft_convolve;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const FS: u32 = 16_000;

/// Laplacian samples under a random log-normal envelope that changes every
/// 20 ms. Blind separation relies on this non-stationarity.
pub fn modulated_laplacian(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let block = 320;
    let env_dist = Normal::new(0.0, 1.0).unwrap();
    let gains: Vec<f64> = (0..n / block + 2).map(|_| (env_dist.sample(rng) as f64).exp()).collect();
    (0..n)
        .map(|i| {
            let pos = i as f64 / block as f64;
            let k = pos.floor() as usize;
            let frac = pos - k as f64;
            let g = gains[k] * (1.0 - frac) + gains[k + 1] * frac;
            let u: f64 = rng.random_range(-0.5..0.5);
            -g * u.signum() * (1.0 - 2.0 * u.abs()).max(1e-300).ln()
        })
        .collect()
}

/// Exponentially decaying random response of `len` samples whose energy
/// drops 60 dB over its length, with a unit direct tap at `delay`.
pub fn random_rir(len: usize, delay: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let decay = (1e-3f64).ln() / len as f64;
    let mut h: Vec<f64> = (0..len)
        .map(|i| if i <= delay { 0.0 } else { 0.3 * rng.random_range(-1.0..1.0) * (decay * i as f64).exp() })
        .collect();
    h[delay] = 1.0;
    h
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Two independent sources convolved with random 2×2 responses.
pub struct ConvolutiveMixture {
    pub mixture: Waveform,
    /// Image of source `s` at microphone 1, scaled as in the mixture.
    pub images: [Vec<f64>; 2],
}

/// Source 0 sits `snr_db` below source 1 at microphone 1.
pub fn convolutive_mixture(seed: u64, seconds: f64, rir_secs: f64, snr_db: f64) -> ConvolutiveMixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * FS as f64) as usize;
    let len = (rir_secs * FS as f64) as usize;
    let sources = [modulated_laplacian(n, &mut rng), modulated_laplacian(n, &mut rng)];
    let mut img = [[vec![], vec![]], [vec![], vec![]]];
    for s in 0..2 {
        for m in 0..2 {
            let delay = rng.random_range(0..8);
            img[s][m] = fft_convolve(&sources[s], &random_rir(len, delay, &mut rng), n);
        }
    }
    let g = (energy(&img[0][0]) / (energy(&img[1][0]) * 10f64.powf(snr_db / 10.0))).sqrt();
    for m in 0..2 {
        img[1][m].iter_mut().for_each(|v| *v *= g);
    }
    let peak = (0..2)
        .flat_map(|m| img[0][m].iter().zip(&img[1][m]).map(|(a, b)| (a + b).abs()))
        .fold(0.0f64, f64::max);
    let k = 0.5 / peak;
    let mics: Vec<Vec<f64>> = (0..2).map(|m| img[0][m].iter().zip(&img[1][m]).map(|(a, b)| k * (a + b)).collect()).collect();
    let scaled = |v: &Vec<f64>| v.iter().map(|x| k * x).collect::<Vec<f64>>();
    ConvolutiveMixture { mixture: Waveform::new(FS, mics).unwrap(), images: [scaled(&img[0][0]), scaled(&img[1][0])] }
}

/// Mean SI-SNR improvement over both sources for the better of the two
/// output assignments.
pub fn si_snr_improvement(outputs: &Waveform, mix: &ConvolutiveMixture) -> f64 {
    use dcse::loss::si_snr;
    let base: f64 = (0..2).map(|s| si_snr(&mix.mixture.channels[0], &mix.images[s]).unwrap()).sum::<f64>() / 2.0;
    let score = |p: [usize; 2]| (0..2).map(|s| si_snr(&outputs.channels[p[s]], &mix.images[s]).unwrap()).sum::<f64>() / 2.0;
    score([0, 1]).max(score([1, 0])) - base
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 }
}

pub fn write_float(dir: &Path, name: &str, w: &Waveform) -> PathBuf {
    let p = dir.join(name);
    dcse_cli::write_wav_float(&p, w).unwrap();
    p
}
