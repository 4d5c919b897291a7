//! End-to-end enhancement and separation of two-microphone recordings.

use crate::auxiva::{auxiva_separate, IvaConfig};
use crate::dsp::{istft, stft, ComplexSpectrogram, StftConfig, Waveform};
use crate::model::{apply_mask, ModelConfig, ModelWeights, Network};
use crate::{invalid, Error, Result};

fn check_stereo(wave: &Waveform, stft_cfg: &StftConfig) -> Result<()> {
    if wave.n_channels() != 2 {
        return invalid(format!("expected a 2-channel recording, got {} channel(s)", wave.n_channels()));
    }
    if wave.sample_rate != stft_cfg.sample_rate {
        return invalid(format!("expected {} Hz audio, got {} Hz", stft_cfg.sample_rate, wave.sample_rate));
    }
    if wave.is_empty() {
        return invalid("recording is empty");
    }
    Ok(())
}

/// Runs IVA, falling back to `y` itself when the input carries no usable
/// spatial information.
fn coarse_estimate(y: &ComplexSpectrogram, iva: Option<&IvaConfig>) -> Result<(ComplexSpectrogram, bool)> {
    let Some(cfg) = iva else {
        return Ok((y.clone(), false));
    };
    if y.frames() < 2 {
        log::warn!("input shorter than two frames, skipping IVA");
        return Ok((y.clone(), true));
    }
    match auxiva_separate(y, cfg) {
        Ok((sep, _)) => Ok((sep, false)),
        Err(Error::DegenerateInput(msg)) => {
            log::warn!("skipping IVA: {msg}");
            Ok((y.clone(), true))
        }
        Err(e) => Err(e),
    }
}

/// Output of [`Enhancer::enhance`].
#[derive(Debug, Clone, PartialEq)]
pub struct Enhanced {
    pub speech: Waveform,
    /// IVA was requested but skipped because the input was degenerate.
    pub iva_bypassed: bool,
}

/// A loaded network plus the signal-processing settings around it.
pub struct Enhancer {
    network: Network,
    stft: StftConfig,
    iva: Option<IvaConfig>,
}

impl Enhancer {
    /// `iva = None` feeds the noisy spectrogram in place of the IVA estimates.
    pub fn new(cfg: &ModelConfig, weights: &ModelWeights, iva: Option<IvaConfig>) -> Result<Self> {
        Ok(Self { network: Network::new(cfg, weights)?, stft: StftConfig::default(), iva })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn stft_config(&self) -> &StftConfig {
        &self.stft
    }

    /// Mono speech estimate with the same length as the input.
    pub fn enhance(&self, wave: &Waveform) -> Result<Enhanced> {
        check_stereo(wave, &self.stft)?;
        let n = wave.len();
        if wave.channels.iter().flatten().all(|&v| v == 0.0) {
            if self.iva.is_some() {
                log::warn!("input is digital silence, skipping IVA");
            }
            return Ok(Enhanced { speech: Waveform::mono(wave.sample_rate, vec![0.0; n])?, iva_bypassed: self.iva.is_some() });
        }
        let y = stft(wave, &self.stft)?;
        let (y_iva, iva_bypassed) = coarse_estimate(&y, self.iva.as_ref())?;
        let mask = self.network.forward(&y, &y_iva)?;
        let s = apply_mask(&mask, &y, &y_iva, self.network.config().masking)?;
        let speech = istft(&s, &self.stft, n)?;
        if speech.channels[0].iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("enhanced signal is not finite".into()));
        }
        Ok(Enhanced { speech, iva_bypassed })
    }
}

/// IVA-only separation: returns (speech, noise) images at the reference
/// microphone, ordered by envelope kurtosis.
pub fn separate(wave: &Waveform, iva: &IvaConfig) -> Result<Waveform> {
    let stft_cfg = StftConfig::default();
    check_stereo(wave, &stft_cfg)?;
    let y = stft(wave, &stft_cfg)?;
    let (sep, _) = auxiva_separate(&y, iva)?;
    let n = wave.len();
    let speech = istft(&sep.select(0), &stft_cfg, n)?;
    let noise = istft(&sep.select(1), &stft_cfg, n)?;
    Waveform::new(wave.sample_rate, vec![speech.channels[0].clone(), noise.channels[0].clone()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_random;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stereo(n: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..0.3)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..0.3)).collect();
        let mix = |g: f64| a.iter().zip(&b).map(|(x, y)| x + g * y).collect::<Vec<_>>();
        Waveform::new(16_000, vec![mix(0.6), mix(-0.4)]).unwrap()
    }

    fn enhancer(iva: Option<IvaConfig>) -> Enhancer {
        let cfg = ModelConfig::preset("id6").unwrap();
        Enhancer::new(&cfg, &init_random(&cfg, 3).unwrap(), iva).unwrap()
    }

    #[test]
    fn output_shape_and_determinism() {
        let e = enhancer(Some(IvaConfig::default()));
        let x = stereo(4000, 1);
        let a = e.enhance(&x).unwrap();
        assert_eq!(a.speech.len(), 4000);
        assert_eq!(a.speech.n_channels(), 1);
        assert!(!a.iva_bypassed);
        assert!(a.speech.channels[0].iter().all(|v| v.is_finite()));
        assert_eq!(e.enhance(&x).unwrap(), a);
    }

    #[test]
    fn silence_and_short_inputs_bypass() {
        let e = enhancer(Some(IvaConfig::default()));
        let z = Waveform::new(16_000, vec![vec![0.0; 1000]; 2]).unwrap();
        let out = e.enhance(&z).unwrap();
        assert!(out.iva_bypassed && out.speech.channels[0].iter().all(|&v| v == 0.0));
        let short = stereo(100, 2);
        assert!(e.enhance(&short).unwrap().iva_bypassed);
        assert!(!enhancer(None).enhance(&short).unwrap().iva_bypassed);
    }

    #[test]
    fn rejects_bad_layouts() {
        let e = enhancer(None);
        assert!(e.enhance(&Waveform::mono(16_000, vec![0.1; 100]).unwrap()).is_err());
        let mut x = stereo(1000, 3);
        x.sample_rate = 8000;
        assert!(e.enhance(&x).is_err());
        assert!(separate(&Waveform::mono(16_000, vec![0.1; 100]).unwrap(), &IvaConfig::default()).is_err());
    }

    #[test]
    fn separation_outputs_sum_to_reference() {
        let x = stereo(8000, 4);
        let s = separate(&x, &IvaConfig::default()).unwrap();
        let n = x.len();
        // Interior samples only: the edges see a partial window.
        let err: f64 = (512..n - 512).map(|i| (s.channels[0][i] + s.channels[1][i] - x.channels[0][i]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }
}
