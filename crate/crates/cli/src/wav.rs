//! WAV file input and output.
//!
//! Reads 16-bit PCM or 32-bit float files. Writes 16-bit PCM by truncation
//! (no dither) or 32-bit float.

use std::path::Path;

use dcse::dsp::Waveform;
use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{CliError, CliResult};

pub fn read_wav(path: &Path) -> CliResult<Waveform> {
    let reader = WavReader::open(path).map_err(|e| CliError::io(path, e))?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::io(path, e))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::io(path, e))?,
        (fmt, bits) => {
            return Err(CliError::Validation(format!(
                "{}: unsupported sample format {fmt:?} with {bits} bits (need 16-bit PCM or 32-bit float)",
                path.display()
            )))
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch.max(1)); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, &v) in frame.iter().enumerate() {
            channels[c].push(v);
        }
    }
    Waveform::new(spec.sample_rate, channels).map_err(|e| CliError::from(e).context(path))
}

/// Float to 16-bit by truncation toward zero.
pub fn to_i16(v: f64) -> i16 {
    (v * 32768.0).trunc().clamp(-32768.0, 32767.0) as i16
}

pub fn write_wav(path: &Path, wave: &Waveform) -> CliResult<()> {
    write(path, wave, SampleFormat::Int)
}

pub fn write_wav_float(path: &Path, wave: &Waveform) -> CliResult<()> {
    write(path, wave, SampleFormat::Float)
}

fn write(path: &Path, wave: &Waveform, format: SampleFormat) -> CliResult<()> {
    let spec = WavSpec {
        channels: wave.n_channels() as u16,
        sample_rate: wave.sample_rate,
        bits_per_sample: if format == SampleFormat::Int { 16 } else { 32 },
        sample_format: format,
    };
    let err = |e: hound::Error| CliError::io(path, e);
    let mut w = WavWriter::create(path, spec).map_err(err)?;
    for i in 0..wave.len() {
        for ch in &wave.channels {
            match format {
                SampleFormat::Int => w.write_sample(to_i16(ch[i])).map_err(err)?,
                SampleFormat::Float => w.write_sample(ch[i] as f32).map_err(err)?,
            }
        }
    }
    w.finalize().map_err(err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation() {
        assert_eq!(to_i16(0.0), 0);
        assert_eq!(to_i16(1.0), 32767);
        assert_eq!(to_i16(-1.0), -32768);
        assert_eq!(to_i16(0.99999 / 32768.0 * 3.0), 2);
        assert_eq!(to_i16(-2.7 / 32768.0), -2);
    }

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let w = Waveform::new(16_000, vec![vec![0.5, -0.25, 0.0], vec![0.125, 1.5, -2.0]]).unwrap();
        let p = dir.path().join("a.wav");
        write_wav_float(&p, &w).unwrap();
        assert_eq!(read_wav(&p).unwrap(), w);
        write_wav(&p, &w).unwrap();
        let back = read_wav(&p).unwrap();
        assert_eq!(back.channels[0], vec![0.5, -0.25, 0.0]);
        assert_eq!(back.channels[1], vec![0.125, 32767.0 / 32768.0, -1.0]);
        assert!(read_wav(&dir.path().join("missing.wav")).is_err());
    }
}
