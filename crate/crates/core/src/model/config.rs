use std::fmt;
use std::str::FromStr;

use crate::{invalid, Error, Result};

/// Representation of the IVA output fed to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    /// Real and imaginary planes.
    Complex,
    /// Log power spectrum.
    Lps,
}

/// Which IVA outputs become feature planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IvaChannels {
    Speech,
    SpeechAndNoise,
}

impl IvaChannels {
    pub fn count(self) -> usize {
        match self {
            IvaChannels::Speech => 1,
            IvaChannels::SpeechAndNoise => 2,
        }
    }
}

/// Target the complex ratio mask multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Masking {
    /// IVA speech output.
    Iva,
    /// Noisy microphone 1.
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderKind {
    Single,
    /// Separate encoders for noisy and IVA planes, fused by a pointwise conv.
    Dual,
}

/// Architecture hyperparameters. The presets fix everything but the four
/// ablation switches.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub feature: FeatureKind,
    pub iva_channels: IvaChannels,
    pub masking: Masking,
    pub encoder: EncoderKind,
    pub sfe_kernel: usize,
    /// Latent width of the single encoder, G-DPRNN and decoder.
    pub gtconv_channels: usize,
    /// Per-encoder width when `encoder` is dual.
    pub dual_channels: usize,
    /// Width of the GT-Conv transformed branch.
    pub gtconv_hidden: usize,
    pub gtconv_kernel: (usize, usize),
    pub gtconv_dilations: Vec<usize>,
    /// Number of strided conv stages (and mirrored transposed convs).
    pub conv_blocks: usize,
    pub conv_kernel: (usize, usize),
    pub conv_stride: (usize, usize),
    pub conv2_groups: usize,
    pub dprnn_groups: usize,
    pub dprnn_blocks: usize,
}

pub const PRESET_NAMES: [&str; 7] = ["id1", "id2", "id3", "id4", "id5", "id6", "id7"];

impl ModelConfig {
    pub fn new(feature: FeatureKind, iva_channels: IvaChannels, masking: Masking, encoder: EncoderKind) -> Self {
        Self {
            feature,
            iva_channels,
            masking,
            encoder,
            sfe_kernel: 3,
            gtconv_channels: 16,
            dual_channels: 12,
            gtconv_hidden: 16,
            gtconv_kernel: (3, 3),
            gtconv_dilations: vec![1, 2, 5],
            conv_blocks: 2,
            conv_kernel: (1, 5),
            conv_stride: (1, 2),
            conv2_groups: 2,
            dprnn_groups: 2,
            dprnn_blocks: 2,
        }
    }

    /// Ablation presets `id1` … `id7`.
    pub fn preset(name: &str) -> Result<Self> {
        use EncoderKind::*;
        use FeatureKind::*;
        use IvaChannels::*;
        use Masking::*;
        let (f, c, m, e) = match name.to_ascii_lowercase().as_str() {
            "id1" => (Complex, Speech, Iva, Single),
            "id2" => (Complex, Speech, Noisy, Single),
            "id3" => (Lps, Speech, Iva, Single),
            "id4" => (Lps, SpeechAndNoise, Iva, Single),
            "id5" => (Lps, Speech, Noisy, Single),
            "id6" => (Lps, SpeechAndNoise, Noisy, Single),
            "id7" => (Lps, SpeechAndNoise, Noisy, Dual),
            other => return invalid(format!("unknown preset {other:?}; expected one of {PRESET_NAMES:?}")),
        };
        Ok(Self::new(f, c, m, e))
    }

    /// Name of the preset this config equals, if any.
    pub fn preset_name(&self) -> Option<&'static str> {
        PRESET_NAMES.iter().copied().find(|n| Self::preset(n).is_ok_and(|p| &p == self))
    }

    /// Feature planes before sub-band extraction.
    pub fn noisy_planes(&self) -> usize {
        4
    }

    pub fn iva_planes(&self) -> usize {
        let per = match self.feature {
            FeatureKind::Complex => 2,
            FeatureKind::Lps => 1,
        };
        per * self.iva_channels.count()
    }

    pub fn feature_planes(&self) -> usize {
        self.noisy_planes() + self.iva_planes()
    }

    /// Band count after each strided conv stage, starting from the merged bands.
    pub fn band_trace(&self, bands: usize) -> Vec<usize> {
        let pad = (self.conv_kernel.1 - 1) / 2;
        let mut trace = vec![bands];
        for _ in 0..self.conv_blocks {
            let f = *trace.last().unwrap();
            trace.push((f + 2 * pad - self.conv_kernel.1) / self.conv_stride.1 + 1);
        }
        trace
    }

    /// Checks the structural constraints the forward pass relies on.
    pub fn validate(&self) -> Result<()> {
        let param = |m: String| Err(Error::Parameter(m));
        if self.sfe_kernel % 2 == 0 {
            return param(format!("sfe_kernel must be odd, got {}", self.sfe_kernel));
        }
        if self.conv_blocks == 0 {
            return param("at least one conv stage is required to produce a mask".into());
        }
        if self.conv_kernel.0 != 1 || self.conv_stride.0 != 1 {
            return param("conv stages must not span or stride time".into());
        }
        if self.conv_kernel.1 % 2 == 0 || self.conv_stride.1 == 0 {
            return param("conv kernel width must be odd and stride positive".into());
        }
        if self.gtconv_kernel.1 % 2 == 0 {
            return param("GT-Conv frequency kernel must be odd".into());
        }
        if self.gtconv_dilations.contains(&0) {
            return param("dilations must be positive".into());
        }
        let widths: &[usize] = match self.encoder {
            EncoderKind::Single => &[self.gtconv_channels],
            EncoderKind::Dual => &[self.gtconv_channels, self.dual_channels],
        };
        for &w in widths {
            if w == 0 || w % 2 != 0 || w % self.conv2_groups != 0 || w % self.dprnn_groups != 0 {
                return param(format!("width {w} must be even and divisible by the group counts"));
            }
        }
        if self.gtconv_hidden == 0 {
            return param("GT-Conv hidden width must be positive".into());
        }
        Ok(())
    }

    /// Compact code stored alongside saved weights.
    pub fn code(&self) -> [u8; 4] {
        [
            match self.feature {
                FeatureKind::Complex => 0,
                FeatureKind::Lps => 1,
            },
            match self.iva_channels {
                IvaChannels::Speech => 0,
                IvaChannels::SpeechAndNoise => 1,
            },
            match self.masking {
                Masking::Iva => 0,
                Masking::Noisy => 1,
            },
            match self.encoder {
                EncoderKind::Single => 0,
                EncoderKind::Dual => 1,
            },
        ]
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let feature = match self.feature {
            FeatureKind::Complex => "complex",
            FeatureKind::Lps => "lps",
        };
        let iva = match self.iva_channels {
            IvaChannels::Speech => "s",
            IvaChannels::SpeechAndNoise => "s&n",
        };
        let mask = match self.masking {
            Masking::Iva => "mask1",
            Masking::Noisy => "mask2",
        };
        let enc = match self.encoder {
            EncoderKind::Single => "single",
            EncoderKind::Dual => "dual",
        };
        write!(f, "{feature}/{iva}/{mask}/{enc}")?;
        if let Some(name) = self.preset_name() {
            write!(f, " ({name})")?;
        }
        Ok(())
    }
}

impl FromStr for ModelConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::preset(s)
    }
}
