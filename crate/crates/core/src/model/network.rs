use super::blocks::{conv_params, run_frames, ConvStage, DeconvStage, DprnnBlock, DprnnState, GtConv, GtState};
use super::config::{EncoderKind, ModelConfig};
use super::features::{frame_planes, merge_frame, sfe_frame};
use super::params::{Loader, ParamSource, Recorder};
use super::weights::ModelWeights;
use super::ComplexRatioMask;
use crate::bands::{make_erb_filterbank, ErbFilterbank};
use crate::dsp::ComplexSpectrogram;
use crate::nn::{conv2d, ConvOptions, ConvParams, Tensor4};
use crate::{invalid, Complex64, Error, Result};

/// Strided conv stages followed by GT-Conv blocks.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub convs: Vec<ConvStage>,
    pub blocks: Vec<GtConv>,
    pub channels_in: usize,
    pub bands_in: usize,
    pub bands: usize,
}

impl Encoder {
    fn build(src: &mut dyn ParamSource, name: &str, c_in: usize, width: usize, cfg: &ModelConfig, trace: &[usize]) -> Result<Self> {
        let mut convs = Vec::new();
        let mut c = c_in;
        for (i, &bands_out) in trace.iter().skip(1).enumerate() {
            let groups = if i == 0 { 1 } else { cfg.conv2_groups };
            convs.push(ConvStage::build(src, &format!("{name}.conv{}", i + 1), c, width, groups, cfg.conv_kernel, cfg.conv_stride, bands_out)?);
            c = width;
        }
        let bands = *trace.last().unwrap();
        let blocks = cfg
            .gtconv_dilations
            .iter()
            .enumerate()
            .map(|(i, &d)| GtConv::build(src, &format!("{name}.gt{i}"), c, cfg.gtconv_hidden, cfg.gtconv_kernel, d, bands))
            .collect::<Result<_>>()?;
        Ok(Self { convs, blocks, channels_in: c_in, bands_in: trace[0], bands })
    }

    fn state(&self) -> Vec<GtState> {
        self.blocks.iter().map(|b| b.state(self.bands)).collect()
    }

    fn step(&self, x: &Tensor4, st: &mut [GtState]) -> Result<Tensor4> {
        if x.channels() != self.channels_in || x.freq() != self.bands_in {
            return invalid(format!(
                "encoder expects {} channels x {} bands, got {:?}",
                self.channels_in,
                self.bands_in,
                x.shape()
            ));
        }
        let mut h = x.clone();
        for conv in &self.convs {
            h = conv.step(&h)?;
        }
        for (b, s) in self.blocks.iter().zip(st) {
            h = b.step(&h, s)?;
        }
        Ok(h)
    }
}

/// Causal state of every block, for frame-by-frame inference.
#[derive(Debug, Clone)]
pub struct StreamState {
    encoders: Vec<Vec<GtState>>,
    dprnn: Vec<DprnnState>,
    decoder: Vec<GtState>,
    frames: usize,
}

impl StreamState {
    pub fn frames_processed(&self) -> usize {
        self.frames
    }
}

/// Latent activations of one frame, exposed for inspection and tests.
#[derive(Debug, Clone)]
pub struct FrameTrace {
    pub encoded: Tensor4,
    pub dprnn: Tensor4,
    pub decoded: Tensor4,
}

/// The enhancement network with its weights bound.
#[derive(Debug, Clone)]
pub struct Network {
    cfg: ModelConfig,
    fb: ErbFilterbank,
    encoders: Vec<Encoder>,
    fuse: Option<ConvParams>,
    dprnn: Vec<DprnnBlock>,
    decoder: Vec<GtConv>,
    deconvs: Vec<DeconvStage>,
}

impl Network {
    /// Pulls every tensor of `cfg`'s architecture from `src`, in a fixed order.
    pub fn build(cfg: &ModelConfig, src: &mut dyn ParamSource) -> Result<Self> {
        let fb = make_erb_filterbank();
        let trace = cfg.band_trace(fb.n_bands());
        if cfg.conv_blocks == 0 && (!cfg.gtconv_dilations.is_empty() || cfg.dprnn_blocks > 0) {
            return Err(Error::Parameter("GT-Conv and G-DPRNN blocks need at least one conv stage".into()));
        }
        let k = cfg.sfe_kernel;
        let (encoders, fuse) = match cfg.encoder {
            EncoderKind::Single => {
                (vec![Encoder::build(src, "enc", k * cfg.feature_planes(), cfg.gtconv_channels, cfg, &trace)?], None)
            }
            EncoderKind::Dual => {
                let w = cfg.dual_channels;
                let noisy = Encoder::build(src, "enc_noisy", k * cfg.noisy_planes(), w, cfg, &trace)?;
                let iva = Encoder::build(src, "enc_iva", k * cfg.iva_planes(), w, cfg, &trace)?;
                let fuse = conv_params(src, "fuse", cfg.gtconv_channels, 2 * w, (1, 1))?;
                src.macs("fuse", (fuse.weight.len() * noisy.bands) as u64);
                (vec![noisy, iva], Some(fuse))
            }
        };
        let bands = *trace.last().unwrap();
        let width = cfg.gtconv_channels;
        let dprnn = (0..cfg.dprnn_blocks)
            .map(|i| DprnnBlock::build(src, &format!("dprnn{i}"), width, cfg.dprnn_groups, bands))
            .collect::<Result<_>>()?;
        let decoder = cfg
            .gtconv_dilations
            .iter()
            .rev()
            .enumerate()
            .map(|(i, &d)| GtConv::build(src, &format!("dec.gt{i}"), width, cfg.gtconv_hidden, cfg.gtconv_kernel, d, bands))
            .collect::<Result<_>>()?;
        let mut deconvs = Vec::new();
        for i in 0..cfg.conv_blocks {
            let head = i + 1 == cfg.conv_blocks;
            let (c_out, groups) = if head { (2, 1) } else { (width, cfg.conv2_groups) };
            let (b_in, b_out) = (trace[cfg.conv_blocks - i], trace[cfg.conv_blocks - i - 1]);
            deconvs.push(DeconvStage::build(
                src,
                &format!("dec.deconv{}", i + 1),
                width,
                c_out,
                groups,
                cfg.conv_kernel,
                cfg.conv_stride,
                b_in,
                b_out,
                head,
            )?);
        }
        Ok(Self { cfg: cfg.clone(), fb, encoders, fuse, dprnn, decoder, deconvs })
    }

    /// Binds loaded weights, rejecting missing, extra or mis-shaped tensors
    /// and weights recorded for another configuration.
    pub fn new(cfg: &ModelConfig, weights: &ModelWeights) -> Result<Self> {
        cfg.validate()?;
        weights.check_config(cfg)?;
        let mut loader = Loader::new(weights);
        let net = Self::build(cfg, &mut loader)?;
        loader.finish()?;
        Ok(net)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &ErbFilterbank {
        &self.fb
    }

    pub fn encoders(&self) -> &[Encoder] {
        &self.encoders
    }

    pub fn dprnn_blocks(&self) -> &[DprnnBlock] {
        &self.dprnn
    }

    pub fn decoder_blocks(&self) -> &[GtConv] {
        &self.decoder
    }

    pub fn stream(&self) -> StreamState {
        StreamState {
            encoders: self.encoders.iter().map(Encoder::state).collect(),
            dprnn: self.dprnn.iter().map(DprnnBlock::state).collect(),
            decoder: self.decoder.iter().map(|b| b.state(self.latent_bands())).collect(),
            frames: 0,
        }
    }

    fn latent_bands(&self) -> usize {
        self.encoders[0].bands
    }

    /// Merged, sub-band-stacked input of one frame as encoder input tensors.
    fn encoder_inputs(&self, y: [&[Complex64]; 2], iva: [&[Complex64]; 2]) -> Result<Vec<Tensor4>> {
        let (bins, bands, k) = (self.fb.n_bins(), self.fb.n_bands(), self.cfg.sfe_kernel);
        if y.iter().chain(&iva).any(|ch| ch.len() != bins) {
            return invalid(format!("network expects {bins}-bin frames"));
        }
        let planes = self.cfg.feature_planes();
        let mut full = vec![0.0; planes * bins];
        frame_planes(y, iva, &self.cfg, &mut full);
        let mut merged = vec![0.0; planes * bands];
        merge_frame(&full, &self.fb, &mut merged);
        let stack = |rows: &[f32]| -> Result<Tensor4> {
            let c = rows.len() / bands;
            let mut out = vec![0.0; c * k * bands];
            sfe_frame(rows, bands, k, &mut out);
            Tensor4::from_vec([1, c * k, 1, bands], out)
        };
        match self.cfg.encoder {
            EncoderKind::Single => Ok(vec![stack(&merged)?]),
            EncoderKind::Dual => {
                let split = self.cfg.noisy_planes() * bands;
                Ok(vec![stack(&merged[..split])?, stack(&merged[split..])?])
            }
        }
    }

    /// Runs one frame; returns the 129-band CRM (`[2][bands]`) and latents.
    pub fn step_trace(&self, st: &mut StreamState, y: [&[Complex64]; 2], iva: [&[Complex64]; 2]) -> Result<(Tensor4, FrameTrace)> {
        let inputs = self.encoder_inputs(y, iva)?;
        let mut outs = Vec::with_capacity(inputs.len());
        for ((enc, s), x) in self.encoders.iter().zip(&mut st.encoders).zip(&inputs) {
            outs.push(enc.step(x, s)?);
        }
        let encoded = match &self.fuse {
            None => outs.pop().unwrap(),
            Some(fuse) => conv2d(&Tensor4::concat_channels(&[&outs[0], &outs[1]])?, fuse, ConvOptions::default())?,
        };
        let mut h = encoded.clone();
        for (b, s) in self.dprnn.iter().zip(&mut st.dprnn) {
            h = b.step(&h, s)?;
        }
        let dprnn = h.clone();
        let mut h = h.add(&encoded)?;
        for (b, s) in self.decoder.iter().zip(&mut st.decoder) {
            h = b.step(&h, s)?;
        }
        let decoded = h.clone();
        for d in &self.deconvs {
            h = d.step(&h)?;
        }
        st.frames += 1;
        Ok((h, FrameTrace { encoded, dprnn, decoded }))
    }

    /// Runs one frame and writes the 257-bin mask planes.
    pub fn step(&self, st: &mut StreamState, y: [&[Complex64]; 2], iva: [&[Complex64]; 2], re: &mut [f32], im: &mut [f32]) -> Result<()> {
        let (crm, _) = self.step_trace(st, y, iva)?;
        self.fb.split_row(crm.plane(0, 0), re);
        self.fb.split_row(crm.plane(0, 1), im);
        Ok(())
    }

    /// Whole-utterance mask estimation; identical to stepping every frame.
    pub fn forward(&self, y: &ComplexSpectrogram, y_iva: &ComplexSpectrogram) -> Result<ComplexRatioMask> {
        if y.channels() != 2 || y.shape() != y_iva.shape() {
            return invalid(format!("expected two matching 2-channel spectrograms, got {:?} and {:?}", y.shape(), y_iva.shape()));
        }
        let (_, frames, bins) = y.shape();
        let mut mask = ComplexRatioMask::zeros(frames, bins);
        let mut st = self.stream();
        for l in 0..frames {
            let (re, im) = mask.frame_mut(l);
            self.step(&mut st, [y.frame(0, l), y.frame(1, l)], [y_iva.frame(0, l), y_iva.frame(1, l)], re, im)?;
        }
        Ok(mask)
    }

    /// Batch encoder over a `[1, C, T, 129]` sub-band feature tensor
    /// (single-encoder configurations).
    pub fn encode(&self, x: &Tensor4) -> Result<Tensor4> {
        if self.encoders.len() != 1 {
            return invalid("encode() takes a single input; use forward() for the dual encoder");
        }
        let mut st = self.encoders[0].state();
        run_frames(x, |f| self.encoders[0].step(f, &mut st))
    }

    /// Batch G-DPRNN over a `[1, C, T, bands]` latent.
    pub fn gdprnn(&self, x: &Tensor4) -> Result<Tensor4> {
        let mut st: Vec<DprnnState> = self.dprnn.iter().map(DprnnBlock::state).collect();
        run_frames(x, |f| {
            let mut h = f.clone();
            for (b, s) in self.dprnn.iter().zip(&mut st) {
                h = b.step(&h, s)?;
            }
            Ok(h)
        })
    }

    /// Batch decoder from latent-plus-skip to the 129-band CRM `[1, 2, T, 129]`.
    pub fn decode(&self, x: &Tensor4) -> Result<Tensor4> {
        let bands = self.latent_bands();
        let mut st: Vec<GtState> = self.decoder.iter().map(|b| b.state(bands)).collect();
        run_frames(x, |f| {
            let mut h = f.clone();
            for (b, s) in self.decoder.iter().zip(&mut st) {
                h = b.step(&h, s)?;
            }
            for d in &self.deconvs {
                h = d.step(&h)?;
            }
            Ok(h)
        })
    }
}

/// Learnable parameters (batch-norm running statistics excluded).
pub fn count_params(cfg: &ModelConfig) -> Result<usize> {
    let mut rec = Recorder::default();
    Network::build(cfg, &mut rec)?;
    Ok(rec.learnable_params())
}

/// Tensor layout and per-layer MACs per frame.
pub fn layout(cfg: &ModelConfig) -> Result<Recorder> {
    let mut rec = Recorder::default();
    Network::build(cfg, &mut rec)?;
    Ok(rec)
}
