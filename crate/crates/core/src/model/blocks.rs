//! Network blocks operating on one frame at a time.
//!
//! A frame is a `[1, channels, 1, bands]` tensor. Blocks with temporal
//! context keep it in an explicit state object, so running frames one by one
//! and running a whole utterance are the same computation.

use std::collections::VecDeque;

use super::params::{fan_in_bound, Kind, ParamSource};
use crate::nn::{
    batch_norm_infer, channel_shuffle, conv2d, conv_transpose2d, gru_sequence, layer_norm, prelu, shuffle_source, tanh_act,
    BatchNorm, ConvOptions, ConvParams, Direction, GruCell, GruParams, Tensor4,
};
use crate::nn::{affine, sigmoid};
use crate::{invalid, Result};

pub const LN_EPS: f32 = 1e-5;

pub(crate) fn conv_params(
    src: &mut dyn ParamSource,
    name: &str,
    c_out: usize,
    in_per_group: usize,
    kernel: (usize, usize),
) -> Result<ConvParams> {
    let bound = fan_in_bound(in_per_group * kernel.0 * kernel.1);
    let w = src.tensor(&format!("{name}.weight"), &[c_out, in_per_group, kernel.0, kernel.1], Kind::Weight { bound })?;
    let b = src.tensor(&format!("{name}.bias"), &[c_out], Kind::Bias { bound })?;
    ConvParams::new(w, Some(b), (c_out, in_per_group), kernel)
}

fn deconv_params(
    src: &mut dyn ParamSource,
    name: &str,
    c_in: usize,
    out_per_group: usize,
    groups: usize,
    kernel: (usize, usize),
) -> Result<ConvParams> {
    let bound = fan_in_bound(out_per_group * kernel.0 * kernel.1);
    let w = src.tensor(&format!("{name}.weight"), &[c_in, out_per_group, kernel.0, kernel.1], Kind::Weight { bound })?;
    let b = src.tensor(&format!("{name}.bias"), &[out_per_group * groups], Kind::Bias { bound })?;
    ConvParams::new(w, Some(b), (c_in, out_per_group), kernel)
}

fn batch_norm(src: &mut dyn ParamSource, name: &str, c: usize) -> Result<BatchNorm> {
    Ok(BatchNorm {
        gamma: src.tensor(&format!("{name}.gamma"), &[c], Kind::Gamma)?,
        beta: src.tensor(&format!("{name}.beta"), &[c], Kind::Beta)?,
        running_mean: src.tensor(&format!("{name}.running_mean"), &[c], Kind::RunningMean)?,
        running_var: src.tensor(&format!("{name}.running_var"), &[c], Kind::RunningVar)?,
        eps: BatchNorm::DEFAULT_EPS,
    })
}

fn slopes(src: &mut dyn ParamSource, name: &str, c: usize) -> Result<Vec<f32>> {
    src.tensor(&format!("{name}.alpha"), &[c], Kind::Slope)
}

fn gru_cell(src: &mut dyn ParamSource, name: &str, input: usize, hidden: usize) -> Result<GruCell> {
    let bound = fan_in_bound(hidden);
    let w_ih = src.tensor(&format!("{name}.w_ih"), &[3 * hidden, input], Kind::Weight { bound })?;
    let w_hh = src.tensor(&format!("{name}.w_hh"), &[3 * hidden, hidden], Kind::Weight { bound })?;
    let b_ih = src.tensor(&format!("{name}.b_ih"), &[3 * hidden], Kind::Bias { bound })?;
    let b_hh = src.tensor(&format!("{name}.b_hh"), &[3 * hidden], Kind::Bias { bound })?;
    GruCell::new(input, hidden, w_ih, w_hh, b_ih, b_hh)
}

fn gru_macs(cell: &GruCell) -> u64 {
    (cell.w_ih.len() + cell.w_hh.len()) as u64
}

/// Fully connected layer, weight `[out][in]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    fn build(src: &mut dyn ParamSource, name: &str, outputs: usize, inputs: usize) -> Result<Self> {
        let bound = fan_in_bound(inputs);
        Ok(Self {
            weight: src.tensor(&format!("{name}.weight"), &[outputs, inputs], Kind::Weight { bound })?,
            bias: src.tensor(&format!("{name}.bias"), &[outputs], Kind::Bias { bound })?,
            inputs,
            outputs,
        })
    }

    fn apply(&self, x: &[f32], out: &mut [f32]) {
        affine(&self.weight, &self.bias, x, out);
    }
}

/// Output activation of a conv stage.
#[derive(Debug, Clone)]
pub enum Activation {
    Prelu(Vec<f32>),
    Tanh,
}

impl Activation {
    fn apply(&self, x: &Tensor4) -> Result<Tensor4> {
        match self {
            Activation::Prelu(a) => prelu(x, a),
            Activation::Tanh => Ok(tanh_act(x)),
        }
    }
}

/// Conv → BN → PReLU along frequency only.
#[derive(Debug, Clone)]
pub struct ConvStage {
    pub conv: ConvParams,
    pub opts: ConvOptions,
    pub bn: BatchNorm,
    pub act: Activation,
}

impl ConvStage {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        src: &mut dyn ParamSource,
        name: &str,
        c_in: usize,
        c_out: usize,
        groups: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        bands_out: usize,
    ) -> Result<Self> {
        if c_in % groups != 0 || c_out % groups != 0 {
            return invalid(format!("{name}: {c_in}->{c_out} channels not divisible into {groups} groups"));
        }
        let conv = conv_params(src, &format!("{name}.conv"), c_out, c_in / groups, kernel)?;
        let bn = batch_norm(src, &format!("{name}.bn"), c_out)?;
        let act = Activation::Prelu(slopes(src, &format!("{name}.act"), c_out)?);
        src.macs(name, ((conv.weight.len() + c_out) * bands_out) as u64);
        Ok(Self { conv, opts: ConvOptions { stride, groups, ..Default::default() }, bn, act })
    }

    pub fn step(&self, x: &Tensor4) -> Result<Tensor4> {
        let y = conv2d(x, &self.conv, self.opts)?;
        self.act.apply(&batch_norm_infer(&y, &self.bn)?)
    }
}

/// Transposed conv → BN → PReLU (or tanh for the mask head).
#[derive(Debug, Clone)]
pub struct DeconvStage {
    pub conv: ConvParams,
    pub stride: (usize, usize),
    pub groups: usize,
    pub bn: BatchNorm,
    pub act: Activation,
}

impl DeconvStage {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        src: &mut dyn ParamSource,
        name: &str,
        c_in: usize,
        c_out: usize,
        groups: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        bands_in: usize,
        bands_out: usize,
        head: bool,
    ) -> Result<Self> {
        if c_in % groups != 0 || c_out % groups != 0 {
            return invalid(format!("{name}: {c_in}->{c_out} channels not divisible into {groups} groups"));
        }
        let conv = deconv_params(src, &format!("{name}.conv"), c_in, c_out / groups, groups, kernel)?;
        let bn = batch_norm(src, &format!("{name}.bn"), c_out)?;
        let act = if head { Activation::Tanh } else { Activation::Prelu(slopes(src, &format!("{name}.act"), c_out)?) };
        src.macs(name, (conv.weight.len() * bands_in + c_out * bands_out) as u64);
        Ok(Self { conv, stride, groups, bn, act })
    }

    pub fn step(&self, x: &Tensor4) -> Result<Tensor4> {
        let y = conv_transpose2d(x, &self.conv, self.stride, self.groups)?;
        self.act.apply(&batch_norm_infer(&y, &self.bn)?)
    }
}

/// Grouped temporal convolution block.
///
/// The first half of the channels passes through; the second half goes
/// through P-Conv → BN → PReLU → causal DD-Conv → BN → PReLU → P-Conv → BN
/// and a temporal attention gate (GRU over the per-frame channel energy, then
/// a sigmoid). The halves are concatenated and shuffled with two groups.
#[derive(Debug, Clone)]
pub struct GtConv {
    pub channels: usize,
    pub hidden: usize,
    pub dilation: usize,
    pub kernel: (usize, usize),
    pconv1: ConvParams,
    bn1: BatchNorm,
    act1: Vec<f32>,
    dconv: ConvParams,
    bn2: BatchNorm,
    act2: Vec<f32>,
    pconv2: ConvParams,
    bn3: BatchNorm,
    tra: GruCell,
    tra_fc: Linear,
}

/// Time history of one [`GtConv`].
#[derive(Debug, Clone)]
pub struct GtState {
    history: VecDeque<Vec<f32>>,
    tra_h: Vec<f32>,
}

impl GtConv {
    pub fn build(
        src: &mut dyn ParamSource,
        name: &str,
        channels: usize,
        hidden: usize,
        kernel: (usize, usize),
        dilation: usize,
        bands: usize,
    ) -> Result<Self> {
        if channels % 2 != 0 {
            return invalid(format!("{name}: GT-Conv needs an even channel count, got {channels}"));
        }
        let half = channels / 2;
        let pconv1 = conv_params(src, &format!("{name}.pconv1"), hidden, half, (1, 1))?;
        let bn1 = batch_norm(src, &format!("{name}.bn1"), hidden)?;
        let act1 = slopes(src, &format!("{name}.act1"), hidden)?;
        let dconv = conv_params(src, &format!("{name}.dconv"), hidden, 1, kernel)?;
        let bn2 = batch_norm(src, &format!("{name}.bn2"), hidden)?;
        let act2 = slopes(src, &format!("{name}.act2"), hidden)?;
        let pconv2 = conv_params(src, &format!("{name}.pconv2"), half, hidden, (1, 1))?;
        let bn3 = batch_norm(src, &format!("{name}.bn3"), half)?;
        let tra = gru_cell(src, &format!("{name}.tra.gru"), half, channels)?;
        let tra_fc = Linear::build(src, &format!("{name}.tra.fc"), half, channels)?;
        let convs = (pconv1.weight.len() + dconv.weight.len() + pconv2.weight.len()) * bands;
        let norms = (2 * hidden + half) * bands;
        // Energy squares and the gate product are one MAC per element each.
        let gate = 2 * half * bands + gru_macs(&tra) as usize + tra_fc.weight.len();
        src.macs(name, (convs + norms + gate) as u64);
        Ok(Self { channels, hidden, dilation, kernel, pconv1, bn1, act1, dconv, bn2, act2, pconv2, bn3, tra, tra_fc })
    }

    /// Frames of DD-Conv input the block looks at, current frame included.
    pub fn receptive_frames(&self) -> usize {
        (self.kernel.0 - 1) * self.dilation + 1
    }

    pub fn state(&self, bands: usize) -> GtState {
        let history = (1..self.receptive_frames()).map(|_| vec![0.0; self.hidden * bands]).collect();
        GtState { history, tra_h: vec![0.0; self.channels] }
    }

    pub fn step(&self, x: &Tensor4, st: &mut GtState) -> Result<Tensor4> {
        if x.channels() != self.channels || x.time() != 1 {
            return invalid(format!("GT-Conv expects a {}-channel frame, got {:?}", self.channels, x.shape()));
        }
        let bands = x.freq();
        let half = self.channels / 2;
        let keep = x.narrow_channels(0, half)?;
        let branch = x.narrow_channels(half, self.channels)?;

        let h = conv2d(&branch, &self.pconv1, ConvOptions::default())?;
        let h = prelu(&batch_norm_infer(&h, &self.bn1)?, &self.act1)?;

        let span = self.receptive_frames();
        let mut window = Tensor4::zeros([1, self.hidden, span, bands]);
        for c in 0..self.hidden {
            let dst = window.plane_mut(0, c);
            for (tau, past) in st.history.iter().enumerate() {
                dst[tau * bands..(tau + 1) * bands].copy_from_slice(&past[c * bands..(c + 1) * bands]);
            }
            dst[(span - 1) * bands..].copy_from_slice(h.plane(0, c));
        }
        if span > 1 {
            st.history.pop_front();
            st.history.push_back(h.data().to_vec());
        }
        let opts = ConvOptions { dilation: (self.dilation, 1), groups: self.hidden, ..Default::default() };
        let h = conv2d(&window, &self.dconv, opts)?;
        let h = prelu(&batch_norm_infer(&h, &self.bn2)?, &self.act2)?;

        let h = conv2d(&h, &self.pconv2, ConvOptions::default())?;
        let mut h = batch_norm_infer(&h, &self.bn3)?;

        let energy: Vec<f32> = (0..half).map(|c| h.plane(0, c).iter().map(|v| v * v).sum::<f32>() / bands as f32).collect();
        self.tra.step(&energy, &mut st.tra_h);
        let mut gate = vec![0.0; half];
        self.tra_fc.apply(&st.tra_h, &mut gate);
        for (c, g) in gate.iter().enumerate() {
            let g = sigmoid(*g);
            h.plane_mut(0, c).iter_mut().for_each(|v| *v *= g);
        }
        channel_shuffle(&Tensor4::concat_channels(&[&keep, &h])?, 2)
    }
}

/// Per-group GRU path of a dual-path block followed by channel shuffle,
/// layer norm over `(bands, channels)` and a residual connection.
#[derive(Debug, Clone)]
struct Path {
    fc: Vec<Linear>,
    ln_gamma: Vec<f32>,
    ln_beta: Vec<f32>,
}

impl Path {
    fn build(src: &mut dyn ParamSource, name: &str, groups: usize, fc_in: usize, gw: usize, bands: usize) -> Result<Self> {
        let fc = (0..groups).map(|g| Linear::build(src, &format!("{name}.fc{g}"), gw, fc_in)).collect::<Result<_>>()?;
        let width = groups * gw;
        let ln_gamma = src.tensor(&format!("{name}.ln.gamma"), &[bands, width], Kind::Gamma)?;
        let ln_beta = src.tensor(&format!("{name}.ln.beta"), &[bands, width], Kind::Beta)?;
        Ok(Self { fc, ln_gamma, ln_beta })
    }

    /// `y` holds the per-group projections, `[band][channel]`; adds the
    /// shuffled, normalized result onto `x` (`[channel][band]`).
    fn finish(&self, y: &[f32], groups: usize, x: &mut Tensor4) {
        let (width, bands) = (x.channels(), x.freq());
        let mut z = vec![0.0; width * bands];
        for f in 0..bands {
            for i in 0..width {
                z[f * width + i] = y[f * width + shuffle_source(i, width, groups)];
            }
        }
        layer_norm(&mut z, &self.ln_gamma, &self.ln_beta, LN_EPS);
        for c in 0..width {
            for (f, v) in x.plane_mut(0, c).iter_mut().enumerate() {
                *v += z[f * width + c];
            }
        }
    }
}

/// Grouped dual-path RNN block: a bidirectional GRU across bands within
/// each frame, then a causal GRU across frames within each band.
#[derive(Debug, Clone)]
pub struct DprnnBlock {
    pub width: usize,
    pub groups: usize,
    pub bands: usize,
    intra_rnn: Vec<GruParams>,
    intra: Path,
    inter_rnn: Vec<GruCell>,
    inter: Path,
}

/// Inter-frame GRU states, `[band][group][hidden]`.
#[derive(Debug, Clone)]
pub struct DprnnState {
    h: Vec<f32>,
}

impl DprnnBlock {
    pub fn build(src: &mut dyn ParamSource, name: &str, width: usize, groups: usize, bands: usize) -> Result<Self> {
        if groups == 0 || width % groups != 0 {
            return invalid(format!("{name}: {width} channels not divisible into {groups} groups"));
        }
        let gw = width / groups;
        let mut intra_rnn = Vec::new();
        for g in 0..groups {
            let forward = gru_cell(src, &format!("{name}.intra.g{g}.fwd"), gw, gw)?;
            let backward = gru_cell(src, &format!("{name}.intra.g{g}.bwd"), gw, gw)?;
            intra_rnn.push(GruParams { forward, backward: Some(backward) });
        }
        let intra = Path::build(src, &format!("{name}.intra"), groups, 2 * gw, gw, bands)?;
        let inter_rnn = (0..groups).map(|g| gru_cell(src, &format!("{name}.inter.g{g}"), gw, gw)).collect::<Result<Vec<_>>>()?;
        let inter = Path::build(src, &format!("{name}.inter"), groups, gw, gw, bands)?;

        let intra_macs: u64 = intra_rnn.iter().map(|p| 2 * gru_macs(&p.forward)).sum::<u64>()
            + intra.fc.iter().map(|l| l.weight.len() as u64).sum::<u64>();
        let inter_macs: u64 =
            inter_rnn.iter().map(gru_macs).sum::<u64>() + inter.fc.iter().map(|l| l.weight.len() as u64).sum::<u64>();
        // Layer norm: one MAC per element for the affine map.
        let ln = (width * bands) as u64;
        src.macs(&format!("{name}.intra"), intra_macs * bands as u64 + ln);
        src.macs(&format!("{name}.inter"), inter_macs * bands as u64 + ln);
        Ok(Self { width, groups, bands, intra_rnn, intra, inter_rnn, inter })
    }

    pub fn state(&self) -> DprnnState {
        DprnnState { h: vec![0.0; self.bands * self.width] }
    }

    pub fn step(&self, x: &Tensor4, st: &mut DprnnState) -> Result<Tensor4> {
        if x.channels() != self.width || x.freq() != self.bands || x.time() != 1 {
            return invalid(format!(
                "G-DPRNN expects a {}x{} frame, got {:?}",
                self.width,
                self.bands,
                x.shape()
            ));
        }
        let (gw, bands) = (self.width / self.groups, self.bands);
        let mut x = x.clone();

        let mut y = vec![0.0; bands * self.width];
        let mut seq = vec![0.0; bands * gw];
        for (g, rnn) in self.intra_rnn.iter().enumerate() {
            for j in 0..gw {
                for (f, v) in x.plane(0, g * gw + j).iter().enumerate() {
                    seq[f * gw + j] = *v;
                }
            }
            let h = gru_sequence(&seq, rnn, Direction::Bidirectional)?;
            for f in 0..bands {
                let dst = &mut y[f * self.width + g * gw..f * self.width + (g + 1) * gw];
                self.intra.fc[g].apply(&h[f * 2 * gw..(f + 1) * 2 * gw], dst);
            }
        }
        self.intra.finish(&y, self.groups, &mut x);

        let mut input = vec![0.0; gw];
        for f in 0..bands {
            for (g, cell) in self.inter_rnn.iter().enumerate() {
                for (j, v) in input.iter_mut().enumerate() {
                    *v = x.get(0, g * gw + j, 0, f);
                }
                let h = &mut st.h[f * self.width + g * gw..f * self.width + (g + 1) * gw];
                cell.step(&input, h);
                let dst = &mut y[f * self.width + g * gw..f * self.width + (g + 1) * gw];
                self.inter.fc[g].apply(h, dst);
            }
        }
        self.inter.finish(&y, self.groups, &mut x);
        Ok(x)
    }
}

/// Applies a per-frame step to every frame of `x`.
pub fn run_frames(x: &Tensor4, mut step: impl FnMut(&Tensor4) -> Result<Tensor4>) -> Result<Tensor4> {
    let frames: Vec<Tensor4> = (0..x.time()).map(|t| step(&x.narrow_time(t, t + 1)?)).collect::<Result<_>>()?;
    let refs: Vec<&Tensor4> = frames.iter().collect();
    if refs.is_empty() {
        return Ok(Tensor4::zeros([x.batch(), 0, 0, 0]));
    }
    Tensor4::concat_time(&refs)
}
