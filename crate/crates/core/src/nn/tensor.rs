use crate::{invalid, Result};

/// Dense `f32` tensor laid out `[batch][channel][time][freq]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    shape: [usize; 4],
    data: Vec<f32>,
}

impl Tensor4 {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self { shape, data: vec![0.0; shape.iter().product()] }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f32>) -> Result<Self> {
        if data.len() != shape.iter().product::<usize>() {
            return invalid(format!("tensor data length {} does not match shape {shape:?}", data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn time(&self) -> usize {
        self.shape[2]
    }

    pub fn freq(&self) -> usize {
        self.shape[3]
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, t: usize, f: usize) -> usize {
        ((n * self.shape[1] + c) * self.shape[2] + t) * self.shape[3] + f
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, t: usize, f: usize) -> f32 {
        self.data[self.index(n, c, t, f)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, t: usize, f: usize, v: f32) {
        let i = self.index(n, c, t, f);
        self.data[i] = v;
    }

    /// The `[time][freq]` plane of one channel.
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let len = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * len;
        &self.data[start..start + len]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f32] {
        let len = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * len;
        &mut self.data[start..start + len]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor4 {
        Tensor4 { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Elementwise sum of equally shaped tensors.
    pub fn add(&self, other: &Tensor4) -> Result<Tensor4> {
        if self.shape != other.shape {
            return invalid(format!("cannot add {:?} and {:?}", self.shape, other.shape));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Tensor4 { shape: self.shape, data })
    }

    /// Channels `[from, to)`.
    pub fn narrow_channels(&self, from: usize, to: usize) -> Result<Tensor4> {
        let [n, c, t, f] = self.shape;
        if from > to || to > c {
            return invalid(format!("channel range {from}..{to} out of bounds for {c} channels"));
        }
        let mut out = Tensor4::zeros([n, to - from, t, f]);
        for b in 0..n {
            for (dst, src) in (from..to).enumerate() {
                out.plane_mut(b, dst).copy_from_slice(self.plane(b, src));
            }
        }
        Ok(out)
    }

    /// Concatenation along the channel axis.
    pub fn concat_channels(parts: &[&Tensor4]) -> Result<Tensor4> {
        let Some(first) = parts.first() else {
            return invalid("nothing to concatenate");
        };
        let [n, _, t, f] = first.shape;
        if parts.iter().any(|p| p.shape[0] != n || p.shape[2] != t || p.shape[3] != f) {
            return invalid("concatenated tensors differ in batch/time/freq extent");
        }
        let c: usize = parts.iter().map(|p| p.shape[1]).sum();
        let mut out = Tensor4::zeros([n, c, t, f]);
        for b in 0..n {
            let mut dst = 0;
            for p in parts {
                for src in 0..p.shape[1] {
                    out.plane_mut(b, dst).copy_from_slice(p.plane(b, src));
                    dst += 1;
                }
            }
        }
        Ok(out)
    }

    /// Frames `[from, to)` of every channel.
    pub fn narrow_time(&self, from: usize, to: usize) -> Result<Tensor4> {
        let [n, c, t, f] = self.shape;
        if from > to || to > t {
            return invalid(format!("time range {from}..{to} out of bounds for {t} frames"));
        }
        let mut out = Tensor4::zeros([n, c, to - from, f]);
        for b in 0..n {
            for ch in 0..c {
                let src = &self.plane(b, ch)[from * f..to * f];
                out.plane_mut(b, ch).copy_from_slice(src);
            }
        }
        Ok(out)
    }

    /// Concatenation along the time axis.
    pub fn concat_time(parts: &[&Tensor4]) -> Result<Tensor4> {
        let Some(first) = parts.first() else {
            return invalid("nothing to concatenate");
        };
        let [n, c, _, f] = first.shape;
        if parts.iter().any(|p| p.shape[0] != n || p.shape[1] != c || p.shape[3] != f) {
            return invalid("concatenated tensors differ in batch/channel/freq extent");
        }
        let t: usize = parts.iter().map(|p| p.shape[2]).sum();
        let mut out = Tensor4::zeros([n, c, t, f]);
        for b in 0..n {
            for ch in 0..c {
                let mut off = 0;
                for p in parts {
                    let src = p.plane(b, ch);
                    out.plane_mut(b, ch)[off..off + src.len()].copy_from_slice(src);
                    off += src.len();
                }
            }
        }
        Ok(out)
    }
}

/// Real-valued feature planes laid out `[channel][frame][band]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    channels: usize,
    frames: usize,
    bands: usize,
    data: Vec<f32>,
}

impl FeatureTensor {
    pub fn zeros(channels: usize, frames: usize, bands: usize) -> Self {
        Self { channels, frames, bands, data: vec![0.0; channels * frames * bands] }
    }

    pub fn from_vec(channels: usize, frames: usize, bands: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * frames * bands {
            return invalid(format!(
                "feature data length {} does not match {channels}x{frames}x{bands}",
                data.len()
            ));
        }
        Ok(Self { channels, frames, bands, data })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    #[inline]
    pub fn get(&self, c: usize, l: usize, k: usize) -> f32 {
        self.data[(c * self.frames + l) * self.bands + k]
    }

    #[inline]
    pub fn set(&mut self, c: usize, l: usize, k: usize, v: f32) {
        self.data[(c * self.frames + l) * self.bands + k] = v;
    }

    pub fn row(&self, c: usize, l: usize) -> &[f32] {
        let s = (c * self.frames + l) * self.bands;
        &self.data[s..s + self.bands]
    }

    pub fn row_mut(&mut self, c: usize, l: usize) -> &mut [f32] {
        let s = (c * self.frames + l) * self.bands;
        &mut self.data[s..s + self.bands]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Views the planes as a batch-of-one [`Tensor4`].
    pub fn into_tensor(self) -> Tensor4 {
        Tensor4 { shape: [1, self.channels, self.frames, self.bands], data: self.data }
    }

    /// Inverse of [`FeatureTensor::into_tensor`]; requires batch size 1.
    pub fn from_tensor(t: Tensor4) -> Result<Self> {
        let [n, c, l, k] = t.shape;
        if n != 1 {
            return invalid(format!("expected batch size 1, got {n}"));
        }
        Ok(Self { channels: c, frames: l, bands: k, data: t.data })
    }
}
