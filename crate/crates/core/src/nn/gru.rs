//! Gated recurrent units.
//!
//! Gate rows are packed in the order (update `z`, reset `r`, candidate `n`):
//!
//! ```text
//! z  = σ(W_iz x + b_iz + W_hz h + b_hz)
//! r  = σ(W_ir x + b_ir + W_hr h + b_hr)
//! n  = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```

use crate::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
    Bidirectional,
}

/// Weights of one GRU direction.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub input_size: usize,
    pub hidden_size: usize,
    /// `[3·hidden][input]`
    pub w_ih: Vec<f32>,
    /// `[3·hidden][hidden]`
    pub w_hh: Vec<f32>,
    pub b_ih: Vec<f32>,
    pub b_hh: Vec<f32>,
}

impl GruCell {
    pub fn new(input_size: usize, hidden_size: usize, w_ih: Vec<f32>, w_hh: Vec<f32>, b_ih: Vec<f32>, b_hh: Vec<f32>) -> Result<Self> {
        let h3 = 3 * hidden_size;
        if hidden_size == 0 {
            return invalid("GRU hidden size must be positive");
        }
        if w_ih.len() != h3 * input_size || w_hh.len() != h3 * hidden_size || b_ih.len() != h3 || b_hh.len() != h3 {
            return invalid(format!("GRU({input_size}->{hidden_size}) weight shapes are inconsistent"));
        }
        Ok(Self { input_size, hidden_size, w_ih, w_hh, b_ih, b_hh })
    }

    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let h3 = 3 * hidden_size;
        Self {
            input_size,
            hidden_size,
            w_ih: vec![0.0; h3 * input_size],
            w_hh: vec![0.0; h3 * hidden_size],
            b_ih: vec![0.0; h3],
            b_hh: vec![0.0; h3],
        }
    }

    /// One recurrence step; `h` is updated in place.
    pub fn step(&self, x: &[f32], h: &mut [f32]) {
        let hs = self.hidden_size;
        let is = self.input_size;
        debug_assert_eq!(x.len(), is);
        debug_assert_eq!(h.len(), hs);
        let mut gi = [0.0f32; 3 * 64];
        let mut gh = [0.0f32; 3 * 64];
        let (gi, gh) = if hs <= 64 {
            (&mut gi[..3 * hs], &mut gh[..3 * hs])
        } else {
            return self.step_alloc(x, h);
        };
        affine(&self.w_ih, &self.b_ih, x, gi);
        affine(&self.w_hh, &self.b_hh, h, gh);
        for j in 0..hs {
            let z = sigmoid(gi[j] + gh[j]);
            let r = sigmoid(gi[hs + j] + gh[hs + j]);
            let n = (gi[2 * hs + j] + r * gh[2 * hs + j]).tanh();
            h[j] = (1.0 - z) * n + z * h[j];
        }
    }

    fn step_alloc(&self, x: &[f32], h: &mut [f32]) {
        let hs = self.hidden_size;
        let mut gi = vec![0.0; 3 * hs];
        let mut gh = vec![0.0; 3 * hs];
        affine(&self.w_ih, &self.b_ih, x, &mut gi);
        affine(&self.w_hh, &self.b_hh, h, &mut gh);
        for j in 0..hs {
            let z = sigmoid(gi[j] + gh[j]);
            let r = sigmoid(gi[hs + j] + gh[hs + j]);
            let n = (gi[2 * hs + j] + r * gh[2 * hs + j]).tanh();
            h[j] = (1.0 - z) * n + z * h[j];
        }
    }
}

#[inline]
pub(crate) fn sigmoid(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

/// `out = W·x + b` with `W` row-major `[out.len()][x.len()]`.
#[inline]
pub(crate) fn affine(w: &[f32], b: &[f32], x: &[f32], out: &mut [f32]) {
    let n = x.len();
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n).zip(b)) {
        *o = *bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f32>();
    }
}

/// A uni- or bidirectional GRU layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub forward: GruCell,
    pub backward: Option<GruCell>,
}

impl GruParams {
    pub fn output_size(&self, direction: Direction) -> usize {
        match direction {
            Direction::Bidirectional => 2 * self.forward.hidden_size,
            _ => self.forward.hidden_size,
        }
    }
}

/// Runs the layer over `x` (`[steps][input]`, row-major) from a zero state.
///
/// Returns `[steps][hidden]`, or `[steps][2·hidden]` for bidirectional layers
/// with forward states first.
pub fn gru_sequence(x: &[f32], p: &GruParams, direction: Direction) -> Result<Vec<f32>> {
    let is = p.forward.input_size;
    if is == 0 || x.len() % is != 0 {
        return invalid(format!("GRU input length {} is not a multiple of {is}", x.len()));
    }
    let steps = x.len() / is;
    let hs = p.forward.hidden_size;
    let run = |cell: &GruCell, reverse: bool, out: &mut [f32], stride: usize, offset: usize| {
        let mut h = vec![0.0f32; hs];
        let order: Box<dyn Iterator<Item = usize>> =
            if reverse { Box::new((0..steps).rev()) } else { Box::new(0..steps) };
        for t in order {
            cell.step(&x[t * is..(t + 1) * is], &mut h);
            out[t * stride + offset..t * stride + offset + hs].copy_from_slice(&h);
        }
    };
    match direction {
        Direction::Forward | Direction::Backward => {
            let mut out = vec![0.0; steps * hs];
            run(&p.forward, direction == Direction::Backward, &mut out, hs, 0);
            Ok(out)
        }
        Direction::Bidirectional => {
            let Some(bwd) = &p.backward else {
                return invalid("bidirectional GRU requires backward weights");
            };
            if bwd.input_size != is || bwd.hidden_size != hs {
                return invalid("forward and backward GRU cells differ in shape");
            }
            let mut out = vec![0.0; steps * 2 * hs];
            run(&p.forward, false, &mut out, 2 * hs, 0);
            run(bwd, true, &mut out, 2 * hs, hs);
            Ok(out)
        }
    }
}
