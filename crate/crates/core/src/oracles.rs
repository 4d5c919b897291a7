//! Naive reference implementations used to cross-check the optimized paths.
//!
//! Each routine is written in the most literal form (nested loops, explicit
//! index arithmetic, `f64` accumulation) and shares no code with the module
//! it checks. Only compiled for tests or with the `oracles` feature.

use std::f64::consts::PI;

use crate::dsp::{ComplexSpectrogram, StftConfig};
use crate::nn::{BatchNorm, ConvOptions, ConvParams, Direction, GruCell, GruParams, Tensor4};
use crate::Complex64;

/// `max|a − b| / max(max|b|, tiny)`.
pub fn rel_linf(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    let diff = a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| (*y as f64).abs()).fold(0.0, f64::max);
    diff / scale.max(1e-30)
}

fn kernel_at(p: &ConvParams, a: usize, b: usize, i: usize, j: usize) -> f64 {
    let (d0, d1) = p.dims;
    let (kt, kf) = p.kernel;
    assert!(a < d0 && b < d1 && i < kt && j < kf);
    p.weight[a * d1 * kt * kf + b * kt * kf + i * kf + j] as f64
}

/// Direct per-output cross-correlation.
pub fn conv2d(x: &Tensor4, p: &ConvParams, o: ConvOptions) -> Tensor4 {
    let [n, c_in, t_in, f_in] = x.shape();
    let (c_out, cpg) = p.dims;
    let (kt, kf) = p.kernel;
    let pad_t = if o.causal_pad_time { (o.dilation.0 * (kt - 1)) as i64 } else { 0 };
    let pad_f = (o.dilation.1 * (kf - 1) / 2) as i64;
    let t_out = ((t_in as i64 + pad_t - (o.dilation.0 * (kt - 1)) as i64 - 1) / o.stride.0 as i64 + 1) as usize;
    let f_out = ((f_in as i64 + 2 * pad_f - (o.dilation.1 * (kf - 1)) as i64 - 1) / o.stride.1 as i64 + 1) as usize;
    assert_eq!(cpg * o.groups, c_in);
    let opg = c_out / o.groups;
    let mut out = Tensor4::zeros([n, c_out, t_out, f_out]);
    for b in 0..n {
        for oc in 0..c_out {
            let g = oc / opg;
            for ot in 0..t_out {
                for of in 0..f_out {
                    let mut acc = p.bias.as_ref().map_or(0.0, |v| v[oc] as f64);
                    for icl in 0..cpg {
                        for i in 0..kt {
                            for j in 0..kf {
                                let it = (ot * o.stride.0 + i * o.dilation.0) as i64 - pad_t;
                                let jf = (of * o.stride.1 + j * o.dilation.1) as i64 - pad_f;
                                if it < 0 || jf < 0 || it >= t_in as i64 || jf >= f_in as i64 {
                                    continue;
                                }
                                acc += kernel_at(p, oc, icl, i, j)
                                    * x.get(b, g * cpg + icl, it as usize, jf as usize) as f64;
                            }
                        }
                    }
                    out.set(b, oc, ot, of, acc as f32);
                }
            }
        }
    }
    out
}

/// Scatter-add transposed convolution followed by the documented crop.
pub fn conv_transpose2d(x: &Tensor4, p: &ConvParams, stride: (usize, usize), groups: usize) -> Tensor4 {
    let [n, c_in, t_in, f_in] = x.shape();
    let (_, opg) = p.dims;
    let (kt, kf) = p.kernel;
    let ipg = c_in / groups;
    let c_out = opg * groups;
    let t_full = (t_in - 1) * stride.0 + kt;
    let f_full = (f_in - 1) * stride.1 + kf;
    let mut full = vec![0.0f64; n * c_out * t_full * f_full];
    let at = |b: usize, c: usize, t: usize, f: usize| ((b * c_out + c) * t_full + t) * f_full + f;
    for b in 0..n {
        for ic in 0..c_in {
            let g = ic / ipg;
            for it in 0..t_in {
                for jf in 0..f_in {
                    let v = x.get(b, ic, it, jf) as f64;
                    for ocl in 0..opg {
                        for i in 0..kt {
                            for j in 0..kf {
                                full[at(b, g * opg + ocl, it * stride.0 + i, jf * stride.1 + j)] +=
                                    kernel_at(p, ic, ocl, i, j) * v;
                            }
                        }
                    }
                }
            }
        }
    }
    let crop_f = (kf - 1) / 2;
    let t_out = (t_in - 1) * stride.0 + 1;
    let f_out = f_full - 2 * crop_f;
    let mut out = Tensor4::zeros([n, c_out, t_out, f_out]);
    for b in 0..n {
        for oc in 0..c_out {
            let bias = p.bias.as_ref().map_or(0.0, |v| v[oc] as f64);
            for t in 0..t_out {
                for f in 0..f_out {
                    out.set(b, oc, t, f, (full[at(b, oc, t, f + crop_f)] + bias) as f32);
                }
            }
        }
    }
    out
}

pub fn batch_norm(x: &Tensor4, p: &BatchNorm) -> Tensor4 {
    let mut out = x.clone();
    let [n, c, t, f] = x.shape();
    for b in 0..n {
        for ch in 0..c {
            for i in 0..t {
                for j in 0..f {
                    let v = x.get(b, ch, i, j) as f64;
                    let y = (v - p.running_mean[ch] as f64) / (p.running_var[ch] as f64 + p.eps as f64).sqrt()
                        * p.gamma[ch] as f64
                        + p.beta[ch] as f64;
                    out.set(b, ch, i, j, y as f32);
                }
            }
        }
    }
    out
}

pub fn prelu(x: &Tensor4, alpha: &[f32]) -> Tensor4 {
    let mut out = x.clone();
    let [n, c, t, f] = x.shape();
    for b in 0..n {
        for ch in 0..c {
            let a = alpha[if alpha.len() == 1 { 0 } else { ch }];
            for i in 0..t {
                for j in 0..f {
                    let v = x.get(b, ch, i, j);
                    out.set(b, ch, i, j, if v >= 0.0 { v } else { a * v });
                }
            }
        }
    }
    out
}

/// Explicit reshape `(g, c/g)` → transpose → flatten.
pub fn channel_shuffle(x: &Tensor4, groups: usize) -> Tensor4 {
    let [n, c, t, f] = x.shape();
    let per = c / groups;
    let mut grid = vec![vec![0usize; per]; groups];
    for (g, row) in grid.iter_mut().enumerate() {
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = g * per + k;
        }
    }
    let mut order = Vec::with_capacity(c);
    for k in 0..per {
        for row in &grid {
            order.push(row[k]);
        }
    }
    let mut out = Tensor4::zeros([n, c, t, f]);
    for b in 0..n {
        for (dst, &src) in order.iter().enumerate() {
            for i in 0..t {
                for j in 0..f {
                    out.set(b, dst, i, j, x.get(b, src, i, j));
                }
            }
        }
    }
    out
}

fn gru_scalar_step(cell: &GruCell, x: &[f32], h: &[f64]) -> Vec<f64> {
    let hs = cell.hidden_size;
    let is = cell.input_size;
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let mut next = vec![0.0; hs];
    for j in 0..hs {
        let mut pre = [0.0f64; 3];
        let mut rec = [0.0f64; 3];
        for (gate, (p, r)) in pre.iter_mut().zip(rec.iter_mut()).enumerate() {
            let row = gate * hs + j;
            *p = cell.b_ih[row] as f64;
            for i in 0..is {
                *p += cell.w_ih[row * is + i] as f64 * x[i] as f64;
            }
            *r = cell.b_hh[row] as f64;
            for i in 0..hs {
                *r += cell.w_hh[row * hs + i] as f64 * h[i];
            }
        }
        let z = sig(pre[0] + rec[0]);
        let r = sig(pre[1] + rec[1]);
        let cand = (pre[2] + r * rec[2]).tanh();
        next[j] = (1.0 - z) * cand + z * h[j];
    }
    next
}

pub fn gru_sequence(x: &[f32], p: &GruParams, direction: Direction) -> Vec<f32> {
    let is = p.forward.input_size;
    let steps = x.len() / is;
    let run = |cell: &GruCell, reverse: bool| -> Vec<Vec<f64>> {
        let mut h = vec![0.0; cell.hidden_size];
        let mut outs = vec![Vec::new(); steps];
        let idx: Vec<usize> = if reverse { (0..steps).rev().collect() } else { (0..steps).collect() };
        for t in idx {
            h = gru_scalar_step(cell, &x[t * is..(t + 1) * is], &h);
            outs[t] = h.clone();
        }
        outs
    };
    let seqs = match direction {
        Direction::Forward => vec![run(&p.forward, false)],
        Direction::Backward => vec![run(&p.forward, true)],
        Direction::Bidirectional => vec![run(&p.forward, false), run(p.backward.as_ref().unwrap(), true)],
    };
    let mut out = Vec::new();
    for t in 0..steps {
        for s in &seqs {
            out.extend(s[t].iter().map(|&v| v as f32));
        }
    }
    out
}

/// Direct `O(N²)` DFT of a real frame, non-negative bins only.
pub fn direct_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                acc += Complex64::new(v * ang.cos(), v * ang.sin());
            }
            acc
        })
        .collect()
}

/// Overlap-add with explicit inverse DFT sums; one channel.
pub fn overlap_add(spec: &ComplexSpectrogram, channel: usize, cfg: &StftConfig, length: usize) -> Vec<f64> {
    let n = cfg.fft_size;
    let mut out = vec![0.0; length];
    for l in 0..spec.frames() {
        let frame = spec.frame(channel, l);
        for t in 0..n {
            // x[t] = (1/N) Σ_k X[k] e^{+j2πkt/N}, with Hermitian symmetry.
            let mut acc = frame[0].re + frame[n / 2].re * if t % 2 == 0 { 1.0 } else { -1.0 };
            for (k, v) in frame.iter().enumerate().take(n / 2).skip(1) {
                let ang = 2.0 * PI * (k * t) as f64 / n as f64;
                acc += 2.0 * (v.re * ang.cos() - v.im * ang.sin());
            }
            let pos = l * cfg.hop + t;
            if pos < length {
                out[pos] += acc / n as f64 * cfg.window[t];
            }
        }
    }
    out
}

/// `y = M·x` with an explicit dense matrix stored row-major.
pub fn dense_matvec(m: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows).map(|r| (0..cols).map(|c| m[r * cols + c] * x[c]).sum()).collect()
}

/// Inverse of a 2×2 complex matrix via the adjugate formula.
pub fn inverse_2x2(m: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

/// Full linear convolution truncated to `x.len()` samples.
pub fn direct_convolution(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for (n, out) in y.iter_mut().enumerate() {
        for (k, &hk) in h.iter().enumerate() {
            if k > n {
                break;
            }
            *out += hk * x[n - k];
        }
    }
    y
}

/// Sample excess kurtosis `m4/m2² − 3`.
pub fn excess_kurtosis(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}
