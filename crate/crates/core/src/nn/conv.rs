//! 2-D convolution and transposed convolution over `[time][freq]` planes.
//!
//! Both use cross-correlation (no kernel flip). The frequency axis is padded
//! symmetrically by `dilation·(k−1)/2`, which is "same" padding at stride 1
//! and halves `2n+1` bands to `n+1` at stride 2. The time axis is either
//! unpadded or left-padded by `dilation·(k−1)` so that output frame `t` only
//! sees input frames `≤ t`.

use super::Tensor4;
use crate::{invalid, Result};

/// Kernel and bias of a (transposed) convolution.
///
/// Regular convolutions store the kernel as `[out][in/groups][kt][kf]`;
/// transposed convolutions as `[in][out/groups][kt][kf]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weight: Vec<f32>,
    pub bias: Option<Vec<f32>>,
    /// Leading two kernel dimensions, in storage order.
    pub dims: (usize, usize),
    pub kernel: (usize, usize),
}

impl ConvParams {
    pub fn new(weight: Vec<f32>, bias: Option<Vec<f32>>, dims: (usize, usize), kernel: (usize, usize)) -> Result<Self> {
        if kernel.0 == 0 || kernel.1 == 0 {
            return invalid("kernel dimensions must be at least 1");
        }
        if weight.len() != dims.0 * dims.1 * kernel.0 * kernel.1 {
            return invalid(format!(
                "kernel has {} values, expected {}x{}x{}x{}",
                weight.len(),
                dims.0,
                dims.1,
                kernel.0,
                kernel.1
            ));
        }
        Ok(Self { weight, bias, dims, kernel })
    }

    #[inline]
    fn w(&self, a: usize, b: usize, i: usize, j: usize) -> f32 {
        self.weight[((a * self.dims.1 + b) * self.kernel.0 + i) * self.kernel.1 + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvOptions {
    pub stride: (usize, usize),
    pub dilation: (usize, usize),
    pub groups: usize,
    pub causal_pad_time: bool,
}

impl Default for ConvOptions {
    fn default() -> Self {
        Self { stride: (1, 1), dilation: (1, 1), groups: 1, causal_pad_time: false }
    }
}

/// Grouped, strided, dilated 2-D convolution.
pub fn conv2d(x: &Tensor4, p: &ConvParams, opts: ConvOptions) -> Result<Tensor4> {
    let [n, c_in, t_in, f_in] = x.shape();
    let (st, sf) = opts.stride;
    let (dt, df) = opts.dilation;
    let g = opts.groups;
    let (kt, kf) = p.kernel;
    let (c_out, in_per_group) = p.dims;
    if g == 0 || st == 0 || sf == 0 || dt == 0 || df == 0 {
        return invalid("groups, strides and dilations must be positive");
    }
    if c_in % g != 0 || c_out % g != 0 || in_per_group * g != c_in {
        return invalid(format!(
            "conv2d: {c_in} input / {c_out} output channels incompatible with {g} groups of {in_per_group}"
        ));
    }
    if let Some(b) = &p.bias {
        if b.len() != c_out {
            return invalid("conv2d: bias length differs from output channels");
        }
    }
    let pad_t = if opts.causal_pad_time { dt * (kt - 1) } else { 0 };
    let pad_f = df * (kf - 1) / 2;
    let span_t = dt * (kt - 1) + 1;
    let span_f = df * (kf - 1) + 1;
    if t_in + pad_t < span_t || f_in + 2 * pad_f < span_f {
        return invalid("conv2d: input smaller than kernel extent");
    }
    let t_out = (t_in + pad_t - span_t) / st + 1;
    let f_out = (f_in + 2 * pad_f - span_f) / sf + 1;
    let out_per_group = c_out / g;

    let mut out = Tensor4::zeros([n, c_out, t_out, f_out]);
    for b in 0..n {
        for oc in 0..c_out {
            let group = oc / out_per_group;
            let bias = p.bias.as_ref().map_or(0.0, |v| v[oc]);
            let plane = out.plane_mut(b, oc);
            plane.fill(bias);
            for icl in 0..in_per_group {
                let src = x.plane(b, group * in_per_group + icl);
                for i in 0..kt {
                    for j in 0..kf {
                        let w = p.w(oc, icl, i, j);
                        // Output columns whose tap lands inside the unpadded input.
                        let off_f = j * df;
                        let lo = pad_f.saturating_sub(off_f).div_ceil(sf);
                        let hi = ((f_in + pad_f).saturating_sub(off_f)).div_ceil(sf).min(f_out);
                        for ot in 0..t_out {
                            let it = ot * st + i * dt;
                            if it < pad_t || it - pad_t >= t_in {
                                continue;
                            }
                            let row = &src[(it - pad_t) * f_in..(it - pad_t + 1) * f_in];
                            let dst = &mut plane[ot * f_out..(ot + 1) * f_out];
                            for of in lo..hi {
                                dst[of] += w * row[of * sf + off_f - pad_f];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Output extent of [`conv_transpose2d`] along (time, freq).
pub fn conv_transpose_out_len(t_in: usize, f_in: usize, stride: (usize, usize), kernel: (usize, usize)) -> (usize, usize) {
    let pad_f = (kernel.1 - 1) / 2;
    let t_out = (t_in - 1) * stride.0 + 1;
    let f_out = (f_in - 1) * stride.1 + kernel.1 - 2 * pad_f;
    (t_out, f_out)
}

/// Grouped transposed convolution.
///
/// The full output (`(T−1)·st + kt` frames, `(F−1)·sf + kf` bins) is trimmed
/// by `(kf−1)/2` bins at both frequency edges and by the trailing `kt−1`
/// frames, which keeps the layer causal and maps `n+1` bands back to `2n+1`
/// at stride 2.
pub fn conv_transpose2d(x: &Tensor4, p: &ConvParams, stride: (usize, usize), groups: usize) -> Result<Tensor4> {
    let [n, c_in, t_in, f_in] = x.shape();
    let (st, sf) = stride;
    let g = groups;
    let (kt, kf) = p.kernel;
    let (w_in, out_per_group) = p.dims;
    if g == 0 || st == 0 || sf == 0 {
        return invalid("groups and strides must be positive");
    }
    if w_in != c_in || c_in % g != 0 {
        return invalid(format!(
            "conv_transpose2d: kernel expects {w_in} input channels, got {c_in} with {g} groups"
        ));
    }
    if t_in == 0 || f_in == 0 {
        return invalid("conv_transpose2d: empty input");
    }
    let c_out = out_per_group * g;
    if let Some(b) = &p.bias {
        if b.len() != c_out {
            return invalid("conv_transpose2d: bias length differs from output channels");
        }
    }
    let in_per_group = c_in / g;
    let pad_f = (kf - 1) / 2;
    let (t_out, f_out) = conv_transpose_out_len(t_in, f_in, stride, p.kernel);

    let mut out = Tensor4::zeros([n, c_out, t_out, f_out]);
    for b in 0..n {
        for oc in 0..c_out {
            let group = oc / out_per_group;
            let ocl = oc % out_per_group;
            let bias = p.bias.as_ref().map_or(0.0, |v| v[oc]);
            for ot in 0..t_out {
                for of in 0..f_out {
                    let full_f = of + pad_f;
                    let mut acc = bias;
                    for icl in 0..in_per_group {
                        let ic = group * in_per_group + icl;
                        let src = x.plane(b, ic);
                        for i in 0..kt.min(ot + 1) {
                            if (ot - i) % st != 0 {
                                continue;
                            }
                            let it = (ot - i) / st;
                            if it >= t_in {
                                continue;
                            }
                            for j in 0..kf.min(full_f + 1) {
                                if (full_f - j) % sf != 0 {
                                    continue;
                                }
                                let jf = (full_f - j) / sf;
                                if jf >= f_in {
                                    continue;
                                }
                                acc += p.w(ic, ocl, i, j) * src[it * f_in + jf];
                            }
                        }
                    }
                    out.set(b, oc, ot, of, acc);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
        (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()
    }

    #[test]
    fn depthwise_identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor4::from_vec([1, 4, 5, 7], rand_vec(&mut rng, 140)).unwrap();
        let p = ConvParams::new(vec![1.0; 4], None, (4, 1), (1, 1)).unwrap();
        let y = conv2d(&x, &p, ConvOptions { groups: 4, ..Default::default() }).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_kernel_gives_bias() {
        let x = Tensor4::from_vec([1, 2, 4, 9], vec![0.7; 72]).unwrap();
        let p = ConvParams::new(vec![0.0; 3 * 2 * 3 * 3], Some(vec![0.5, -1.0, 2.0]), (3, 2), (3, 3)).unwrap();
        let y = conv2d(&x, &p, ConvOptions { causal_pad_time: true, ..Default::default() }).unwrap();
        assert_eq!(y.shape(), [1, 3, 4, 9]);
        for (c, b) in [0.5f32, -1.0, 2.0].iter().enumerate() {
            assert!(y.plane(0, c).iter().all(|v| v == b));
        }
    }

    #[test]
    fn stride_two_band_trace() {
        let x = Tensor4::zeros([1, 1, 3, 129]);
        let p = ConvParams::new(vec![0.0; 5], None, (1, 1), (1, 5)).unwrap();
        let opts = ConvOptions { stride: (1, 2), ..Default::default() };
        let y = conv2d(&x, &p, opts).unwrap();
        assert_eq!(y.freq(), 65);
        let y = conv2d(&y, &p, opts).unwrap();
        assert_eq!(y.freq(), 33);
        let up = conv_transpose2d(&y, &p, (1, 2), 1).unwrap();
        assert_eq!(up.freq(), 65);
        let up = conv_transpose2d(&up, &p, (1, 2), 1).unwrap();
        assert_eq!(up.freq(), 129);
    }

    #[test]
    fn group_mismatch_is_rejected() {
        let x = Tensor4::zeros([1, 3, 2, 5]);
        let p = ConvParams::new(vec![0.0; 4 * 3], None, (4, 3), (1, 1)).unwrap();
        assert!(conv2d(&x, &p, ConvOptions { groups: 2, ..Default::default() }).is_err());
        assert!(conv_transpose2d(&x, &p, (1, 1), 2).is_err());
    }

    #[test]
    fn transposed_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor4::from_vec([1, 3, 4, 6], rand_vec(&mut rng, 72)).unwrap();
        let mut w = vec![0.0; 9];
        for c in 0..3 {
            w[c * 3 + c] = 1.0;
        }
        let p = ConvParams::new(w, None, (3, 3), (1, 1)).unwrap();
        assert_eq!(conv_transpose2d(&x, &p, (1, 1), 1).unwrap(), x);
    }

    #[test]
    fn dilated_grouped_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor4::from_vec([1, 4, 9, 11], rand_vec(&mut rng, 396)).unwrap();
        let p = ConvParams::new(rand_vec(&mut rng, 6 * 2 * 9), Some(rand_vec(&mut rng, 6)), (6, 2), (3, 3)).unwrap();
        let opts = ConvOptions { dilation: (2, 1), groups: 2, causal_pad_time: true, ..Default::default() };
        let fast = conv2d(&x, &p, opts).unwrap();
        let slow = oracles::conv2d(&x, &p, opts);
        assert!(oracles::rel_linf(fast.data(), slow.data()) < 1e-5);
    }

    #[test]
    fn transposed_matches_scatter_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor4::from_vec([1, 4, 5, 9], rand_vec(&mut rng, 180)).unwrap();
        let p = ConvParams::new(rand_vec(&mut rng, 4 * 3 * 2 * 5), Some(rand_vec(&mut rng, 6)), (4, 3), (2, 5)).unwrap();
        let fast = conv_transpose2d(&x, &p, (1, 2), 2).unwrap();
        let slow = oracles::conv_transpose2d(&x, &p, (1, 2), 2);
        assert_eq!(fast.shape(), slow.shape());
        assert!(oracles::rel_linf(fast.data(), slow.data()) < 1e-5);
    }

    #[test]
    fn causal_padding_ignores_future_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor4::from_vec([1, 2, 12, 6], rand_vec(&mut rng, 144)).unwrap();
        let p = ConvParams::new(rand_vec(&mut rng, 2 * 2 * 3 * 3), None, (2, 2), (3, 3)).unwrap();
        let opts = ConvOptions { dilation: (5, 1), causal_pad_time: true, ..Default::default() };
        let base = conv2d(&x, &p, opts).unwrap();
        for t in 0..11 {
            let mut y = x.clone();
            for c in 0..2 {
                for tt in t + 1..12 {
                    for f in 0..6 {
                        y.set(0, c, tt, f, rng.random_range(-5.0..5.0));
                    }
                }
            }
            let pert = conv2d(&y, &p, opts).unwrap();
            for c in 0..2 {
                assert_eq!(&base.plane(0, c)[..(t + 1) * 6], &pert.plane(0, c)[..(t + 1) * 6]);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            // Dyadic inputs keep every f32 product and partial sum exact.
            #[test]
            fn conv2d_is_linear_without_bias(seed in any::<u64>(), a in -4i32..=4, b in -4i32..=4) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut ints = |n: usize, scale: f32| -> Vec<f32> {
                    (0..n).map(|_| rng.random_range(-16i32..=16) as f32 * scale).collect()
                };
                let xv = ints(84, 1.0);
                let yv = ints(84, 1.0);
                let p = ConvParams::new(ints(4 * 9, 1.0 / 16.0), None, (2, 2), (3, 3)).unwrap();
                let (a, b) = (a as f32, b as f32);
                let opts = ConvOptions { causal_pad_time: true, ..Default::default() };
                let mixed: Vec<f32> = xv.iter().zip(&yv).map(|(p, q)| a * p + b * q).collect();
                let lhs = conv2d(&Tensor4::from_vec([1, 2, 6, 7], mixed).unwrap(), &p, opts).unwrap();
                let fx = conv2d(&Tensor4::from_vec([1, 2, 6, 7], xv).unwrap(), &p, opts).unwrap();
                let fy = conv2d(&Tensor4::from_vec([1, 2, 6, 7], yv).unwrap(), &p, opts).unwrap();
                for ((l, u), v) in lhs.data().iter().zip(fx.data()).zip(fy.data()) {
                    prop_assert!(((l - (a * u + b * v)) as f64).abs() <= 1e-9);
                }
            }
        }
    }
}
