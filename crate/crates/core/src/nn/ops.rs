use super::gru::sigmoid;
use super::Tensor4;
use crate::{invalid, Result};

/// Inference-mode batch normalization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub eps: f32,
}

impl BatchNorm {
    pub const DEFAULT_EPS: f32 = 1e-5;

    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps: 0.0,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// `(x − mean)/sqrt(var + eps)·gamma + beta` per channel.
pub fn batch_norm_infer(x: &Tensor4, p: &BatchNorm) -> Result<Tensor4> {
    let c = x.channels();
    if [p.gamma.len(), p.beta.len(), p.running_mean.len(), p.running_var.len()].iter().any(|&l| l != c) {
        return invalid(format!("batch norm has {} channels, input has {c}", p.gamma.len()));
    }
    let mut out = x.clone();
    for ch in 0..c {
        let scale = p.gamma[ch] / (p.running_var[ch] + p.eps).sqrt();
        let shift = p.beta[ch] - p.running_mean[ch] * scale;
        for b in 0..x.batch() {
            for v in out.plane_mut(b, ch) {
                *v = *v * scale + shift;
            }
        }
    }
    Ok(out)
}

/// Parametric ReLU with one slope per channel (or a single shared slope).
pub fn prelu(x: &Tensor4, alpha: &[f32]) -> Result<Tensor4> {
    let c = x.channels();
    if alpha.len() != c && alpha.len() != 1 {
        return invalid(format!("PReLU has {} slopes, input has {c} channels", alpha.len()));
    }
    let mut out = x.clone();
    for ch in 0..c {
        let a = if alpha.len() == 1 { alpha[0] } else { alpha[ch] };
        for b in 0..x.batch() {
            for v in out.plane_mut(b, ch) {
                if *v < 0.0 {
                    *v *= a;
                }
            }
        }
    }
    Ok(out)
}

/// Largest `f32` strictly below 1.
const BELOW_ONE: f32 = 1.0 - f32::EPSILON / 2.0;

/// Elementwise tanh, kept strictly inside (−1, 1) even where `f32` rounding
/// would saturate.
pub fn tanh_act(x: &Tensor4) -> Tensor4 {
    x.map(|v| v.tanh().clamp(-BELOW_ONE, BELOW_ONE))
}

pub fn sigmoid_act(x: &Tensor4) -> Tensor4 {
    x.map(sigmoid)
}

/// Channel index that output channel `i` is read from.
#[inline]
pub fn shuffle_source(i: usize, channels: usize, groups: usize) -> usize {
    let per_group = channels / groups;
    (i % groups) * per_group + i / groups
}

/// Reshape channels to `(groups, c/groups)`, transpose, flatten.
///
/// `channel_shuffle(channel_shuffle(x, g), c/g)` is the identity.
pub fn channel_shuffle(x: &Tensor4, groups: usize) -> Result<Tensor4> {
    let c = x.channels();
    if groups == 0 || c % groups != 0 {
        return invalid(format!("{c} channels are not divisible into {groups} groups"));
    }
    let mut out = Tensor4::zeros(x.shape());
    for b in 0..x.batch() {
        for i in 0..c {
            out.plane_mut(b, i).copy_from_slice(x.plane(b, shuffle_source(i, c, groups)));
        }
    }
    Ok(out)
}

/// Normalizes `x` to zero mean, unit variance, then applies an elementwise affine map.
pub fn layer_norm(x: &mut [f32], gamma: &[f32], beta: &[f32], eps: f32) {
    let n = x.len() as f32;
    let mean = x.iter().sum::<f32>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
    let inv = 1.0 / (var + eps).sqrt();
    for ((v, g), b) in x.iter_mut().zip(gamma).zip(beta) {
        *v = (*v - mean) * inv * g + b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: [usize; 4], seed: u64) -> Tensor4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor4::from_vec(shape, (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap()
    }

    #[test]
    fn identity_batch_norm() {
        let x = random([2, 3, 4, 5], 1);
        assert_eq!(batch_norm_infer(&x, &BatchNorm::identity(3)).unwrap(), x);
    }

    #[test]
    fn batch_norm_of_mean_is_beta() {
        let p = BatchNorm {
            gamma: vec![2.0, 0.5],
            beta: vec![0.25, -1.5],
            running_mean: vec![1.5, -0.75],
            running_var: vec![4.0, 0.1],
            eps: 1e-5,
        };
        let mut x = Tensor4::zeros([1, 2, 3, 3]);
        x.plane_mut(0, 0).fill(1.5);
        x.plane_mut(0, 1).fill(-0.75);
        let y = batch_norm_infer(&x, &p).unwrap();
        assert!(y.plane(0, 0).iter().all(|v| (v - 0.25).abs() < 1e-7));
        assert!(y.plane(0, 1).iter().all(|v| (v + 1.5).abs() < 1e-7));
        let slow = oracles::batch_norm(&random([1, 2, 3, 3], 2), &p);
        let fast = batch_norm_infer(&random([1, 2, 3, 3], 2), &p).unwrap();
        assert!(oracles::rel_linf(fast.data(), slow.data()) < 1e-5);
    }

    #[test]
    fn prelu_cases() {
        let x = random([1, 3, 4, 4], 3);
        assert_eq!(prelu(&x, &[1.0, 1.0, 1.0]).unwrap(), x);
        let pos = x.map(f32::abs);
        assert_eq!(prelu(&pos, &[0.1, -2.0, 0.3]).unwrap(), pos);
        assert!(prelu(&x, &[0.1, 0.2]).is_err());
        let y = prelu(&x, &[0.25]).unwrap();
        for (a, b) in x.data().iter().zip(y.data()) {
            assert_eq!(*b, if *a < 0.0 { a * 0.25 } else { *a });
        }
    }

    #[test]
    fn tanh_range_and_values() {
        let x = random([1, 2, 5, 5], 4).map(|v| v * 4.0);
        let y = tanh_act(&x);
        for (a, b) in x.data().iter().zip(y.data()) {
            assert!(*b > -1.0 && *b < 1.0);
            assert!(((*a as f64).tanh() - *b as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn shuffle_permutation() {
        let mut x = Tensor4::zeros([1, 4, 1, 1]);
        for c in 0..4 {
            x.set(0, c, 0, 0, c as f32);
        }
        assert_eq!(channel_shuffle(&x, 1).unwrap(), x);
        let y = channel_shuffle(&x, 2).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0, 1.0, 3.0]);
        assert!(channel_shuffle(&x, 3).is_err());
    }

    #[test]
    fn layer_norm_standardizes() {
        let mut v = vec![1.0, 2.0, 3.0, 4.0];
        layer_norm(&mut v, &[1.0; 4], &[0.0; 4], 0.0);
        let mean: f32 = v.iter().sum::<f32>() / 4.0;
        let var: f32 = v.iter().map(|x| x * x).sum::<f32>() / 4.0;
        assert!(mean.abs() < 1e-6 && (var - 1.0).abs() < 1e-5);
        let mut z = vec![0.0; 6];
        layer_norm(&mut z, &[3.0; 6], &[0.0; 6], 1e-8);
        assert!(z.iter().all(|&x| x == 0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn shuffle_inverse_is_identity(seed in any::<u64>(), groups in 1usize..5, per in 1usize..5) {
                let x = random([1, groups * per, 2, 3], seed);
                let y = channel_shuffle(&x, groups).unwrap();
                prop_assert_eq!(channel_shuffle(&y, per).unwrap(), x);
            }
        }
    }
}
