//! ERB band merging (257 bins → 129 bands) and band splitting back.
//!
//! Bins below `n_low` pass through unchanged. Each remaining bin is assigned
//! to the band whose center is nearest on the ERB-rate scale
//! `21.4·log10(1 + 0.00437·f)`; centers are spaced uniformly on that scale
//! from the first high bin up to Nyquist. Merging averages the bins of a band,
//! splitting copies each band value back to its bins, so
//! `merge(split(b)) = b` exactly and `split(merge(x)) = x` for any `x` that is
//! constant within every band.

use crate::nn::FeatureTensor;
use crate::{invalid, Result};

pub fn hz_to_erb_rate(f: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * f).log10()
}

pub fn erb_rate_to_hz(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 0.00437
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErbFilterbank {
    n_bins: usize,
    n_low: usize,
    n_erb: usize,
    /// Band index of every high bin.
    assignment: Vec<usize>,
    /// ERB-rate centers of the high bands.
    centers: Vec<f64>,
}

impl Default for ErbFilterbank {
    fn default() -> Self {
        make_erb_filterbank()
    }
}

/// The 512-point / 16 kHz filterbank: 65 low bins kept, 192 high bins → 64 bands.
pub fn make_erb_filterbank() -> ErbFilterbank {
    ErbFilterbank::new(512, 16_000, 65, 64).expect("default filterbank geometry is valid")
}

impl ErbFilterbank {
    pub fn new(fft_size: usize, sample_rate: u32, n_low: usize, n_erb: usize) -> Result<Self> {
        let n_bins = fft_size / 2 + 1;
        if n_low >= n_bins || n_erb < 2 || n_erb > n_bins - n_low {
            return invalid(format!("cannot map {} high bins to {n_erb} bands", n_bins.saturating_sub(n_low)));
        }
        let bin_hz = |k: usize| k as f64 * sample_rate as f64 / fft_size as f64;
        let lo = hz_to_erb_rate(bin_hz(n_low));
        let hi = hz_to_erb_rate(sample_rate as f64 / 2.0);
        let step = (hi - lo) / (n_erb - 1) as f64;
        let centers: Vec<f64> = (0..n_erb).map(|i| lo + i as f64 * step).collect();
        let assignment: Vec<usize> = (n_low..n_bins)
            .map(|k| {
                let pos = (hz_to_erb_rate(bin_hz(k)) - lo) / step;
                (pos.round().max(0.0) as usize).min(n_erb - 1)
            })
            .collect();
        let fb = Self { n_bins, n_low, n_erb, assignment, centers };
        if let Some(empty) = (0..n_erb).find(|&b| fb.band_width(b) == 0) {
            return invalid(format!("ERB band {empty} receives no bins; use fewer bands"));
        }
        Ok(fb)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_low(&self) -> usize {
        self.n_low
    }

    pub fn n_high(&self) -> usize {
        self.n_bins - self.n_low
    }

    pub fn n_erb(&self) -> usize {
        self.n_erb
    }

    pub fn n_bands(&self) -> usize {
        self.n_low + self.n_erb
    }

    /// ERB-rate center of every high band.
    pub fn centers_erb(&self) -> &[f64] {
        &self.centers
    }

    pub fn centers_hz(&self) -> Vec<f64> {
        self.centers.iter().map(|&e| erb_rate_to_hz(e)).collect()
    }

    /// Band (0-based among the ERB bands) that high bin `j` belongs to.
    pub fn band_of(&self, high_bin: usize) -> usize {
        self.assignment[high_bin]
    }

    fn band_width(&self, band: usize) -> usize {
        self.assignment.iter().filter(|&&b| b == band).count()
    }

    /// Membership matrix `[n_erb][n_high]`; every column sums to 1.
    pub fn filters(&self) -> Vec<f64> {
        let h = self.n_high();
        let mut m = vec![0.0; self.n_erb * h];
        for (j, &b) in self.assignment.iter().enumerate() {
            m[b * h + j] = 1.0;
        }
        m
    }

    /// Merge matrix `[n_erb][n_high]`: filters with L1-normalized rows.
    pub fn merge_weights(&self) -> Vec<f64> {
        let h = self.n_high();
        let mut m = self.filters();
        for row in m.chunks_exact_mut(h) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        m
    }

    /// Split matrix `[n_high][n_erb]`: transposed merge with rows renormalized to 1.
    pub fn split_weights(&self) -> Vec<f64> {
        let (h, e) = (self.n_high(), self.n_erb);
        let merge = self.merge_weights();
        let mut s = vec![0.0; h * e];
        for j in 0..h {
            let total: f64 = (0..e).map(|b| merge[b * h + j]).sum();
            for b in 0..e {
                s[j * e + b] = merge[b * h + j] / total;
            }
        }
        s
    }

    pub(crate) fn merge_row(&self, bins: &[f32], out: &mut [f32]) {
        out[..self.n_low].copy_from_slice(&bins[..self.n_low]);
        let high = &mut out[self.n_low..];
        let mut acc = vec![0.0f64; self.n_erb];
        let mut count = vec![0usize; self.n_erb];
        for (j, &b) in self.assignment.iter().enumerate() {
            acc[b] += bins[self.n_low + j] as f64;
            count[b] += 1;
        }
        for ((o, a), c) in high.iter_mut().zip(acc).zip(count) {
            *o = (a / c as f64) as f32;
        }
    }

    pub(crate) fn split_row(&self, bands: &[f32], out: &mut [f32]) {
        out[..self.n_low].copy_from_slice(&bands[..self.n_low]);
        for (j, &b) in self.assignment.iter().enumerate() {
            out[self.n_low + j] = bands[self.n_low + b];
        }
    }
}

/// Compresses the last axis from `n_bins` bins to `n_bands` bands.
pub fn band_merge(x: &FeatureTensor, fb: &ErbFilterbank) -> Result<FeatureTensor> {
    if x.bands() != fb.n_bins() {
        return invalid(format!("band_merge expects {} bins, got {}", fb.n_bins(), x.bands()));
    }
    let mut out = FeatureTensor::zeros(x.channels(), x.frames(), fb.n_bands());
    for c in 0..x.channels() {
        for l in 0..x.frames() {
            fb.merge_row(x.row(c, l), out.row_mut(c, l));
        }
    }
    Ok(out)
}

/// Expands the last axis from `n_bands` bands back to `n_bins` bins.
pub fn band_split(x: &FeatureTensor, fb: &ErbFilterbank) -> Result<FeatureTensor> {
    if x.bands() != fb.n_bands() {
        return invalid(format!("band_split expects {} bands, got {}", fb.n_bands(), x.bands()));
    }
    let mut out = FeatureTensor::zeros(x.channels(), x.frames(), fb.n_bins());
    for c in 0..x.channels() {
        for l in 0..x.frames() {
            fb.split_row(x.row(c, l), out.row_mut(c, l));
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

    fn random(c: usize, t: usize, f: usize, seed: u64, lo: f32) -> FeatureTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureTensor::from_vec(c, t, f, (0..c * t * f).map(|_| rng.random_range(lo..1.0)).collect()).unwrap()
    }

    #[test]
    fn geometry() {
        let fb = make_erb_filterbank();
        assert_eq!((fb.n_bins(), fb.n_low(), fb.n_high(), fb.n_erb(), fb.n_bands()), (257, 65, 192, 64, 129));
        // Bin 65 is the first high bin and lands in band 0; bin 256 in the last band.
        assert_eq!(fb.band_of(0), 0);
        assert_eq!(fb.band_of(191), 63);
    }

    #[test]
    fn low_boundary_bin_is_in_no_filter() {
        let fb = make_erb_filterbank();
        let mut x = FeatureTensor::zeros(1, 1, 257);
        x.set(0, 0, 64, 1.0);
        let m = band_merge(&x, &fb).unwrap();
        assert_eq!(m.get(0, 0, 64), 1.0);
        assert!(m.row(0, 0)[65..].iter().all(|&v| v == 0.0));
        let mut x = FeatureTensor::zeros(1, 1, 257);
        x.set(0, 0, 65, 1.0);
        let m = band_merge(&x, &fb).unwrap();
        assert!(m.get(0, 0, 65) > 0.0);
        assert!(m.row(0, 0)[66..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn filters_form_partition_of_unity() {
        let fb = make_erb_filterbank();
        let f = fb.filters();
        for j in 0..192 {
            let s: f64 = (0..64).map(|b| f[b * 192 + j]).sum();
            assert_eq!(s, 1.0);
        }
        let m = fb.merge_weights();
        for row in m.chunks_exact(192) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let s = fb.split_weights();
        for row in s.chunks_exact(64) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn centers_are_erb_uniform() {
        let fb = make_erb_filterbank();
        let lo = 21.4 * (1.0 + 0.00437 * 65.0 * 31.25f64).log10();
        let hi = 21.4 * (1.0 + 0.00437 * 8000.0f64).log10();
        let c = fb.centers_erb();
        for (i, &v) in c.iter().enumerate() {
            assert!((v - (lo + (hi - lo) * i as f64 / 63.0)).abs() < 1e-9);
        }
        let hz = fb.centers_hz();
        assert!(hz.windows(2).all(|w| w[1] > w[0]));
        assert!((hz[0] - 2031.25).abs() < 1e-6 && (hz[63] - 8000.0).abs() < 1e-6);
    }

    #[test]
    fn constants_pass_through() {
        let fb = make_erb_filterbank();
        let ones = FeatureTensor::from_vec(1, 2, 257, vec![1.0; 514]).unwrap();
        let m = band_merge(&ones, &fb).unwrap();
        assert!(m.data().iter().all(|&v| v == 1.0));
        let s = band_split(&m, &fb).unwrap();
        assert_eq!(s, ones);
    }

    #[test]
    fn low_band_identity() {
        let fb = make_erb_filterbank();
        let mut x = FeatureTensor::zeros(1, 1, 257);
        x.set(0, 0, 10, 3.5);
        let m = band_merge(&x, &fb).unwrap();
        for k in 0..129 {
            assert_eq!(m.get(0, 0, k), if k == 10 { 3.5 } else { 0.0 });
        }
    }

    #[test]
    fn merge_and_split_match_dense_matrices() {
        let fb = make_erb_filterbank();
        let x = random(2, 3, 257, 11, -1.0);
        let m = band_merge(&x, &fb).unwrap();
        let merge = fb.merge_weights();
        let b = random(2, 3, 129, 12, -1.0);
        let s = band_split(&b, &fb).unwrap();
        let split = fb.split_weights();
        for c in 0..2 {
            for l in 0..3 {
                let high: Vec<f64> = x.row(c, l)[65..].iter().map(|&v| v as f64).collect();
                let want = oracles::dense_matvec(&merge, 64, 192, &high);
                for (k, w) in want.iter().enumerate() {
                    assert!((m.get(c, l, 65 + k) as f64 - w).abs() <= 1e-6 * w.abs().max(1.0));
                }
                let bands: Vec<f64> = b.row(c, l)[65..].iter().map(|&v| v as f64).collect();
                let want = oracles::dense_matvec(&split, 192, 64, &bands);
                for (k, w) in want.iter().enumerate() {
                    assert!((s.get(c, l, 65 + k) as f64 - w).abs() <= 1e-6 * w.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn band_constant_round_trip_is_exact() {
        let fb = make_erb_filterbank();
        let b = random(1, 4, 129, 13, -1.0);
        let x = band_split(&b, &fb).unwrap();
        assert_eq!(band_split(&band_merge(&x, &fb).unwrap(), &fb).unwrap(), x);
    }

    #[test]
    fn shape_errors() {
        let fb = make_erb_filterbank();
        assert!(band_merge(&FeatureTensor::zeros(1, 1, 129), &fb).is_err());
        assert!(band_split(&FeatureTensor::zeros(1, 1, 257), &fb).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn merge_after_split_is_identity(seed in any::<u64>()) {
                let fb = make_erb_filterbank();
                let b = random(2, 3, 129, seed, -5.0);
                let back = band_merge(&band_split(&b, &fb).unwrap(), &fb).unwrap();
                for (u, v) in back.data().iter().zip(b.data()) {
                    prop_assert!((u - v).abs() <= 1e-6 * v.abs().max(1.0));
                }
            }

            #[test]
            fn nonnegativity_is_preserved(seed in any::<u64>()) {
                let fb = make_erb_filterbank();
                let x = random(1, 2, 257, seed, 0.0);
                prop_assert!(band_merge(&x, &fb).unwrap().data().iter().all(|&v| v >= 0.0));
                let b = random(1, 2, 129, seed, 0.0);
                prop_assert!(band_split(&b, &fb).unwrap().data().iter().all(|&v| v >= 0.0));
            }
        }
    }
}
