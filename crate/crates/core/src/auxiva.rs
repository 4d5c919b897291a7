//! Two-source auxiliary-function independent vector analysis.
//!
//! Per frequency bin `k` the demixing matrix `W(k)` holds the row vectors
//! `w_mᴴ(k)`; `y_m(k,l) = w_mᴴ(k) Y(k,l)`. One sweep updates each source in
//! turn with
//!
//! ```text
//! r_m(l)  = sqrt(Σ_k |w_mᴴ(k) Y(k,l)|²)                 (floored at eps)
//! V_m(k)  = mean_l [ G'(r_m)/r_m · Y(k,l) Y(k,l)ᴴ ]
//! w_m(k)  = (W(k) V_m(k))⁻¹ e_m
//! w_m(k) /= sqrt(w_mᴴ(k) V_m(k) w_m(k))
//! ```
//!
//! With the spherical Laplace contrast `G(r) = r`, the weight is `1/r_m`.
//!
//! After the sweeps the scale ambiguity is removed by projecting each source
//! back onto a reference microphone, and the outputs are ordered so that the
//! source with the more super-Gaussian frame envelope (speech) comes first.

use crate::dsp::{ComplexSpectrogram, StftConfig};
use crate::{invalid, Complex64, Error, Result};

pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Relative determinant threshold below which a 2×2 system counts as singular.
const SINGULAR_RTOL: f64 = 1e-14;
/// `det V / (tr V)²` below which a weighted covariance is treated as rank-deficient.
const COVARIANCE_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Contrast {
    /// `G(r) = r`, so `G'(r)/r = 1/r`.
    #[default]
    Laplace,
}

impl Contrast {
    fn weight(self, r: f64) -> f64 {
        match self {
            Contrast::Laplace => 1.0 / r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvaConfig {
    pub iterations: usize,
    pub eps: f64,
    pub contrast: Contrast,
    pub ref_channel: usize,
}

impl Default for IvaConfig {
    fn default() -> Self {
        Self { iterations: 20, eps: 1e-8, contrast: Contrast::Laplace, ref_channel: 0 }
    }
}

impl IvaConfig {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return invalid("IVA needs at least one iteration");
        }
        if !(self.eps > 0.0) {
            return invalid("IVA eps must be positive");
        }
        if self.ref_channel > 1 {
            return invalid(format!("reference channel {} out of range", self.ref_channel));
        }
        Ok(())
    }
}

/// Per-bin 2×2 demixing matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DemixingMatrices {
    w: Vec<Mat2>,
}

impl DemixingMatrices {
    pub fn identity(n_bins: usize) -> Self {
        Self { w: vec![[[ONE, ZERO], [ZERO, ONE]]; n_bins] }
    }

    pub fn from_matrices(w: Vec<Mat2>) -> Self {
        Self { w }
    }

    pub fn n_bins(&self) -> usize {
        self.w.len()
    }

    pub fn get(&self, k: usize) -> &Mat2 {
        &self.w[k]
    }

    pub fn matrices(&self) -> &[Mat2] {
        &self.w
    }

    /// The vector `w_m(k)` (conjugate of row `m`).
    pub fn filter(&self, k: usize, m: usize) -> [Complex64; 2] {
        [self.w[k][m][0].conj(), self.w[k][m][1].conj()]
    }

    fn swap_rows(&mut self) {
        for w in &mut self.w {
            w.swap(0, 1);
        }
    }
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn frob_sq(a: &Mat2) -> f64 {
    a.iter().flatten().map(|v| v.norm_sqr()).sum()
}

/// Inverse by adjugate, `None` when numerically singular.
pub fn inverse(a: &Mat2) -> Option<Mat2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = frob_sq(a);
    if !(det.norm() > SINGULAR_RTOL * scale) || !det.is_finite() {
        return None;
    }
    Some([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
}

/// Hermitian `Y Yᴴ` entries for every (frame, bin).
struct Outer {
    p00: Vec<f64>,
    p11: Vec<f64>,
    p01: Vec<Complex64>,
}

impl Outer {
    fn new(y: &ComplexSpectrogram) -> Self {
        let n = y.frames() * y.bins();
        let (c0, c1) = (y.channel(0), y.channel(1));
        let mut o = Self { p00: Vec::with_capacity(n), p11: Vec::with_capacity(n), p01: Vec::with_capacity(n) };
        for (a, b) in c0.iter().zip(c1) {
            o.p00.push(a.norm_sqr());
            o.p11.push(b.norm_sqr());
            o.p01.push(a * b.conj());
        }
        o
    }
}

/// Weighted covariances of one source, `[bin]`.
fn weighted_covariance(y: &ComplexSpectrogram, outer: &Outer, w: &DemixingMatrices, m: usize, cfg: &IvaConfig) -> Vec<Mat2> {
    let (frames, bins) = (y.frames(), y.bins());
    let mut v00 = vec![0.0; bins];
    let mut v11 = vec![0.0; bins];
    let mut v01 = vec![ZERO; bins];
    for l in 0..frames {
        let (f0, f1) = (y.frame(0, l), y.frame(1, l));
        let mut energy = 0.0;
        for k in 0..bins {
            let row = &w.w[k][m];
            energy += (row[0] * f0[k] + row[1] * f1[k]).norm_sqr();
        }
        let phi = cfg.contrast.weight(energy.sqrt().max(cfg.eps)) / frames as f64;
        let base = l * bins;
        for k in 0..bins {
            v00[k] += phi * outer.p00[base + k];
            v11[k] += phi * outer.p11[base + k];
            v01[k] += outer.p01[base + k] * phi;
        }
    }
    (0..bins)
        .map(|k| [[Complex64::new(v00[k], 0.0), v01[k]], [v01[k].conj(), Complex64::new(v11[k], 0.0)]])
        .collect()
}

/// Solves for and normalizes `w_m(k)`; returns the filter and the covariance
/// actually used (regularized if the first solve was singular).
fn update_filter(w: &Mat2, v: Mat2, m: usize, eps: f64, bin: usize) -> Result<([Complex64; 2], Mat2)> {
    let solve = |v: &Mat2| {
        let tr = v[0][0].re + v[1][1].re;
        let det = v[0][0].re * v[1][1].re - v[0][1].norm_sqr();
        if !(det > COVARIANCE_RTOL * tr * tr) {
            return None;
        }
        inverse(&mat_mul(w, v)).map(|inv| [inv[0][m], inv[1][m]])
    };
    let (filter, v) = match solve(&v) {
        Some(f) => (f, v),
        None => {
            let tr = (v[0][0].re + v[1][1].re) / 2.0;
            let load = eps * if tr > 0.0 { tr } else { 1.0 };
            let mut reg = v;
            reg[0][0] += load;
            reg[1][1] += load;
            match solve(&reg) {
                Some(f) => (f, reg),
                None => return Err(Error::Numerical(format!("W·V singular at bin {bin} for source {m}"))),
            }
        }
    };
    let vw = [v[0][0] * filter[0] + v[0][1] * filter[1], v[1][0] * filter[0] + v[1][1] * filter[1]];
    let quad = (filter[0].conj() * vw[0] + filter[1].conj() * vw[1]).re;
    if !(quad > 0.0) || !quad.is_finite() {
        return Err(Error::Numerical(format!("non-positive wᴴVw at bin {bin} for source {m}")));
    }
    let s = 1.0 / quad.sqrt();
    Ok(([filter[0] * s, filter[1] * s], v))
}

fn check_two_channel(y: &ComplexSpectrogram) -> Result<()> {
    if y.channels() != 2 {
        return invalid(format!("IVA needs exactly 2 channels, got {}", y.channels()));
    }
    Ok(())
}

fn sweep_with(y: &ComplexSpectrogram, outer: &Outer, w: &mut DemixingMatrices, cfg: &IvaConfig, used: Option<&mut Vec<[Mat2; 2]>>) -> Result<()> {
    let bins = y.bins();
    let mut record = used.map(|u| {
        u.clear();
        u.resize(bins, [[[ZERO; 2]; 2]; 2]);
        u
    });
    for m in 0..2 {
        let cov = weighted_covariance(y, outer, w, m, cfg);
        for (k, v) in cov.into_iter().enumerate() {
            let (filter, v_used) = update_filter(&w.w[k], v, m, cfg.eps, k)?;
            w.w[k][m] = [filter[0].conj(), filter[1].conj()];
            if let Some(r) = record.as_deref_mut() {
                r[k][m] = v_used;
            }
        }
    }
    Ok(())
}

/// One full update of both sources.
pub fn iva_sweep(y: &ComplexSpectrogram, w: &DemixingMatrices, cfg: &IvaConfig) -> Result<DemixingMatrices> {
    iva_sweep_with_covariances(y, w, cfg).map(|(w, _)| w)
}

/// [`iva_sweep`] that also returns the weighted covariances `V_m(k)` used for
/// each update, indexed `[bin][source]`.
pub fn iva_sweep_with_covariances(y: &ComplexSpectrogram, w: &DemixingMatrices, cfg: &IvaConfig) -> Result<(DemixingMatrices, Vec<[Mat2; 2]>)> {
    check_two_channel(y)?;
    if w.n_bins() != y.bins() {
        return invalid(format!("{} demixing matrices for {} bins", w.n_bins(), y.bins()));
    }
    let outer = Outer::new(y);
    let mut next = w.clone();
    let mut used = Vec::new();
    sweep_with(y, &outer, &mut next, cfg, Some(&mut used))?;
    Ok((next, used))
}

/// `y_m(k,l) = w_mᴴ(k) Y(k,l)` for both sources.
pub fn demix(y: &ComplexSpectrogram, w: &DemixingMatrices) -> Result<ComplexSpectrogram> {
    check_two_channel(y)?;
    if w.n_bins() != y.bins() {
        return invalid("demixing matrices do not match bin count");
    }
    let mut out = ComplexSpectrogram::zeros(2, y.frames(), y.bins());
    for l in 0..y.frames() {
        for k in 0..y.bins() {
            let (a, b) = (y.get(0, l, k), y.get(1, l, k));
            let m = &w.w[k];
            out.set(0, l, k, m[0][0] * a + m[0][1] * b);
            out.set(1, l, k, m[1][0] * a + m[1][1] * b);
        }
    }
    Ok(out)
}

/// Rescales each separated source to its image at microphone `ref_channel`:
/// `image_m = (W⁻¹)[ref][m] · y_m`. The images sum to the reference channel.
pub fn projection_back(y_sep: &ComplexSpectrogram, w: &DemixingMatrices, ref_channel: usize) -> Result<ComplexSpectrogram> {
    check_two_channel(y_sep)?;
    if ref_channel > 1 {
        return invalid(format!("reference channel {ref_channel} out of range"));
    }
    if w.n_bins() != y_sep.bins() {
        return invalid("demixing matrices do not match bin count");
    }
    let gains: Vec<[Complex64; 2]> = w
        .w
        .iter()
        .enumerate()
        .map(|(k, m)| {
            inverse(m)
                .map(|a| a[ref_channel])
                .ok_or_else(|| Error::Numerical(format!("demixing matrix singular at bin {k}")))
        })
        .collect::<Result<_>>()?;
    let mut out = y_sep.clone();
    for c in 0..2 {
        for l in 0..y_sep.frames() {
            for (v, g) in out.frame_mut(c, l).iter_mut().zip(&gains) {
                *v *= g[c];
            }
        }
    }
    Ok(out)
}

/// Excess kurtosis of the per-frame magnitude envelope `sqrt(Σ_k |y(k,l)|²)`.
pub fn envelope_kurtosis(spec: &ComplexSpectrogram, channel: usize) -> f64 {
    let env: Vec<f64> = (0..spec.frames())
        .map(|l| spec.frame(channel, l).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let n = env.len() as f64;
    let mean = env.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for e in &env {
        let d = (e - mean) * (e - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    let k = m4 / (m2 * m2) - 3.0;
    if k.is_finite() {
        k
    } else {
        f64::NEG_INFINITY
    }
}

/// Permutation placing the more super-Gaussian source first; ties keep the order.
pub fn order_sources(y_sep: &ComplexSpectrogram) -> Result<[usize; 2]> {
    check_two_channel(y_sep)?;
    let k0 = envelope_kurtosis(y_sep, 0);
    let k1 = envelope_kurtosis(y_sep, 1);
    Ok(if k1 > k0 { [1, 0] } else { [0, 1] })
}

/// Runs `cfg.iterations` sweeps from the identity, projects back to
/// `cfg.ref_channel` and orders the outputs (speech, noise).
pub fn auxiva_separate(y: &ComplexSpectrogram, cfg: &IvaConfig) -> Result<(ComplexSpectrogram, DemixingMatrices)> {
    cfg.validate()?;
    check_two_channel(y)?;
    if y.frames() < 2 {
        return invalid(format!("IVA needs at least 2 frames, got {}", y.frames()));
    }
    if y.is_all_zero() {
        return Err(Error::DegenerateInput("all-zero input has a singular covariance".into()));
    }
    let outer = Outer::new(y);
    let mut w = DemixingMatrices::identity(y.bins());
    for _ in 0..cfg.iterations {
        sweep_with(y, &outer, &mut w, cfg, None)?;
    }
    let images = projection_back(&demix(y, &w)?, &w, cfg.ref_channel)?;
    let perm = order_sources(&images)?;
    if perm == [1, 0] {
        w.swap_rows();
        let swapped = ComplexSpectrogram::stack(&[&images.select(1), &images.select(0)])?;
        return Ok((swapped, w));
    }
    Ok((images, w))
}

/// Real multiply-accumulates of one sweep per second of audio.
///
/// Counting convention (complex MAC = 4 real MACs, complex·real = 2), per
/// frame, bin and source:
///
/// * demixing `w_mᴴ Y`: 2 complex MACs = 8
/// * power `|y_m|²`: 2
/// * weighted covariance update, Hermitian so 2 real + 1 complex entry: 1 + 1 + 2 = 4
///
/// i.e. 28 real MACs per (frame, bin) for two sources. The `Y Yᴴ` outer
/// products are computed once per utterance and the per-bin 2×2 solves once
/// per sweep regardless of duration, so neither scales with time and both are
/// excluded. The default geometry gives 28·257·62.5 ≈ 0.45 M per sweep.
pub fn iva_macs_per_sweep_per_second(stft: &StftConfig) -> f64 {
    const PER_CELL: f64 = 2.0 * (8.0 + 2.0 + 4.0);
    PER_CELL * stft.n_bins() as f64 * stft.frames_per_second()
}

/// [`iva_macs_per_sweep_per_second`] times the configured iteration count.
pub fn iva_macs_per_second(cfg: &IvaConfig, stft: &StftConfig) -> f64 {
    cfg.iterations as f64 * iva_macs_per_sweep_per_second(stft)
}
