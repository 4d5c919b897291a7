use super::scene::{Point, SceneSpec};
use crate::{Error, Result};

pub const SPEED_OF_SOUND: f64 = 343.0;

/// Extra response length beyond RT60.
const TAIL_SECS: f64 = 0.05;

/// Onset threshold relative to the peak tap.
const ONSET_FRACTION: f64 = 0.01;

/// Two-microphone room impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub sample_rate: u32,
    /// One tap sequence per microphone.
    pub taps: [Vec<f64>; 2],
    /// First tap above 1% of the channel peak.
    pub direct_path_index: [usize; 2],
}

impl Rir {
    pub fn len(&self) -> usize {
        self.taps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps[0].is_empty()
    }
}

/// Uniform wall absorption giving `rt60` by Sabine's formula.
pub fn sabine_absorption(room: Point, rt60: f64) -> Result<f64> {
    if room.iter().any(|&d| !(d > 0.0)) || !(rt60 > 0.0) {
        return Err(Error::Parameter(format!("room {room:?} with RT60 {rt60} s is not physical")));
    }
    let [lx, ly, lz] = room;
    let volume = lx * ly * lz;
    let surface = 2.0 * (lx * ly + lx * lz + ly * lz);
    let alpha = 0.1611 * volume / (surface * rt60);
    if alpha >= 1.0 {
        return Err(Error::Parameter(format!(
            "RT60 {rt60} s needs absorption {alpha:.3} >= 1 in a {lx}x{ly}x{lz} m room"
        )));
    }
    Ok(alpha)
}

/// Smallest reflection order whose images can still fall inside the
/// truncation horizon of `scene`.
pub fn default_max_order(scene: &SceneSpec) -> usize {
    let horizon = SPEED_OF_SOUND * (scene.rt60 + TAIL_SECS);
    scene.room_dims.iter().map(|&l| 2 * ((horizon / l).ceil() as usize + 1)).sum()
}

/// Image-method RIR from the speech source to both microphones.
pub fn image_rir(scene: &SceneSpec, max_order: Option<usize>) -> Result<Rir> {
    image_rir_at(scene, scene.source_position, max_order)
}

/// Image-method RIR from the noise source to both microphones.
pub fn noise_rir(scene: &SceneSpec, max_order: Option<usize>) -> Result<Rir> {
    image_rir_at(scene, scene.noise_position, max_order)
}

/// Image-method RIR from an arbitrary `source` inside the scene's room.
///
/// Images farther than `c·(RT60 + 50 ms)` are dropped since they would land
/// past the truncation point. `max_order` bounds the total reflection count;
/// `None` leaves only the distance bound.
pub fn image_rir_at(scene: &SceneSpec, source: Point, max_order: Option<usize>) -> Result<Rir> {
    let alpha = sabine_absorption(scene.room_dims, scene.rt60)?;
    let beta = (1.0 - alpha).sqrt();
    let fs = scene.sample_rate as f64;
    if !(fs > 0.0) {
        return Err(Error::Parameter("sample rate must be positive".into()));
    }
    let len = ((scene.rt60 + TAIL_SECS) * fs).ceil() as usize;
    let horizon = SPEED_OF_SOUND * (scene.rt60 + TAIL_SECS);
    let max_order = max_order.unwrap_or(usize::MAX);
    let room = scene.room_dims;

    // Per-axis image coordinates and reflection counts.
    let axis_images = |axis: usize| -> Vec<(f64, usize)> {
        let l = room[axis];
        let n_max = (horizon / (2.0 * l)).ceil() as i64 + 1;
        let mut v = Vec::new();
        for n in -n_max..=n_max {
            for q in 0..=1i64 {
                let x = 2.0 * n as f64 * l + (1 - 2 * q) as f64 * source[axis];
                let refl = ((n - q).abs() + n.abs()) as usize;
                if refl <= max_order {
                    v.push((x, refl));
                }
            }
        }
        v
    };
    let (ix, iy, iz) = (axis_images(0), axis_images(1), axis_images(2));

    let mut taps = [vec![0.0; len], vec![0.0; len]];
    for (m, mic) in scene.mic_positions.iter().enumerate() {
        for &(x, rx) in &ix {
            let dx2 = (x - mic[0]).powi(2);
            if dx2 > horizon * horizon {
                continue;
            }
            for &(y, ry) in &iy {
                let dxy2 = dx2 + (y - mic[1]).powi(2);
                if dxy2 > horizon * horizon || rx + ry > max_order {
                    continue;
                }
                for &(z, rz) in &iz {
                    let refl = rx + ry + rz;
                    if refl > max_order {
                        continue;
                    }
                    let d = (dxy2 + (z - mic[2]).powi(2)).sqrt();
                    if d > horizon {
                        continue;
                    }
                    let delay = (d * fs / SPEED_OF_SOUND).round() as usize;
                    if delay < len {
                        taps[m][delay] += beta.powi(refl as i32) / (4.0 * std::f64::consts::PI * d.max(1e-9));
                    }
                }
            }
        }
    }
    let direct_path_index = [onset(&taps[0]), onset(&taps[1])];
    Ok(Rir { sample_rate: scene.sample_rate, taps, direct_path_index })
}

fn onset(taps: &[f64]) -> usize {
    let peak = taps.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    taps.iter().position(|v| v.abs() > ONSET_FRACTION * peak).unwrap_or(0)
}

/// Backward-integrated energy decay curve in dB, normalized to 0 dB at tap 0.
pub fn schroeder_curve_db(taps: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut edc: Vec<f64> = taps.iter().rev().map(|v| {
        acc += v * v;
        acc
    }).collect();
    edc.reverse();
    let total = edc.first().copied().unwrap_or(0.0);
    edc.iter().map(|&e| if total > 0.0 && e > 0.0 { 10.0 * (e / total).log10() } else { f64::NEG_INFINITY }).collect()
}

/// Pole of the DC blocker applied before decay measurement (about 50 Hz at 16 kHz).
const DC_BLOCK_POLE: f64 = 0.98;

/// RT60 estimated from the −5 dB to −25 dB span of the Schroeder curve
/// (least-squares line, extrapolated to 60 dB of decay).
///
/// The taps are DC-blocked first. Image-method responses with positive
/// reflection coefficients accumulate a coherent low-frequency tail that
/// would otherwise dominate the late decay.
pub fn schroeder_rt60(taps: &[f64], sample_rate: u32) -> Result<f64> {
    let (mut prev_x, mut prev_y) = (0.0, 0.0);
    let blocked: Vec<f64> = taps
        .iter()
        .map(|&x| {
            prev_y = x - prev_x + DC_BLOCK_POLE * prev_y;
            prev_x = x;
            prev_y
        })
        .collect();
    let curve = schroeder_curve_db(&blocked);
    let fs = sample_rate as f64;
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .enumerate()
        .filter(|(_, &db)| (-25.0..=-5.0).contains(&db))
        .map(|(i, &db)| (i as f64 / fs, db))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Numerical("decay curve does not span -5 to -25 dB".into()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let md = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - md)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::Numerical("decay curve is not decreasing".into()));
    }
    Ok(-60.0 / slope)
}
