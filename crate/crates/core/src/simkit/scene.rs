use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rir::sabine_absorption;
use crate::{invalid, Error, Result};

pub type Point = [f64; 3];

/// Sampling ranges for [`sample_scene`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConstraints {
    pub room_min: Point,
    pub room_max: Point,
    pub rt60_range: (f64, f64),
    pub distances: Vec<f64>,
    pub mic_spacing: f64,
    pub min_doa_diff_deg: f64,
    pub snr_range_db: (f64, f64),
    pub wall_margin: f64,
    pub max_attempts: usize,
    pub sample_rate: u32,
}

impl Default for SceneConstraints {
    fn default() -> Self {
        Self {
            room_min: [3.0, 3.0, 2.5],
            room_max: [10.0, 10.0, 3.0],
            rt60_range: (0.1, 0.4),
            distances: vec![0.5, 1.0, 2.0, 3.0],
            mic_spacing: 0.04,
            min_doa_diff_deg: 5.0,
            snr_range_db: (-10.0, 0.0),
            wall_margin: 0.1,
            max_attempts: 10_000,
            sample_rate: 16_000,
        }
    }
}

impl SceneConstraints {
    fn validate(&self) -> Result<()> {
        let ok = (0..3).all(|i| self.room_min[i] > 0.0 && self.room_min[i] <= self.room_max[i])
            && self.rt60_range.0 > 0.0
            && self.rt60_range.0 <= self.rt60_range.1
            && !self.distances.is_empty()
            && self.distances.iter().all(|&d| d > 0.0)
            && self.mic_spacing > 0.0
            && self.min_doa_diff_deg >= 0.0
            && self.snr_range_db.0 <= self.snr_range_db.1
            && self.wall_margin >= 0.0
            && self.sample_rate > 0;
        if !ok {
            return invalid(format!("inconsistent scene constraints {self:?}"));
        }
        Ok(())
    }
}

/// One simulated acoustic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub room_dims: Point,
    pub rt60: f64,
    pub mic_positions: [Point; 2],
    pub source_position: Point,
    pub noise_position: Point,
    pub snr_db: f64,
    pub seed: u64,
    pub sample_rate: u32,
}

impl SceneSpec {
    pub fn array_center(&self) -> Point {
        let [a, b] = self.mic_positions;
        [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]
    }

    pub fn source_distance(&self) -> f64 {
        dist(self.source_position, self.array_center())
    }

    pub fn noise_distance(&self) -> f64 {
        dist(self.noise_position, self.array_center())
    }

    /// |DOA(speech) − DOA(noise)| in degrees.
    pub fn doa_difference(&self) -> f64 {
        (doa_degrees(self.mic_positions, self.source_position) - doa_degrees(self.mic_positions, self.noise_position)).abs()
    }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Angle in degrees between the array axis (mic 1 → mic 2) and the
/// direction from the array center to `p`, in `[0, 180]`.
pub fn doa_degrees(mics: [Point; 2], p: Point) -> f64 {
    let c = [(mics[0][0] + mics[1][0]) / 2.0, (mics[0][1] + mics[1][1]) / 2.0, (mics[0][2] + mics[1][2]) / 2.0];
    let axis = [mics[1][0] - mics[0][0], mics[1][1] - mics[0][1], mics[1][2] - mics[0][2]];
    let v = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
    let dot = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2];
    let n = dist(axis, [0.0; 3]) * dist(v, [0.0; 3]);
    (dot / n).clamp(-1.0, 1.0).acos().to_degrees()
}

fn inside(p: Point, room: Point, margin: f64) -> bool {
    (0..3).all(|i| p[i] >= margin && p[i] <= room[i] - margin)
}

/// Places a point at `distance` from `center` at a random azimuth and height.
fn place(rng: &mut ChaCha8Rng, center: Point, distance: f64, room: Point, margin: f64) -> Option<Point> {
    let z = rng.random_range(margin..=room[2] - margin);
    let dz = z - center[2];
    let horizontal = distance * distance - dz * dz;
    if horizontal < 0.0 {
        return None;
    }
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = horizontal.sqrt();
    let p = [center[0] + r * theta.cos(), center[1] + r * theta.sin(), z];
    inside(p, room, margin).then_some(p)
}

/// Rejection-samples a scene satisfying every constraint. The source and
/// noise distances are drawn first, uniformly from the allowed set, so their
/// distribution is not skewed by rejections.
pub fn sample_scene(seed: u64, c: &SceneConstraints) -> Result<SceneSpec> {
    c.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d_src = c.distances[rng.random_range(0..c.distances.len())];
    let d_noise = c.distances[rng.random_range(0..c.distances.len())];
    let half = c.mic_spacing / 2.0;
    for _ in 0..c.max_attempts {
        let room: Point = std::array::from_fn(|i| rng.random_range(c.room_min[i]..=c.room_max[i]));
        let rt60 = rng.random_range(c.rt60_range.0..=c.rt60_range.1);
        if sabine_absorption(room, rt60).is_err() {
            continue;
        }
        let lo = c.wall_margin + half;
        if (0..3).any(|i| room[i] - lo <= lo) {
            continue;
        }
        let center: Point = std::array::from_fn(|i| rng.random_range(lo..room[i] - lo));
        let phi: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let axis = [phi.cos() * half, phi.sin() * half, 0.0];
        let mics = [
            [center[0] - axis[0], center[1] - axis[1], center[2]],
            [center[0] + axis[0], center[1] + axis[1], center[2]],
        ];
        let Some(src) = place(&mut rng, center, d_src, room, c.wall_margin) else { continue };
        let Some(noise) = place(&mut rng, center, d_noise, room, c.wall_margin) else { continue };
        if (doa_degrees(mics, src) - doa_degrees(mics, noise)).abs() <= c.min_doa_diff_deg {
            continue;
        }
        let snr_db = rng.random_range(c.snr_range_db.0..=c.snr_range_db.1);
        return Ok(SceneSpec {
            room_dims: room,
            rt60,
            mic_positions: mics,
            source_position: src,
            noise_position: noise,
            snr_db,
            seed,
            sample_rate: c.sample_rate,
        });
    }
    Err(Error::Infeasible(format!("no valid scene after {} attempts (seed {seed})", c.max_attempts)))
}

/// One line of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: usize,
    pub seed: u64,
    pub scene: SceneSpec,
    pub speech_file: String,
    pub noise_file: String,
    pub measured_snr_db: f64,
    /// Peak normalization applied to both mixture and target.
    pub scale: f64,
    pub mixture: String,
    pub target: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let c = SceneConstraints::default();
        assert_eq!(sample_scene(7, &c).unwrap(), sample_scene(7, &c).unwrap());
        assert_ne!(sample_scene(7, &c).unwrap(), sample_scene(8, &c).unwrap());
        for seed in 0..1000 {
            let s = sample_scene(seed, &c).unwrap();
            assert!(s.doa_difference() > 5.0);
            for d in [s.source_distance(), s.noise_distance()] {
                assert!(c.distances.iter().any(|&x| (x - d).abs() < 1e-9), "distance {d}");
            }
            assert!((dist(s.mic_positions[0], s.mic_positions[1]) - 0.04).abs() < 1e-12);
            for p in [s.mic_positions[0], s.mic_positions[1], s.source_position, s.noise_position] {
                assert!(inside(p, s.room_dims, 0.1));
            }
            assert!((0.1..=0.4).contains(&s.rt60) && (-10.0..=0.0).contains(&s.snr_db));
            assert!((0..3).all(|i| s.room_dims[i] >= c.room_min[i] && s.room_dims[i] <= c.room_max[i]));
        }
    }

    #[test]
    fn distance_frequencies_are_uniform() {
        let c = SceneConstraints::default();
        let mut counts = [0usize; 4];
        for seed in 0..10_000 {
            let d = sample_scene(seed, &c).unwrap().source_distance();
            let i = c.distances.iter().position(|&x| (x - d).abs() < 1e-9).unwrap();
            counts[i] += 1;
        }
        for n in counts {
            let f = n as f64 / 10_000.0;
            assert!((f - 0.25).abs() <= 0.05, "{counts:?}");
        }
    }

    #[test]
    fn infeasible_constraints() {
        let c = SceneConstraints { distances: vec![50.0], max_attempts: 100, ..Default::default() };
        assert!(matches!(sample_scene(1, &c), Err(Error::Infeasible(_))));
        let bad = SceneConstraints { distances: vec![], ..Default::default() };
        assert!(matches!(sample_scene(1, &bad), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn doa_geometry() {
        let mics = [[1.0, 1.0, 1.0], [1.04, 1.0, 1.0]];
        assert!((doa_degrees(mics, [3.0, 1.0, 1.0]) - 0.0).abs() < 1e-9);
        assert!((doa_degrees(mics, [1.02, 3.0, 1.0]) - 90.0).abs() < 1e-9);
        assert!((doa_degrees(mics, [0.0, 1.0, 1.0]) - 180.0).abs() < 1e-9);
    }
}
