//! Monte Carlo localization against a known occupancy grid.
//!
//! Poses are continuous, in cell units: cell `(i, j)` covers
//! `[i, i + 1) x [j, j + 1)`. Scan bearings are measured in the robot frame,
//! counterclockwise from its heading.

mod estimate;
mod kld;
mod scripted;

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{Cell, GridMap, Scan, ScanError};
use crate::raycast;

pub use estimate::{estimate_pose, ClusterConfig, PoseEstimate};
pub use kld::{kld_bound, normal_quantile, resample, KldConfig, Resampled};
pub use scripted::{localize, scripted_path, LocalizeConfig, LocalizeReport, TraceRow};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocError {
    #[error("particle set is empty")]
    Empty,
    #[error("invalid noise model: {0}")]
    BadNoise(&'static str),
    #[error("invalid KLD configuration: {0}")]
    BadKld(&'static str),
    #[error("map has no free cells")]
    NoFreeCells,
    #[error("no path from the agent start to the destination")]
    NoPath,
    #[error(transparent)]
    Scan(#[from] ScanError),
}

/// Angle in `[0, 2pi)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Signed difference `a - b` wrapped to `[-pi, pi)`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = normalize_angle(a - b);
    if d >= std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn cell(&self) -> Cell {
        Cell::new(self.x.floor() as i32, self.y.floor() as i32)
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// `other` expressed as an odometry step `(dx, dy, dtheta)` in this
    /// pose's frame.
    pub fn delta_to(&self, other: &Pose) -> (f64, f64, f64) {
        let (wx, wy) = (other.x - self.x, other.y - self.y);
        let (s, c) = self.theta.sin_cos();
        (c * wx + s * wy, -s * wx + c * wy, angle_diff(other.theta, self.theta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub pose: Pose,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionNoise {
    /// Per-axis translational standard deviation, cells per step.
    pub trans_sd: f64,
    /// Rotational standard deviation, radians per step.
    pub rot_sd: f64,
}

impl Default for MotionNoise {
    fn default() -> Self {
        Self {
            trans_sd: 0.1,
            rot_sd: 0.02,
        }
    }
}

impl MotionNoise {
    pub fn validate(&self) -> Result<(), LocError> {
        if !(self.trans_sd >= 0.0 && self.trans_sd.is_finite()) {
            return Err(LocError::BadNoise("translational deviation must be nonnegative"));
        }
        if !(self.rot_sd >= 0.0 && self.rot_sd.is_finite()) {
            return Err(LocError::BadNoise("rotational deviation must be nonnegative"));
        }
        Ok(())
    }
}

/// Beam model: a Gaussian around the expected range mixed with a uniform
/// density over `[0, max_range]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorNoise {
    /// Deviation of the Gaussian component. Set it wider than the scanner's
    /// own noise to absorb the pose error of the particles.
    pub range_sd: f64,
    pub z_hit: f64,
    pub z_rand: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            range_sd: 0.8,
            z_hit: 0.9,
            z_rand: 0.1,
        }
    }
}

impl SensorNoise {
    pub fn validate(&self) -> Result<(), LocError> {
        if !(self.range_sd > 0.0 && self.range_sd.is_finite()) {
            return Err(LocError::BadNoise("range deviation must be positive"));
        }
        if !(self.z_hit >= 0.0 && self.z_rand >= 0.0) {
            return Err(LocError::BadNoise("mixture weights must be nonnegative"));
        }
        if (self.z_hit + self.z_rand - 1.0).abs() > 1e-9 {
            return Err(LocError::BadNoise("mixture weights must sum to 1"));
        }
        Ok(())
    }

    /// Density of measuring `z` when the map predicts `expected`.
    pub fn beam_density(&self, z: f64, expected: f64, max_range: f64) -> f64 {
        let u = (z - expected) / self.range_sd;
        let gauss = (-0.5 * u * u).exp() / (self.range_sd * (TAU).sqrt());
        self.z_hit * gauss + self.z_rand / max_range
    }
}

/// Wall-only ranges seen from `pose` along robot-frame `bearings`.
pub fn expected_ranges(pose: &Pose, map: &GridMap, bearings: impl IntoIterator<Item = f64>, max_range: f64) -> Vec<f64> {
    bearings
        .into_iter()
        .map(|b| {
            raycast::cast((pose.x, pose.y), pose.theta + b, max_range, |c| {
                map.is_blocked(c).then_some(())
            })
            .0
        })
        .collect()
}

/// A range scan from `pose` with Gaussian noise, clamped to `[0, max_range]`.
pub fn observe(
    pose: &Pose,
    map: &GridMap,
    beams: usize,
    max_range: f64,
    range_sd: f64,
    rng: &mut impl Rng,
) -> Result<Scan, LocError> {
    if beams < 4 {
        return Err(ScanError::TooFewBeams(beams).into());
    }
    if range_sd.is_nan() || range_sd < 0.0 {
        return Err(LocError::BadNoise("range deviation must be nonnegative"));
    }
    let noise = Normal::new(0.0, range_sd).map_err(|_| LocError::BadNoise("range deviation"))?;
    let bearings: Vec<f64> = Scan::bearings(beams).collect();
    let ranges = expected_ranges(pose, map, bearings.iter().copied(), max_range);
    let pairs: Vec<(f64, f64)> = bearings
        .into_iter()
        .zip(ranges)
        .map(|(b, r)| (b, (r + noise.sample(rng)).clamp(0.0, max_range)))
        .collect();
    Ok(Scan::from_ranges(&pairs, max_range)?)
}

/// `n` particles spread uniformly over the free space with uniform
/// headings. Cells are filled in layers: every particle of a layer sits at
/// the same random offset and heading within its own cell, so regions of the
/// map that look alike start with alike particle sets.
pub fn uniform_particles(map: &GridMap, n: usize, rng: &mut impl Rng) -> Result<Vec<Particle>, LocError> {
    let free: Vec<Cell> = map.free_cells().collect();
    if free.is_empty() {
        return Err(LocError::NoFreeCells);
    }
    let w = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (ox, oy) = (rng.random::<f64>(), rng.random::<f64>());
        let theta = rng.random::<f64>() * TAU;
        for c in free.iter().take(n - out.len()) {
            out.push(Particle {
                pose: Pose::new(c.x as f64 + ox, c.y as f64 + oy, theta),
                weight: w,
            });
        }
    }
    Ok(out)
}

/// Advances every particle by the odometry step `(dx, dy, dtheta)` taken in
/// its own frame, perturbed by independent Gaussian noise on each component.
pub fn motion_update(particles: &mut [Particle], delta: (f64, f64, f64), noise: &MotionNoise, rng: &mut impl Rng) {
    let trans = Normal::new(0.0, noise.trans_sd).expect("validated deviation");
    let rot = Normal::new(0.0, noise.rot_sd).expect("validated deviation");
    let (dx, dy, dtheta) = delta;
    for p in particles {
        let tx = dx + trans.sample(rng);
        let ty = dy + trans.sample(rng);
        let dt = dtheta + rot.sample(rng);
        let (s, c) = p.pose.theta.sin_cos();
        p.pose = Pose::new(p.pose.x + c * tx - s * ty, p.pose.y + s * tx + c * ty, p.pose.theta + dt);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UpdateReport {
    /// Every weight vanished and the set was reset to uniform weights.
    pub diverged: bool,
}

/// Log-likelihood of `scan` at `pose`; poses inside walls or off the map
/// are impossible.
pub fn scan_log_likelihood(pose: &Pose, scan: &Scan, map: &GridMap, noise: &SensorNoise) -> f64 {
    if map.is_blocked(pose.cell()) {
        return f64::NEG_INFINITY;
    }
    let max_range = scan.max_range();
    let expected = expected_ranges(pose, map, scan.beams().iter().map(|b| b.bearing), max_range);
    scan.beams()
        .iter()
        .zip(expected)
        .map(|(b, e)| noise.beam_density(b.range, e, max_range).ln())
        .sum()
}

/// Multiplies each weight by the scan likelihood and renormalizes.
pub fn measurement_update(
    particles: &mut [Particle],
    scan: &Scan,
    map: &GridMap,
    noise: &SensorNoise,
) -> Result<UpdateReport, LocError> {
    if particles.is_empty() {
        return Err(LocError::Empty);
    }
    noise.validate()?;
    let logw: Vec<f64> = particles
        .par_iter()
        .map(|p| p.weight.ln() + scan_log_likelihood(&p.pose, scan, map, noise))
        .collect();
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY || top.is_nan() {
        let w = 1.0 / particles.len() as f64;
        particles.iter_mut().for_each(|p| p.weight = w);
        return Ok(UpdateReport { diverged: true });
    }
    let mut total = 0.0;
    for (p, lw) in particles.iter_mut().zip(&logw) {
        p.weight = (lw - top).exp();
        total += p.weight;
    }
    particles.iter_mut().for_each(|p| p.weight /= total);
    Ok(UpdateReport::default())
}
