//! Global localization along a scripted trajectory.

use std::collections::{HashMap, VecDeque};

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    estimate_pose, measurement_update, motion_update, observe, resample, uniform_particles, ClusterConfig,
    KldConfig, LocError, MotionNoise, Pose, SensorNoise,
};
use crate::domain::{Cell, Direction, GridMap, Scan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizeConfig {
    pub motion: MotionNoise,
    pub sensor: SensorNoise,
    pub kld: KldConfig,
    pub cluster: ClusterConfig,
    pub beams: usize,
    pub max_range: f64,
    /// Range noise of the simulated scanner.
    pub scan_sd: f64,
    /// Motions along the scripted path.
    pub steps: usize,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self {
            motion: MotionNoise::default(),
            sensor: SensorNoise::default(),
            kld: KldConfig::default(),
            cluster: ClusterConfig::default(),
            beams: 16,
            max_range: 5.0,
            scan_sd: 0.2,
            steps: 20,
        }
    }
}

/// One filter step: the truth, the estimate after the measurement update
/// and the size of the set that was updated.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub truth: Pose,
    pub estimate: Pose,
    pub particles: usize,
    pub modes: usize,
    /// Weighted RMS position error of the particles.
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizeReport {
    pub rows: Vec<TraceRow>,
    pub scans: Vec<Scan>,
    pub divergences: usize,
    pub low_diversity: usize,
}

/// Cell centers along a shortest 4-connected path from the agent start to
/// the destination, facing east, cut to `steps` motions.
pub fn scripted_path(map: &GridMap, steps: usize) -> Result<Vec<Pose>, LocError> {
    let (start, goal) = (map.agent_start(), map.destination());
    let mut prev: HashMap<Cell, Cell> = HashMap::from([(start, start)]);
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        if c == goal {
            break;
        }
        for d in Direction::ALL {
            let n = c.offset(d);
            if !map.is_blocked(n) && !prev.contains_key(&n) {
                prev.insert(n, c);
                queue.push_back(n);
            }
        }
    }
    if !prev.contains_key(&goal) {
        return Err(LocError::NoPath);
    }
    let mut cells = vec![goal];
    let mut cur = goal;
    while cur != start {
        cur = prev[&cur];
        cells.push(cur);
    }
    cells.reverse();
    cells.truncate(steps + 1);
    Ok(cells
        .into_iter()
        .map(|c| {
            let (x, y) = c.center();
            Pose::new(x, y, 0.0)
        })
        .collect())
}

/// Runs the filter from a uniform prior over the free space along
/// `truth`, resampling after every measurement update.
pub fn localize(map: &GridMap, truth: &[Pose], cfg: &LocalizeConfig, seed: u64) -> Result<LocalizeReport, LocError> {
    cfg.motion.validate()?;
    cfg.sensor.validate()?;
    cfg.kld.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut particles = uniform_particles(map, cfg.kld.max_particles, &mut rng)?;
    let mut report = LocalizeReport {
        rows: Vec::with_capacity(truth.len()),
        scans: Vec::with_capacity(truth.len()),
        divergences: 0,
        low_diversity: 0,
    };
    for (t, pose) in truth.iter().enumerate() {
        if t > 0 {
            let delta = truth[t - 1].delta_to(pose);
            motion_update(&mut particles, delta, &cfg.motion, &mut rng);
        }
        let scan = observe(pose, map, cfg.beams, cfg.max_range, cfg.scan_sd, &mut rng)?;
        if measurement_update(&mut particles, &scan, map, &cfg.sensor)?.diverged {
            info!("t={t}: filter diverged, restarting from a uniform prior");
            report.divergences += 1;
            particles = uniform_particles(map, cfg.kld.max_particles, &mut rng)?;
        }
        let est = estimate_pose(&particles, &cfg.cluster)?;
        let rmse = particles
            .iter()
            .map(|p| p.weight * ((p.pose.x - pose.x).powi(2) + (p.pose.y - pose.y).powi(2)))
            .sum::<f64>()
            .sqrt();
        debug!("t={t}: {} particles, {} modes, rmse {rmse:.3}", particles.len(), est.modes);
        report.rows.push(TraceRow {
            t,
            truth: *pose,
            estimate: est.mean,
            particles: particles.len(),
            modes: est.modes,
            rmse,
        });
        report.scans.push(scan);
        let next = resample(&particles, &cfg.kld, &mut rng)?;
        if next.low_diversity {
            report.low_diversity += 1;
        }
        particles = next.particles;
    }
    Ok(report)
}
