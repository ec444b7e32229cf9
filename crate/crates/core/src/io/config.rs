//! Run configuration: flat `key = value` text with `#` comments.
//!
//! Keys are the long CLI flag names without the leading dashes
//! (`max-range`, `particles-min`, ...); underscores are accepted in place of
//! hyphens.

use std::path::PathBuf;

use thiserror::Error;

use crate::domain::Rewards;
use crate::localization::{KldConfig, LocalizeConfig, MotionNoise, SensorNoise};
use crate::planner::{EpisodeConfig, PlannerConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("{key}: cannot parse `{value}`")]
    BadValue { key: String, value: String },
    #[error("{key}: {reason}")]
    OutOfRange { key: &'static str, reason: &'static str },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub map: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub episodes: usize,
    pub seed: u64,
    pub gamma: f64,
    pub epsilon: f64,
    pub k: usize,
    pub rmax: f64,
    pub horizon: usize,
    pub reward_step: f64,
    pub reward_success: f64,
    pub reward_illegal: f64,
    pub particles_min: usize,
    pub particles_max: usize,
    pub beams: usize,
    pub max_range: f64,
    pub trans_sd: f64,
    pub rot_sd: f64,
    pub range_sd: f64,
    pub model_range_sd: f64,
    pub z_hit: f64,
    pub kld_epsilon: f64,
    pub kld_delta: f64,
    /// Length of the scripted localization trajectory.
    pub steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let planner = PlannerConfig::default();
        let rewards = Rewards::default();
        let kld = KldConfig::default();
        let motion = MotionNoise::default();
        let sensor = SensorNoise::default();
        Self {
            map: None,
            out: None,
            episodes: 30,
            seed: 0,
            gamma: planner.gamma,
            epsilon: planner.epsilon,
            k: 2,
            rmax: planner.r_max,
            horizon: planner.horizon,
            reward_step: rewards.step,
            reward_success: rewards.success,
            reward_illegal: rewards.illegal,
            particles_min: kld.min_particles,
            particles_max: kld.max_particles,
            beams: 16,
            max_range: 5.0,
            trans_sd: motion.trans_sd,
            rot_sd: motion.rot_sd,
            range_sd: LocalizeConfig::default().scan_sd,
            model_range_sd: sensor.range_sd,
            z_hit: sensor.z_hit,
            kld_epsilon: kld.epsilon,
            kld_delta: kld.delta,
            steps: 20,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_owned(),
        value: value.to_owned(),
    })
}

impl RunConfig {
    pub const KEYS: [&'static str; 24] = [
        "map",
        "out",
        "episodes",
        "seed",
        "gamma",
        "epsilon",
        "k",
        "rmax",
        "horizon",
        "reward-step",
        "reward-success",
        "reward-illegal",
        "particles-min",
        "particles-max",
        "beams",
        "max-range",
        "trans-sd",
        "rot-sd",
        "range-sd",
        "model-range-sd",
        "z-hit",
        "kld-epsilon",
        "kld-delta",
        "steps",
    ];

    /// Sets one key. Returns `Ok(false)` for an unknown key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ConfigError> {
        let key = key.replace('_', "-");
        let v = value.trim();
        match key.as_str() {
            "map" => self.map = Some(PathBuf::from(v)),
            "out" => self.out = Some(PathBuf::from(v)),
            "episodes" => self.episodes = parse(&key, v)?,
            "seed" => self.seed = parse(&key, v)?,
            "gamma" => self.gamma = parse(&key, v)?,
            "epsilon" => self.epsilon = parse(&key, v)?,
            "k" => self.k = parse(&key, v)?,
            "rmax" => self.rmax = parse(&key, v)?,
            "horizon" => self.horizon = parse(&key, v)?,
            "reward-step" => self.reward_step = parse(&key, v)?,
            "reward-success" => self.reward_success = parse(&key, v)?,
            "reward-illegal" => self.reward_illegal = parse(&key, v)?,
            "particles-min" => self.particles_min = parse(&key, v)?,
            "particles-max" => self.particles_max = parse(&key, v)?,
            "beams" => self.beams = parse(&key, v)?,
            "max-range" => self.max_range = parse(&key, v)?,
            "trans-sd" => self.trans_sd = parse(&key, v)?,
            "rot-sd" => self.rot_sd = parse(&key, v)?,
            "range-sd" => self.range_sd = parse(&key, v)?,
            "model-range-sd" => self.model_range_sd = parse(&key, v)?,
            "z-hit" => self.z_hit = parse(&key, v)?,
            "kld-epsilon" => self.kld_epsilon = parse(&key, v)?,
            "kld-delta" => self.kld_delta = parse(&key, v)?,
            "steps" => self.steps = parse(&key, v)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Applies every assignment in a config document on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = key.trim();
            if key.is_empty() || value.trim().is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !self.set(key, value)? {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_owned(),
                });
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, key, reason| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange { key, reason })
            }
        };
        check(self.episodes >= 1, "episodes", "must be at least 1")?;
        check(self.gamma > 0.0 && self.gamma < 1.0, "gamma", "must lie in (0, 1)")?;
        check(self.epsilon > 0.0, "epsilon", "must be positive")?;
        check(self.k >= 1, "k", "must be at least 1")?;
        check(self.rmax.is_finite(), "rmax", "must be finite")?;
        check(self.horizon >= 1, "horizon", "must be at least 1")?;
        check(self.particles_min >= 1, "particles-min", "must be at least 1")?;
        check(
            self.particles_min <= self.particles_max,
            "particles-max",
            "must not be below particles-min",
        )?;
        check(self.beams >= 4, "beams", "must be at least 4")?;
        check(
            self.max_range.is_finite() && self.max_range > 0.0,
            "max-range",
            "must be positive",
        )?;
        check(self.trans_sd >= 0.0, "trans-sd", "must be nonnegative")?;
        check(self.rot_sd >= 0.0, "rot-sd", "must be nonnegative")?;
        check(self.range_sd >= 0.0, "range-sd", "must be nonnegative")?;
        check(self.model_range_sd > 0.0, "model-range-sd", "must be positive")?;
        check((0.0..=1.0).contains(&self.z_hit), "z-hit", "must lie in [0, 1]")?;
        check(self.kld_epsilon > 0.0, "kld-epsilon", "must be positive")?;
        check(
            self.kld_delta > 0.0 && self.kld_delta < 1.0,
            "kld-delta",
            "must lie in (0, 1)",
        )?;
        Ok(())
    }

    pub fn planner(&self) -> PlannerConfig {
        PlannerConfig {
            gamma: self.gamma,
            epsilon: self.epsilon,
            r_max: self.rmax,
            horizon: self.horizon,
            ..Default::default()
        }
    }

    pub fn rewards(&self) -> Rewards {
        Rewards {
            step: self.reward_step,
            success: self.reward_success,
            illegal: self.reward_illegal,
        }
    }

    pub fn episode(&self) -> EpisodeConfig {
        EpisodeConfig {
            planner: self.planner(),
            rewards: self.rewards(),
            frozen: false,
        }
    }

    pub fn motion_noise(&self) -> MotionNoise {
        MotionNoise {
            trans_sd: self.trans_sd,
            rot_sd: self.rot_sd,
        }
    }

    pub fn sensor_noise(&self) -> SensorNoise {
        SensorNoise {
            range_sd: self.model_range_sd,
            z_hit: self.z_hit,
            z_rand: 1.0 - self.z_hit,
        }
    }

    pub fn kld(&self) -> KldConfig {
        KldConfig {
            epsilon: self.kld_epsilon,
            delta: self.kld_delta,
            min_particles: self.particles_min,
            max_particles: self.particles_max,
            ..Default::default()
        }
    }
}
