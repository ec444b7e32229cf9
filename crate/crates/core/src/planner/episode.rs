//! Plan, act, observe, learn: the episode loop.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{plan, PlanError, PlannerConfig, ValueTable};
use crate::domain::{is_delivery, step, Action, GridMap, Rewards};
use crate::learner::{Doormax, TransitionPrediction};
use crate::model::{ModelError, OOState};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeConfig {
    pub planner: PlannerConfig,
    pub rewards: Rewards,
    /// Act on the model without updating it.
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub state: OOState,
    pub action: Action,
    #[serde(serialize_with = "crate::io::output::ser_f64")]
    pub reward: f64,
    pub prediction: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub target_box: u32,
    pub steps: usize,
    #[serde(serialize_with = "crate::io::output::ser_f64")]
    pub reward: f64,
    pub complete: bool,
    pub unknown_predictions: usize,
    /// Known or failure predictions the simulator contradicted.
    pub mispredictions: usize,
    pub trace: Vec<StepRecord>,
    pub final_state: OOState,
}

impl EpisodeRecord {
    /// Completed without a single unknown prediction.
    pub fn converged(&self) -> bool {
        self.complete && self.unknown_predictions == 0
    }
}

/// The box to deliver for a given seed. Every episode run with the same
/// seed works on the same task.
pub fn choose_target(map: &GridMap, seed: u64) -> Result<usize, ModelError> {
    let n = map.box_spawns().len();
    if n == 0 {
        return Err(ModelError::NoSuchBox(0));
    }
    Ok(ChaCha8Rng::seed_from_u64(seed).random_range(0..n))
}

/// Runs one episode from the map's start state, re-planning whenever the
/// model changes, until delivery or the horizon.
pub fn run_episode(
    map: &GridMap,
    learner: &mut Doormax,
    cfg: &EpisodeConfig,
    seed: u64,
) -> Result<EpisodeRecord, PlanError> {
    let target = choose_target(map, seed)?;
    let mut s = OOState::initial(map, target)?;
    let mut table: Option<(u64, ValueTable)> = None;
    let mut rec = EpisodeRecord {
        seed,
        target_box: target as u32,
        steps: 0,
        reward: 0.0,
        complete: false,
        unknown_predictions: 0,
        mispredictions: 0,
        trace: Vec::new(),
        final_state: s.clone(),
    };
    for t in 0..cfg.planner.horizon {
        let stale = match &table {
            Some((rev, vt)) => *rev != learner.revision() || vt.action(&s).is_none(),
            None => true,
        };
        if stale {
            let vt = plan(learner, map, &s, &cfg.planner, &cfg.rewards)?;
            debug!("t={t}: planned over {} states", vt.len());
            table = Some((learner.revision(), vt));
        }
        let a = table
            .as_ref()
            .and_then(|(_, vt)| vt.action(&s))
            .expect("current state is always in a fresh plan");
        let prediction = learner.predict_transition(&s, a, map)?;
        let (next, r) = step(&s, a, map, &cfg.rewards);
        match &prediction {
            TransitionPrediction::Unknown => {
                rec.unknown_predictions += 1;
                if !cfg.frozen {
                    learner.charge_unknown(&s, a, &next, map)?;
                }
            }
            p => {
                if p.state() != Some(&next) {
                    warn!("misprediction at t={t}: {a} from {:?}", s.agent);
                    rec.mispredictions += 1;
                }
            }
        }
        if !cfg.frozen {
            learner.add_experience(&s, a, &next, map)?;
        }
        rec.trace.push(StepRecord {
            t,
            state: s.clone(),
            action: a,
            reward: r,
            prediction: prediction.label(),
        });
        rec.steps += 1;
        rec.reward += r;
        let done = is_delivery(&s, a, &next);
        s = next;
        if done {
            rec.complete = true;
            break;
        }
    }
    rec.final_state = s;
    Ok(rec)
}

/// Repeated episodes of the same task.
pub fn train(
    map: &GridMap,
    learner: &mut Doormax,
    cfg: &EpisodeConfig,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeRecord>, PlanError> {
    (0..episodes)
        .map(|_| run_episode(map, learner, cfg, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::bfs_optimal_steps;
    use crate::io::parse_map;

    const SMALL: &str = "A.#.\n..#B\n....\nD...\n";

    #[test]
    fn horizon_one_is_incomplete() {
        let map = parse_map(SMALL).unwrap();
        let mut l = Doormax::warehouse(2).unwrap();
        let cfg = EpisodeConfig {
            planner: PlannerConfig {
                horizon: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let rec = run_episode(&map, &mut l, &cfg, 0).unwrap();
        assert_eq!(rec.steps, 1);
        assert_eq!(rec.trace.len(), 1);
        assert!(!rec.complete);
    }

    #[test]
    fn learns_to_deliver_optimally() {
        let map = parse_map(SMALL).unwrap();
        let mut l = Doormax::warehouse(2).unwrap();
        let cfg = EpisodeConfig::default();
        let recs = train(&map, &mut l, &cfg, 10, 3).unwrap();
        assert!(recs.iter().all(|r| r.mispredictions == 0));
        let last = recs.last().unwrap();
        assert!(last.converged());
        let start = OOState::initial(&map, last.target_box as usize).unwrap();
        assert_eq!(last.steps as u32, bfs_optimal_steps(&map, &start).unwrap());
    }

    #[test]
    fn same_seed_same_record() {
        let map = parse_map(SMALL).unwrap();
        let cfg = EpisodeConfig::default();
        let run = || {
            let mut l = Doormax::warehouse(2).unwrap();
            train(&map, &mut l, &cfg, 3, 11).unwrap()
        };
        assert_eq!(run(), run());
    }
}
