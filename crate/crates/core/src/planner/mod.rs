//! Optimistic value iteration over the learned transition model.
//!
//! State-action pairs the model cannot predict lead to a fictitious
//! absorbing state paying `r_max` forever, so the greedy policy is drawn
//! toward whatever it has not learned yet.

mod episode;

use std::collections::HashMap;

use thiserror::Error;

use crate::domain::{is_delivery, Action, GridMap, Rewards};
use crate::learner::{Doormax, LearnError, TransitionPrediction};
use crate::model::OOState;

pub use episode::{choose_target, run_episode, train, EpisodeConfig, EpisodeRecord, StepRecord};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("reachable state space exceeds the cap of {0} states")]
    TooManyStates(usize),
    #[error("value iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("invalid planner configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub r_max: f64,
    /// Step cap per episode.
    pub horizon: usize,
    pub max_states: usize,
    pub max_sweeps: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            epsilon: 1e-6,
            r_max: 20.0,
            horizon: 500,
            max_states: 200_000,
            max_sweeps: 100_000,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::BadConfig(m.to_owned()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        if !self.r_max.is_finite() {
            return bad("r_max must be finite");
        }
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        Ok(())
    }

    /// Value of the optimistic absorbing state.
    pub fn optimistic_value(&self) -> f64 {
        self.r_max / (1.0 - self.gamma)
    }
}

/// Where a tabular transition leads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Next {
    State(usize),
    /// The fictitious `r_max` state.
    Optimistic,
    /// Episode ends; no further value.
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: Next,
    pub reward: f64,
}

/// Deterministic finite MDP: `outcomes[s][a]`.
#[derive(Debug, Clone, Default)]
pub struct TabularMdp {
    pub outcomes: Vec<Vec<Outcome>>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub values: Vec<f64>,
    /// Greedy action index per state.
    pub policy: Vec<usize>,
    /// Max-norm change of each sweep.
    pub residuals: Vec<f64>,
}

/// Synchronous value iteration from `V = 0` until the max-norm change of a
/// sweep drops below `epsilon`. Greedy ties go to the lowest action index.
pub fn value_iteration(mdp: &TabularMdp, cfg: &PlannerConfig) -> Result<Solution, PlanError> {
    cfg.validate()?;
    let v_opt = cfg.optimistic_value();
    let n = mdp.outcomes.len();
    let mut values = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residuals = Vec::new();
    let q = |o: &Outcome, values: &[f64]| {
        o.reward
            + cfg.gamma
                * match o.next {
                    Next::State(j) => values[j],
                    Next::Optimistic => v_opt,
                    Next::Terminal => 0.0,
                }
    };
    loop {
        let mut residual: f64 = 0.0;
        for (i, outs) in mdp.outcomes.iter().enumerate() {
            let best = outs
                .iter()
                .map(|o| q(o, &values))
                .fold(f64::NEG_INFINITY, f64::max);
            let best = if outs.is_empty() { 0.0 } else { best };
            residual = residual.max((best - values[i]).abs());
            next[i] = best;
        }
        std::mem::swap(&mut values, &mut next);
        residuals.push(residual);
        if residual < cfg.epsilon {
            break;
        }
        if residuals.len() >= cfg.max_sweeps {
            return Err(PlanError::NoConvergence(cfg.max_sweeps));
        }
    }
    let policy = mdp
        .outcomes
        .iter()
        .map(|outs| {
            let qs: Vec<f64> = outs.iter().map(|o| q(o, &values)).collect();
            let best = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-9 * best.abs().max(1.0);
            qs.iter().position(|&x| x >= best - tol).unwrap_or(0)
        })
        .collect();
    Ok(Solution {
        values,
        policy,
        residuals,
    })
}

/// Values and greedy policy over the states reachable under the model.
#[derive(Debug, Clone)]
pub struct ValueTable {
    states: Vec<OOState>,
    index: HashMap<OOState, usize>,
    solution: Solution,
}

impl ValueTable {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[OOState] {
        &self.states
    }

    pub fn value(&self, s: &OOState) -> Option<f64> {
        self.index.get(s).map(|&i| self.solution.values[i])
    }

    pub fn action(&self, s: &OOState) -> Option<Action> {
        self.index.get(s).map(|&i| Action::ALL[self.solution.policy[i]])
    }

    pub fn residuals(&self) -> &[f64] {
        &self.solution.residuals
    }
}

/// Enumerates the states reachable from `start` through the model's
/// predictions and solves the resulting optimistic MDP.
pub fn plan(
    learner: &Doormax,
    map: &GridMap,
    start: &OOState,
    cfg: &PlannerConfig,
    rewards: &Rewards,
) -> Result<ValueTable, PlanError> {
    cfg.validate()?;
    let mut states = vec![start.clone()];
    let mut index = HashMap::from([(start.clone(), 0usize)]);
    let mut mdp = TabularMdp::default();
    let mut i = 0;
    while i < states.len() {
        let s = states[i].clone();
        let mut outs = Vec::with_capacity(Action::ALL.len());
        for a in Action::ALL {
            let out = match learner.predict_transition(&s, a, map)? {
                TransitionPrediction::Unknown => Outcome {
                    next: Next::Optimistic,
                    reward: cfg.r_max,
                },
                TransitionPrediction::Known(n) | TransitionPrediction::Failure(n) => {
                    let reward = rewards.of(&s, a, &n);
                    if is_delivery(&s, a, &n) {
                        Outcome {
                            next: Next::Terminal,
                            reward,
                        }
                    } else {
                        let j = match index.get(&n) {
                            Some(&j) => j,
                            None => {
                                if states.len() >= cfg.max_states {
                                    return Err(PlanError::TooManyStates(cfg.max_states));
                                }
                                states.push(n.clone());
                                index.insert(n, states.len() - 1);
                                states.len() - 1
                            }
                        };
                        Outcome {
                            next: Next::State(j),
                            reward,
                        }
                    }
                }
            };
            outs.push(out);
        }
        mdp.outcomes.push(outs);
        i += 1;
    }
    let solution = value_iteration(&mdp, cfg)?;
    Ok(ValueTable {
        states,
        index,
        solution,
    })
}
