//! Breadth-first shortest delivery, used as an optimality oracle.

use std::collections::{HashSet, VecDeque};

use thiserror::Error;

use super::{is_delivery, step, Action, GridMap, Rewards};
use crate::model::OOState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("the target box cannot be delivered from this state")]
pub struct Unsolvable;

/// Minimum number of actions that deliver the target box, searching the
/// joint state space with the true simulator.
pub fn bfs_optimal_steps(map: &GridMap, s: &OOState) -> Result<u32, Unsolvable> {
    let rewards = Rewards::default();
    let mut seen = HashSet::from([s.clone()]);
    let mut queue = VecDeque::from([(s.clone(), 0u32)]);
    while let Some((cur, depth)) = queue.pop_front() {
        for a in Action::ALL {
            let (next, _) = step(&cur, a, map, &rewards);
            if is_delivery(&cur, a, &next) {
                return Ok(depth + 1);
            }
            if seen.insert(next.clone()) {
                queue.push_back((next, depth + 1));
            }
        }
    }
    Err(Unsolvable)
}
