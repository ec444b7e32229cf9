//! Object-oriented MDP lab for a grid warehouse robot.
//!
//! * [`condition`]: ternary condition vectors and their algebra.
//! * [`model`]: objects, attributes, effects and the relational view of a
//!   state.
//! * [`learner`]: the DOORMAX transition-model learner.
//! * [`domain`]: the deterministic warehouse simulator and its laser scan.
//! * [`planner`]: optimistic value iteration and the learning loop.
//! * [`localization`]: Monte Carlo localization with KLD-sampling.
//! * [`io`]: map files, run configuration and output artifacts.

pub mod cli;
pub mod condition;
pub mod domain;
pub mod io;
pub mod learner;
pub mod localization;
pub mod maps;
pub mod model;
pub mod planner;
pub mod raycast;
