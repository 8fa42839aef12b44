//! Strategically-timed observation attacks against deep-RL agents.
//!
//! A victim (DQN or advantage actor-critic) is trained on one of three small
//! control tasks, then evaluated while a timer decides *when* to perturb its
//! observation and a noise pattern decides *what* the perturbation is.

pub mod attackers;
pub mod envs;
pub mod error;
pub mod harness;
pub mod noise;
pub mod numerics;
pub mod rng;
pub mod trace;
pub mod victims;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use trace::{episode_return, ActionValue, EpisodeTrace, StateVec, Transition};
