//! Diagnostic task with a planted attack signal, used to check that a
//! black-box attack timer can learn *when* to strike.
//!
//! The observation is `[odd, even, 1]`. A healthy victim (one that sees the
//! constant channel) earns 1 per step. A victim blinded on an odd frame earns
//! 0; blinded on an even frame it earns 2. An attacker maximising `-|r|`
//! therefore wants to hit every odd frame and no even one.

use super::{ActionSpace, EnvContract, Environment, Step};
use crate::error::{Error, Result};
use crate::trace::{ActionValue, StateVec};

pub const PLANTED_HORIZON: usize = 40;

#[derive(Debug, Clone, Default)]
pub struct PlantedParityEnv {
    t: usize,
    done: bool,
}

impl PlantedParityEnv {
    pub fn new() -> Self {
        Self::default()
    }

    fn observe(&self) -> StateVec {
        let odd = (self.t % 2) as f64;
        StateVec::new(vec![odd, 1.0 - odd, 1.0])
    }

    /// The victim rule the diagnostic is built around: action 0 while the
    /// constant channel is visible, action 1 otherwise.
    pub fn healthy_rule(state: &[f64]) -> ActionValue {
        ActionValue::Discrete(if state[2] > 0.5 { 0 } else { 1 })
    }
}

impl Environment for PlantedParityEnv {
    fn contract(&self) -> EnvContract {
        EnvContract {
            observation_dim: 3,
            action_space: ActionSpace::Discrete(2),
            max_steps: PLANTED_HORIZON,
            grid_shape: None,
        }
    }

    fn reset(&mut self, _seed: u64) -> StateVec {
        self.t = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: &ActionValue) -> Result<Step> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        let reward = match (action, self.t % 2 == 1) {
            (ActionValue::Discrete(0), _) => 1.0,
            (ActionValue::Discrete(1), true) => 0.0,
            (ActionValue::Discrete(1), false) => 2.0,
            (other, _) => return Err(Error::InvalidAction(format!("planted env expects 0 or 1, got {other:?}"))),
        };
        self.t += 1;
        self.done = self.t >= PLANTED_HORIZON;
        Ok(Step {
            state: self.observe(),
            reward,
            done: self.done,
        })
    }
}
