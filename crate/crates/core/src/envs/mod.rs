//! Desk-scale control tasks behind one reset/step contract.

mod car;
mod collector;
mod planted;
mod reacher;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use car::{CarConfig, CarEnv};
pub use collector::{CollectorConfig, CollectorEnv, Item, ItemColor};
pub use planted::{PlantedParityEnv, PLANTED_HORIZON};
pub use reacher::{ReacherConfig, ReacherEnv};

use crate::error::Result;
use crate::trace::{ActionValue, StateVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSpace {
    Discrete(usize),
    Continuous(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvContract {
    pub observation_dim: usize,
    pub action_space: ActionSpace,
    pub max_steps: usize,
    /// Row/column layout when the observation is a flattened grid.
    pub grid_shape: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: StateVec,
    pub reward: f64,
    pub done: bool,
}

pub trait Environment: Send {
    fn contract(&self) -> EnvContract;

    /// Fresh start configuration drawn deterministically from `seed`.
    fn reset(&mut self, seed: u64) -> StateVec;

    fn step(&mut self, action: &ActionValue) -> Result<Step>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Reacher,
    Collector,
    Car,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::Reacher, EnvKind::Collector, EnvKind::Car];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Reacher => "reacher",
            EnvKind::Collector => "collector",
            EnvKind::Car => "car",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "reacher" => Ok(EnvKind::Reacher),
            "collector" => Ok(EnvKind::Collector),
            "car" => Ok(EnvKind::Car),
            other => Err(format!("unknown env kind `{other}` (reacher|collector|car)")),
        }
    }
}

/// Physics and episode constants for all three tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSettings {
    pub reacher: ReacherConfig,
    pub collector: CollectorConfig,
    pub car: CarConfig,
}

impl Default for EnvSettings {
    fn default() -> Self {
        Self {
            reacher: ReacherConfig::default(),
            collector: CollectorConfig::default(),
            car: CarConfig::default(),
        }
    }
}

pub fn make_env(kind: EnvKind, settings: &EnvSettings) -> Box<dyn Environment> {
    match kind {
        EnvKind::Reacher => Box::new(ReacherEnv::new(settings.reacher.clone())),
        EnvKind::Collector => Box::new(CollectorEnv::new(settings.collector.clone())),
        EnvKind::Car => Box::new(CarEnv::new(settings.car.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn random_action(space: ActionSpace, rng: &mut RngStream) -> ActionValue {
        match space {
            ActionSpace::Discrete(d) => ActionValue::Discrete(rng.below(d)),
            ActionSpace::Continuous(k) => {
                ActionValue::continuous((0..k).map(|_| rng.uniform_range(-1.0, 1.0)).collect())
            }
        }
    }

    #[test]
    fn dimensions_and_episode_length_hold_under_random_play() {
        let settings = EnvSettings::default();
        for (kind, dim) in [(EnvKind::Reacher, 10), (EnvKind::Collector, 37), (EnvKind::Car, 256)] {
            let mut env = make_env(kind, &settings);
            let contract = env.contract();
            assert_eq!(contract.observation_dim, dim);
            let mut rng = RngStream::new(17);
            for seed in 0..3 {
                let s0 = env.reset(seed);
                assert_eq!(s0.len(), dim);
                let mut steps = 0;
                loop {
                    let step = env.step(&random_action(contract.action_space, &mut rng)).unwrap();
                    steps += 1;
                    assert_eq!(step.state.len(), dim);
                    assert!(step.state.is_finite());
                    if step.done {
                        break;
                    }
                }
                assert!(steps <= contract.max_steps);
                assert!(env.step(&random_action(contract.action_space, &mut rng)).is_err());
            }
        }
    }

    #[test]
    fn reset_is_deterministic() {
        let settings = EnvSettings::default();
        for kind in EnvKind::ALL {
            let mut a = make_env(kind, &settings);
            let mut b = make_env(kind, &settings);
            assert_eq!(a.reset(99), b.reset(99));
        }
    }

    #[test]
    fn kind_parses_from_name() {
        for kind in EnvKind::ALL {
            assert_eq!(kind.name().parse::<EnvKind>().unwrap(), kind);
        }
        assert!("unity".parse::<EnvKind>().is_err());
    }
}
