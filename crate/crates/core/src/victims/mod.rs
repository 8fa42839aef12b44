//! The attackable agents and the white-box views attack timers read.

mod a3c;
mod checkpoint;
mod dqn;
mod grid;
mod replay;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use a3c::{
    A3cAgent, A3cConfig, ActionSample, Fragment, FragmentLoss, PolicyHead, PolicyOutput, GAUSSIAN_STDDEV,
};
pub use checkpoint::{load_victim, read_victim, save_victim, write_victim};
pub use dqn::{DqnAgent, DqnConfig};
pub use grid::{ActionGrid, ActionTable};
pub use replay::ReplayBuffer;
pub use train::{random_policy_return, train_victim, EpisodeEnd, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use crate::numerics::{argmax, softmax, MlpParams};
use crate::rng::RngStream;
use crate::trace::ActionValue;

/// Black-box access: observation in, action out.
pub trait Actor: Sync {
    fn act(&self, state: &[f64]) -> Result<ActionValue>;
}

/// What a white-box timer sees at one frame.
#[derive(Debug, Clone, PartialEq)]
pub enum WhiteBox {
    QValues(Vec<f64>),
    Policy(Vec<f64>),
}

/// A frozen, greedy victim with white-box introspection.
pub trait Victim: Actor {
    fn algo(&self) -> Algo;

    fn observation_dim(&self) -> usize {
        self.preference_net().spec().input_dim()
    }

    /// Number of discrete actions (experts).
    fn action_count(&self) -> usize;

    /// Network whose first `action_count()` outputs are the action
    /// preferences: Q-values for DQN, policy logits for actor-critic.
    fn preference_net(&self) -> &MlpParams;

    fn preferences(&self, state: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.preference_net().forward(state)?;
        out.truncate(self.action_count());
        Ok(out)
    }

    fn white_box(&self, state: &[f64]) -> Result<WhiteBox> {
        let prefs = self.preferences(state)?;
        Ok(match self.algo() {
            Algo::Dqn => WhiteBox::QValues(prefs),
            Algo::A3c => WhiteBox::Policy(softmax(&prefs)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Dqn,
    A3c,
}

impl Algo {
    pub const ALL: [Algo; 2] = [Algo::Dqn, Algo::A3c];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Dqn => "dqn",
            Algo::A3c => "a3c",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dqn" => Ok(Algo::Dqn),
            "a3c" => Ok(Algo::A3c),
            other => Err(format!("unknown algo `{other}` (dqn|a3c)")),
        }
    }
}

impl Actor for DqnAgent {
    fn act(&self, state: &[f64]) -> Result<ActionValue> {
        // Greedy acting never touches the stream.
        DqnAgent::act(self, state, false, &mut RngStream::new(0))
    }
}

impl Victim for DqnAgent {
    fn algo(&self) -> Algo {
        Algo::Dqn
    }

    fn action_count(&self) -> usize {
        DqnAgent::action_count(self)
    }

    fn preference_net(&self) -> &MlpParams {
        &self.online
    }
}

impl Actor for A3cAgent {
    fn act(&self, state: &[f64]) -> Result<ActionValue> {
        Ok(self.to_env_action(&self.greedy(state)?))
    }
}

impl Victim for A3cAgent {
    fn algo(&self) -> Algo {
        Algo::A3c
    }

    fn action_count(&self) -> usize {
        A3cAgent::action_count(self)
    }

    fn preference_net(&self) -> &MlpParams {
        &self.net
    }

    fn white_box(&self, state: &[f64]) -> Result<WhiteBox> {
        match self.head {
            PolicyHead::Discrete(_) => Ok(WhiteBox::Policy(softmax(&self.preferences(state)?))),
            PolicyHead::Gaussian { .. } => Err(Error::InvalidParameter(
                "a Gaussian policy head has no finite expert set".into(),
            )),
        }
    }
}

/// A trained victim of either kind.
#[derive(Debug, Clone)]
pub enum TrainedVictim {
    Dqn(DqnAgent),
    A3c(A3cAgent),
}

impl TrainedVictim {
    pub fn as_victim(&self) -> &dyn Victim {
        match self {
            TrainedVictim::Dqn(a) => a,
            TrainedVictim::A3c(a) => a,
        }
    }
}

impl Actor for TrainedVictim {
    fn act(&self, state: &[f64]) -> Result<ActionValue> {
        self.as_victim().act(state)
    }
}

impl Victim for TrainedVictim {
    fn algo(&self) -> Algo {
        self.as_victim().algo()
    }

    fn action_count(&self) -> usize {
        self.as_victim().action_count()
    }

    fn preference_net(&self) -> &MlpParams {
        self.as_victim().preference_net()
    }

    fn white_box(&self, state: &[f64]) -> Result<WhiteBox> {
        self.as_victim().white_box(state)
    }
}

/// A greedy, parameter-only copy of a victim, for evaluating training
/// snapshots. Acts through `table` on the argmax of the preference outputs.
#[derive(Debug, Clone)]
pub struct FrozenVictim {
    algo: Algo,
    net: MlpParams,
    table: ActionTable,
}

impl FrozenVictim {
    pub fn of(victim: &dyn Victim, table: ActionTable) -> Result<Self> {
        if table.len() != victim.action_count() {
            return Err(Error::Shape {
                expected: victim.action_count(),
                got: table.len(),
            });
        }
        Ok(Self {
            algo: victim.algo(),
            net: victim.preference_net().clone(),
            table,
        })
    }
}

impl Actor for FrozenVictim {
    fn act(&self, state: &[f64]) -> Result<ActionValue> {
        Ok(self.table.action(greedy_index(self, state)?))
    }
}

impl Victim for FrozenVictim {
    fn algo(&self) -> Algo {
        self.algo
    }

    fn action_count(&self) -> usize {
        self.table.len()
    }

    fn preference_net(&self) -> &MlpParams {
        &self.net
    }
}

/// Index of the victim's preferred action.
pub fn greedy_index(victim: &dyn Victim, state: &[f64]) -> Result<usize> {
    Ok(argmax(&victim.preferences(state)?))
}
