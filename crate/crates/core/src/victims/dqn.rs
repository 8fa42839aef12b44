use serde::{Deserialize, Serialize};

use super::grid::ActionTable;
use super::replay::ReplayBuffer;
use crate::error::{check_len, Error, Result};
use crate::numerics::{argmax, AdamState, MlpParams, MlpSpec};
use crate::rng::RngStream;
use crate::trace::{ActionValue, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Training steps between target-network syncs.
    pub target_sync: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Environment steps over which epsilon decays linearly.
    pub eps_decay_steps: u64,
    /// Replay size before the first training step.
    pub learning_starts: usize,
    /// Environment steps per training step.
    pub train_every: u64,
    /// Global gradient-norm clip; 0 disables.
    pub grad_clip: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            lr: 1e-3,
            gamma: 0.99,
            replay_capacity: 50_000,
            batch_size: 64,
            target_sync: 1000,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_steps: 50_000,
            learning_starts: 1000,
            train_every: 1,
            grad_clip: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub online: MlpParams,
    pub target: MlpParams,
    pub table: ActionTable,
    pub cfg: DqnConfig,
    adam: AdamState,
    replay: ReplayBuffer,
    env_steps: u64,
    train_steps: u64,
}

impl DqnAgent {
    pub fn new(obs_dim: usize, table: ActionTable, cfg: DqnConfig, rng: &mut RngStream) -> Self {
        let spec = MlpSpec::tanh(obs_dim, &cfg.hidden, table.len());
        let online = MlpParams::init(&spec, rng);
        Self::from_params(online, table, cfg)
    }

    pub fn from_params(online: MlpParams, table: ActionTable, cfg: DqnConfig) -> Self {
        let adam = AdamState::new(&online, cfg.lr);
        let replay = ReplayBuffer::new(cfg.replay_capacity);
        Self {
            target: online.clone(),
            online,
            table,
            cfg,
            adam,
            replay,
            env_steps: 0,
            train_steps: 0,
        }
    }

    pub fn action_count(&self) -> usize {
        self.table.len()
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.online.forward(state)
    }

    /// Linear decay from `eps_start` to `eps_end`, then flat.
    pub fn epsilon(&self) -> f64 {
        let frac = (self.env_steps as f64 / self.cfg.eps_decay_steps.max(1) as f64).min(1.0);
        self.cfg.eps_end + (1.0 - frac) * (self.cfg.eps_start - self.cfg.eps_end)
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    /// Greedy (lowest index on ties) or epsilon-greedy action index.
    pub fn act_index(&self, state: &[f64], explore: bool, rng: &mut RngStream) -> Result<usize> {
        if explore && rng.uniform() < self.epsilon() {
            return Ok(rng.below(self.action_count()));
        }
        Ok(argmax(&self.q_values(state)?))
    }

    pub fn act(&self, state: &[f64], explore: bool, rng: &mut RngStream) -> Result<ActionValue> {
        Ok(self.table.action(self.act_index(state, explore, rng)?))
    }

    /// Stores a transition whose action is the internal index, and advances
    /// the exploration schedule by one environment step.
    pub fn observe(&mut self, transition: Transition) {
        self.env_steps += 1;
        self.replay.push(transition);
    }

    /// Samples a batch from replay and trains on it. `None` while the buffer
    /// holds fewer than `batch_size` transitions.
    pub fn train_from_replay(&mut self, rng: &mut RngStream) -> Result<Option<f64>> {
        if self.replay.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let batch: Vec<Transition> = self
            .replay
            .sample(rng, self.cfg.batch_size)
            .into_iter()
            .cloned()
            .collect();
        self.train_step(&batch).map(Some)
    }

    /// One optimizer step on the mean squared TD error of `batch`; returns
    /// that loss. The target network is synced every `target_sync` steps.
    pub fn train_step(&mut self, batch: &[Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Precondition("empty training batch".into()));
        }
        let d = self.action_count();
        let scale = 1.0 / batch.len() as f64;
        let mut grads = self.online.zeros_like();
        let mut loss = 0.0;
        for t in batch {
            let a = match t.action {
                ActionValue::Discrete(a) if a < d => a,
                ref other => return Err(Error::InvalidAction(format!("replay action {other:?}"))),
            };
            let y = self.td_target(t)?;
            let cache = self.online.forward_cached(&t.state)?;
            let err = cache.output()[a] - y;
            loss += err * err * scale;
            let mut out_grad = vec![0.0; d];
            out_grad[a] = 2.0 * err * scale;
            self.online.backward_accumulate(&cache, &out_grad, &mut grads)?;
        }
        if self.cfg.grad_clip > 0.0 {
            let norm = grads.l2_norm();
            if norm > self.cfg.grad_clip {
                grads.scale(self.cfg.grad_clip / norm);
            }
        }
        self.adam.step(&mut self.online, &grads);
        self.train_steps += 1;
        if self.train_steps % self.cfg.target_sync.max(1) == 0 {
            self.target = self.online.clone();
        }
        Ok(loss)
    }

    /// `r` for terminal transitions, else `r + gamma * max_a' Q_target(s', a')`.
    pub fn td_target(&self, t: &Transition) -> Result<f64> {
        if t.done {
            return Ok(t.reward);
        }
        check_len(self.online.spec().input_dim(), t.next_state.len())?;
        let next = self.target.forward(&t.next_state)?;
        let best = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(t.reward + self.cfg.gamma * best)
    }
}
