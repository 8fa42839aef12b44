use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::a3c::{A3cAgent, A3cConfig, Fragment, PolicyHead};
use super::dqn::{DqnAgent, DqnConfig};
use super::grid::ActionTable;
use super::{Algo, TrainedVictim, Victim};
use crate::envs::{make_env, EnvKind, EnvSettings, Environment};
use crate::error::{Error, Result};
use crate::numerics::MlpParams;
use crate::rng::{derive_seed, RngStream};
use crate::trace::{ActionValue, StateVec, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Environment steps (summed over workers for actor-critic).
    pub steps: u64,
    pub dqn: DqnConfig,
    pub a3c: A3cConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 200_000,
            dqn: DqnConfig::default(),
            a3c: A3cConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub victim: TrainedVictim,
    /// Return of every training episode, in completion order.
    pub curve: Vec<f64>,
}

/// Passed to the per-episode observer during training.
pub struct EpisodeEnd<'a> {
    pub index: usize,
    pub ret: f64,
    pub victim: &'a dyn Victim,
}

const SEED_INIT: u64 = 0x1;
const SEED_EPISODE: u64 = 0x1_0000;
const SEED_WORKER: u64 = 0x2_0000_0000;

/// Trains a fresh victim until the step budget is spent.
pub fn train_victim(
    kind: EnvKind,
    settings: &EnvSettings,
    algo: Algo,
    cfg: &TrainConfig,
    seed: u64,
    observer: Option<&mut dyn FnMut(EpisodeEnd<'_>)>,
) -> Result<TrainOutcome> {
    match algo {
        Algo::Dqn => train_dqn(kind, settings, cfg, seed, observer),
        Algo::A3c => train_a3c(kind, settings, cfg, seed, observer),
    }
}

fn diverged(what: &str, value: f64, episode: usize) -> Error {
    Error::Divergence(format!("{what} became {value} during training episode {episode}"))
}

fn train_dqn(
    kind: EnvKind,
    settings: &EnvSettings,
    cfg: &TrainConfig,
    seed: u64,
    mut observer: Option<&mut dyn FnMut(EpisodeEnd<'_>)>,
) -> Result<TrainOutcome> {
    let mut rng = RngStream::new(derive_seed(seed, SEED_INIT));
    let mut env = make_env(kind, settings);
    let contract = env.contract();
    let mut agent = DqnAgent::new(contract.observation_dim, ActionTable::for_env(kind), cfg.dqn.clone(), &mut rng);
    let mut curve = Vec::new();
    let mut steps = 0u64;
    while steps < cfg.steps {
        let episode = curve.len();
        let mut state = env.reset(derive_seed(seed, SEED_EPISODE + episode as u64));
        let mut ret = 0.0;
        let mut len = 0;
        loop {
            let a = agent.act_index(&state, true, &mut rng)?;
            let step = env.step(&agent.table.action(a))?;
            len += 1;
            ret += step.reward;
            // Time-limit endings are not terminal for bootstrapping.
            let terminal = step.done && len < contract.max_steps;
            agent.observe(Transition {
                state,
                action: ActionValue::Discrete(a),
                reward: step.reward,
                next_state: step.state.clone(),
                done: terminal,
            });
            steps += 1;
            if agent.replay().len() >= cfg.dqn.learning_starts && steps % cfg.dqn.train_every.max(1) == 0 {
                if let Some(loss) = agent.train_from_replay(&mut rng)? {
                    if !loss.is_finite() {
                        return Err(diverged("TD loss", loss, episode));
                    }
                }
            }
            state = step.state;
            if step.done {
                break;
            }
        }
        if !ret.is_finite() {
            return Err(diverged("episode return", ret, episode));
        }
        curve.push(ret);
        if let Some(obs) = observer.as_deref_mut() {
            obs(EpisodeEnd {
                index: episode,
                ret,
                victim: &agent,
            });
        }
    }
    Ok(TrainOutcome {
        victim: TrainedVictim::Dqn(agent),
        curve,
    })
}

struct Worker {
    env: Box<dyn Environment>,
    rng: RngStream,
    state: StateVec,
    ret: f64,
    len: usize,
    episodes: u64,
    id: u64,
}

struct Rollout {
    fragment: Fragment,
    finished: Vec<f64>,
}

impl Worker {
    fn start_episode(&mut self, seed: u64) {
        let episode_seed = derive_seed(seed, SEED_WORKER * (self.id + 1) + self.episodes);
        self.state = self.env.reset(episode_seed);
        self.ret = 0.0;
        self.len = 0;
    }

    fn rollout(&mut self, agent: &A3cAgent, snapshot: &MlpParams, seed: u64) -> Result<Rollout> {
        let max_steps = self.env.contract().max_steps;
        let mut fragment = Fragment {
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            bootstrap: None,
        };
        let mut finished = Vec::new();
        for _ in 0..agent.cfg.n_step {
            let sample = agent.sample_with(snapshot, &self.state, &mut self.rng)?;
            let step = self.env.step(&agent.to_env_action(&sample))?;
            self.ret += step.reward;
            self.len += 1;
            fragment.states.push(std::mem::replace(&mut self.state, step.state));
            fragment.actions.push(sample);
            fragment.rewards.push(step.reward);
            if step.done {
                if self.len >= max_steps {
                    fragment.bootstrap = Some(self.state.clone());
                }
                finished.push(self.ret);
                self.episodes += 1;
                self.start_episode(seed);
                return Ok(Rollout { fragment, finished });
            }
        }
        fragment.bootstrap = Some(self.state.clone());
        Ok(Rollout { fragment, finished })
    }
}

/// Workers roll out against one shared snapshot per round (in parallel), then
/// their gradients are applied one at a time in worker order. The schedule is
/// fixed, so results do not depend on thread timing.
fn train_a3c(
    kind: EnvKind,
    settings: &EnvSettings,
    cfg: &TrainConfig,
    seed: u64,
    mut observer: Option<&mut dyn FnMut(EpisodeEnd<'_>)>,
) -> Result<TrainOutcome> {
    let mut rng = RngStream::new(derive_seed(seed, SEED_INIT));
    let probe = make_env(kind, settings);
    let contract = probe.contract();
    let head = PolicyHead::Discrete(ActionTable::for_env(kind));
    let mut agent = A3cAgent::new(contract.observation_dim, head, cfg.a3c.clone(), &mut rng);
    let n_workers = cfg.a3c.n_workers.max(1);
    let mut workers: Vec<Worker> = (0..n_workers as u64)
        .map(|id| {
            let mut w = Worker {
                env: make_env(kind, settings),
                rng: rng.fork(id),
                state: StateVec::zeros(contract.observation_dim),
                ret: 0.0,
                len: 0,
                episodes: 0,
                id,
            };
            w.start_episode(seed);
            w
        })
        .collect();

    let mut curve = Vec::new();
    let mut steps = 0u64;
    while steps < cfg.steps {
        let snapshot = agent.net.clone();
        let rollouts: Vec<Result<Rollout>> = workers
            .par_iter_mut()
            .map(|w| w.rollout(&agent, &snapshot, seed))
            .collect();
        for rollout in rollouts {
            let rollout = rollout?;
            steps += rollout.fragment.states.len() as u64;
            let (grads, loss) = agent.fragment_gradients(&snapshot, &rollout.fragment)?;
            if !(loss.policy.is_finite() && loss.value.is_finite()) {
                return Err(diverged("actor-critic loss", loss.policy + loss.value, curve.len()));
            }
            agent.apply_gradients(grads);
            for ret in rollout.finished {
                if !ret.is_finite() {
                    return Err(diverged("episode return", ret, curve.len()));
                }
                curve.push(ret);
                if let Some(obs) = observer.as_deref_mut() {
                    obs(EpisodeEnd {
                        index: curve.len() - 1,
                        ret,
                        victim: &agent,
                    });
                }
            }
        }
    }
    Ok(TrainOutcome {
        victim: TrainedVictim::A3c(agent),
        curve,
    })
}

/// Mean return of the uniform-random policy over the victim's action table,
/// on the given episode seeds.
pub fn random_policy_return(kind: EnvKind, settings: &EnvSettings, seeds: &[u64], rng_seed: u64) -> Result<f64> {
    let mut env = make_env(kind, settings);
    let table = ActionTable::for_env(kind);
    let mut rng = RngStream::new(rng_seed);
    let mut total = 0.0;
    for &seed in seeds {
        env.reset(seed);
        loop {
            let step = env.step(&table.action(rng.below(table.len())))?;
            total += step.reward;
            if step.done {
                break;
            }
        }
    }
    Ok(total / seeds.len().max(1) as f64)
}
