//! One attacked rollout: the timer sees the true state, the victim sees the
//! noised state on attacked frames.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attackers::{
    lin_decide, pepg_asa_decide, AttackBudget, AttackDecision, AttackerPolicy, RandomTimer, WmaTimer,
};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::noise::NoiseKind;
use crate::rng::{derive_seed, RngStream};
use crate::trace::{EpisodeTrace, Transition};
use crate::victims::Victim;

/// Table columns, in display order. `None` is the unattacked baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerKind {
    #[serde(alias = "baseline")]
    None,
    Random,
    Wma,
    Pepg,
    Lin,
}

impl TimerKind {
    pub const ALL: [TimerKind; 5] = [TimerKind::None, TimerKind::Random, TimerKind::Wma, TimerKind::Pepg, TimerKind::Lin];

    /// Column label; the unattacked column is called `baseline`.
    pub fn name(self) -> &'static str {
        match self {
            TimerKind::None => "baseline",
            TimerKind::Random => "random",
            TimerKind::Wma => "wma",
            TimerKind::Pepg => "pepg",
            TimerKind::Lin => "lin",
        }
    }
}

impl fmt::Display for TimerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TimerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" | "baseline" => Ok(TimerKind::None),
            "random" => Ok(TimerKind::Random),
            "wma" => Ok(TimerKind::Wma),
            "pepg" => Ok(TimerKind::Pepg),
            "lin" => Ok(TimerKind::Lin),
            other => Err(format!("unknown timer `{other}` (none|random|wma|pepg|lin)")),
        }
    }
}

/// A configured timer, ready to be started for an episode.
#[derive(Debug, Clone)]
pub enum Timer {
    None,
    Random,
    Lin { beta: f64 },
    Wma { beta: f64 },
    Pepg(AttackerPolicy),
}

impl Timer {
    pub fn kind(&self) -> TimerKind {
        match self {
            Timer::None => TimerKind::None,
            Timer::Random => TimerKind::Random,
            Timer::Lin { .. } => TimerKind::Lin,
            Timer::Wma { .. } => TimerKind::Wma,
            Timer::Pepg(_) => TimerKind::Pepg,
        }
    }

    fn start(&self, d: usize, horizon: usize, cap: usize, rng: &mut RngStream) -> Result<ActiveTimer<'_>> {
        Ok(match self {
            Timer::None => ActiveTimer::None,
            Timer::Random => ActiveTimer::Random(RandomTimer::draw(rng, cap, horizon)),
            Timer::Lin { beta } => ActiveTimer::Lin(*beta),
            Timer::Wma { beta } => ActiveTimer::Wma(WmaTimer::new(d, horizon, *beta)?),
            Timer::Pepg(policy) => ActiveTimer::Pepg(policy),
        })
    }
}

enum ActiveTimer<'a> {
    None,
    Random(RandomTimer),
    Lin(f64),
    Wma(WmaTimer),
    Pepg(&'a AttackerPolicy),
}

impl ActiveTimer<'_> {
    fn decide(&mut self, frame: usize, state: &[f64], victim: &dyn Victim, budget: &mut AttackBudget) -> Result<AttackDecision> {
        match self {
            ActiveTimer::None => Ok(AttackDecision::PASS),
            ActiveTimer::Random(t) => Ok(t.random_decide(frame, budget)),
            ActiveTimer::Lin(beta) => Ok(lin_decide(&victim.white_box(state)?, *beta, budget)),
            ActiveTimer::Wma(t) => t.wma_decide(&victim.white_box(state)?, budget),
            ActiveTimer::Pepg(policy) => pepg_asa_decide(policy, state, budget),
        }
    }
}

const SEED_TIMER: u64 = 0x7419;
const SEED_NOISE: u64 = 0x9015;

/// Runs one greedy episode of `victim` under `timer` and `noise`.
///
/// Each transition's `state` is what the victim was shown (the noised state
/// on attacked frames); `next_state` is the environment's true next state.
/// The environment is reset with `seed`, so a timer-free episode with the
/// same seed is the plain greedy rollout.
pub fn run_attacked_episode(
    env: &mut dyn Environment,
    victim: &dyn Victim,
    timer: &Timer,
    noise: &NoiseKind,
    budget_cap: usize,
    seed: u64,
) -> Result<EpisodeTrace> {
    let contract = env.contract();
    if contract.observation_dim != victim.observation_dim() {
        return Err(Error::Shape {
            expected: contract.observation_dim,
            got: victim.observation_dim(),
        });
    }
    let mut timer_rng = RngStream::new(derive_seed(seed, SEED_TIMER));
    let mut noise_rng = RngStream::new(derive_seed(seed, SEED_NOISE));
    let mut active = timer.start(victim.action_count(), contract.max_steps, budget_cap, &mut timer_rng)?;
    let mut budget = AttackBudget::new(budget_cap);
    let mut trace = EpisodeTrace::new(seed);
    let mut state = env.reset(seed);
    for frame in 0.. {
        let decision = active.decide(frame, &state, victim, &mut budget)?;
        let shown = if decision.attack {
            trace.attacked_frames.insert(frame);
            noise.apply(&state, victim, contract.grid_shape, &mut noise_rng)?
        } else {
            state.clone()
        };
        let action = victim.act(&shown)?;
        let step = env.step(&action)?;
        let done = step.done;
        trace.transitions.push(Transition {
            state: shown,
            action,
            reward: step.reward,
            next_state: step.state.clone(),
            done,
        });
        if done {
            break;
        }
        state = step.state;
    }
    Ok(trace)
}
