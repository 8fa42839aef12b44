//! Two-link planar arm that must hold its fingertip inside a goal disc.

use serde::{Deserialize, Serialize};

use super::{ActionSpace, EnvContract, Environment, Step};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::trace::{ActionValue, StateVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReacherConfig {
    pub max_steps: usize,
    pub dt: f64,
    pub damping: f64,
    pub torque_gain: f64,
    pub goal_radius: f64,
    pub goal_reward: f64,
}

impl Default for ReacherConfig {
    fn default() -> Self {
        Self {
            max_steps: 200,
            dt: 0.1,
            damping: 0.9,
            torque_gain: 0.2,
            goal_radius: 0.15,
            goal_reward: 0.1,
        }
    }
}

pub const REACHER_OBS_DIM: usize = 10;

#[derive(Debug, Clone)]
pub struct ReacherEnv {
    cfg: ReacherConfig,
    pub theta: [f64; 2],
    pub omega: [f64; 2],
    pub target: [f64; 2],
    steps: usize,
    done: bool,
}

impl ReacherEnv {
    pub fn new(cfg: ReacherConfig) -> Self {
        Self {
            cfg,
            theta: [0.0; 2],
            omega: [0.0; 2],
            target: [2.0, 0.0],
            steps: 0,
            done: false,
        }
    }

    /// Fingertip position; the second angle is relative to the first link.
    pub fn tip(&self) -> [f64; 2] {
        let [t1, t2] = self.theta;
        [t1.cos() + (t1 + t2).cos(), t1.sin() + (t1 + t2).sin()]
    }

    pub fn in_goal(&self) -> bool {
        let [x, y] = self.tip();
        ((x - self.target[0]).powi(2) + (y - self.target[1]).powi(2)).sqrt() < self.cfg.goal_radius
    }

    pub fn observe(&self) -> StateVec {
        let [t1, t2] = self.theta;
        let tip = self.tip();
        StateVec::new(vec![
            t1.cos(),
            t1.sin(),
            t2.cos(),
            t2.sin(),
            self.omega[0],
            self.omega[1],
            self.target[0],
            self.target[1],
            tip[0],
            tip[1],
        ])
    }
}

impl Environment for ReacherEnv {
    fn contract(&self) -> EnvContract {
        EnvContract {
            observation_dim: REACHER_OBS_DIM,
            action_space: ActionSpace::Continuous(4),
            max_steps: self.cfg.max_steps,
            grid_shape: None,
        }
    }

    fn reset(&mut self, seed: u64) -> StateVec {
        let mut rng = RngStream::new(seed);
        let pi = std::f64::consts::PI;
        self.theta = [rng.uniform_range(-pi, pi), rng.uniform_range(-pi, pi)];
        self.omega = [0.0; 2];
        let angle = rng.uniform_range(-pi, pi);
        let radius = rng.uniform_range(0.5, 1.8);
        self.target = [radius * angle.cos(), radius * angle.sin()];
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: &ActionValue) -> Result<Step> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        let a = match action {
            ActionValue::Continuous(v) if v.len() == 4 => v,
            other => return Err(Error::InvalidAction(format!("reacher expects 4 torques, got {other:?}"))),
        };
        let a: Vec<f64> = a.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        let torque = [(a[0] + a[1]).clamp(-1.0, 1.0), (a[2] + a[3]).clamp(-1.0, 1.0)];
        for j in 0..2 {
            self.omega[j] = (self.cfg.damping * self.omega[j] + self.cfg.torque_gain * torque[j]).clamp(-1.0, 1.0);
            self.theta[j] += self.omega[j] * self.cfg.dt;
        }
        self.steps += 1;
        let reward = if self.in_goal() { self.cfg.goal_reward } else { 0.0 };
        self.done = self.steps >= self.cfg.max_steps;
        Ok(Step {
            state: self.observe(),
            reward,
            done: self.done,
        })
    }
}
