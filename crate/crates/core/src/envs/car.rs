//! Single-lane driving: keep the cross-track error small on a winding road.
//! The observation is a binary bird's-eye occupancy grid of road ahead.

use serde::{Deserialize, Serialize};

use super::{ActionSpace, EnvContract, Environment, Step};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::trace::{ActionValue, StateVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarConfig {
    pub max_steps: usize,
    /// Grid side length; the observation has `grid * grid` cells.
    pub grid: usize,
    pub cte_max: f64,
    pub steer_gain: f64,
    pub speed: f64,
    /// Road curvature is `curvature_amp * sin(2 pi s / curvature_period)` per step.
    pub curvature_amp: f64,
    pub curvature_period: f64,
    pub lookahead: f64,
    /// Half-width of the lateral field of view.
    pub view_half_width: f64,
    pub reward_scale: f64,
}

impl Default for CarConfig {
    fn default() -> Self {
        Self {
            max_steps: 400,
            grid: 16,
            cte_max: 1.0,
            steer_gain: 0.2,
            speed: 0.1,
            curvature_amp: 0.03,
            curvature_period: 8.0,
            lookahead: 2.0,
            view_half_width: 1.5,
            reward_scale: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CarEnv {
    cfg: CarConfig,
    /// Progress along the road.
    pub s: f64,
    pub cte: f64,
    pub heading_error: f64,
    steps: usize,
    done: bool,
}

impl CarEnv {
    pub fn new(cfg: CarConfig) -> Self {
        Self {
            cfg,
            s: 0.0,
            cte: 0.0,
            heading_error: 0.0,
            steps: 0,
            done: false,
        }
    }

    pub fn curvature(&self, s: f64) -> f64 {
        if self.cfg.curvature_amp == 0.0 {
            return 0.0;
        }
        self.cfg.curvature_amp * (std::f64::consts::TAU * s / self.cfg.curvature_period).sin()
    }

    /// Lateral offset of the road centre `ds` ahead, measured from the
    /// current road tangent. The road turns by `-curvature` per step of
    /// `speed` progress, mirroring the heading-error dynamics.
    fn centre_offsets(&self, max_ds: f64) -> Vec<f64> {
        let h = self.cfg.speed;
        let n = (max_ds / h).ceil() as usize + 1;
        let mut offsets = Vec::with_capacity(n + 1);
        let (mut psi, mut y) = (0.0f64, 0.0f64);
        offsets.push(0.0);
        for k in 0..n {
            psi -= self.curvature(self.s + k as f64 * h);
            y += h * psi.sin();
            offsets.push(y);
        }
        offsets
    }

    pub fn observe(&self) -> StateVec {
        let g = self.cfg.grid;
        let reach = self.cfg.lookahead + self.cfg.view_half_width;
        let offsets = self.centre_offsets(reach);
        let h = self.cfg.speed;
        let (c, s) = (self.heading_error.cos(), self.heading_error.sin());
        let mut cells = Vec::with_capacity(g * g);
        for i in 0..g {
            let fwd = (i as f64 + 0.5) / g as f64 * self.cfg.lookahead;
            for j in 0..g {
                let lat = -self.cfg.view_half_width + (j as f64 + 0.5) / g as f64 * 2.0 * self.cfg.view_half_width;
                let ds = fwd * c - lat * s;
                let n = self.cte + fwd * s + lat * c;
                let centre = if ds <= 0.0 {
                    0.0
                } else {
                    let x = ds / h;
                    let k = (x.floor() as usize).min(offsets.len() - 2);
                    let frac = x - k as f64;
                    offsets[k] * (1.0 - frac) + offsets[k + 1] * frac
                };
                cells.push(if (n - centre).abs() < self.cfg.cte_max { 1.0 } else { 0.0 });
            }
        }
        StateVec::new(cells)
    }
}

impl Environment for CarEnv {
    fn contract(&self) -> EnvContract {
        EnvContract {
            observation_dim: self.cfg.grid * self.cfg.grid,
            action_space: ActionSpace::Continuous(2),
            max_steps: self.cfg.max_steps,
            grid_shape: Some((self.cfg.grid, self.cfg.grid)),
        }
    }

    fn reset(&mut self, seed: u64) -> StateVec {
        let mut rng = RngStream::new(seed);
        self.s = rng.uniform_range(0.0, self.cfg.curvature_period);
        self.cte = rng.uniform_range(-0.2, 0.2) * self.cfg.cte_max;
        self.heading_error = rng.uniform_range(-0.1, 0.1);
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    /// The first action entry is steering; a second entry is accepted and ignored.
    fn step(&mut self, action: &ActionValue) -> Result<Step> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        let steer = match action {
            ActionValue::Continuous(v) if (1..=2).contains(&v.len()) => v[0].clamp(-1.0, 1.0),
            other => return Err(Error::InvalidAction(format!("car expects [steer] or [steer, _], got {other:?}"))),
        };
        self.heading_error += self.cfg.steer_gain * steer + self.curvature(self.s);
        self.cte += self.cfg.speed * self.heading_error.sin();
        self.s += self.cfg.speed * self.heading_error.cos();
        self.steps += 1;
        let off_road = self.cte.abs() >= self.cfg.cte_max;
        let reward = if off_road {
            0.0
        } else {
            (1.0 - self.cte.abs() / self.cfg.cte_max) * self.cfg.reward_scale
        };
        self.done = off_road || self.steps >= self.cfg.max_steps;
        Ok(Step {
            state: self.observe(),
            reward,
            done: self.done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight() -> CarEnv {
        let mut env = CarEnv::new(CarConfig {
            curvature_amp: 0.0,
            ..CarConfig::default()
        });
        env.reset(0);
        env.cte = 0.0;
        env.heading_error = 0.0;
        env
    }

    fn steer(v: f64) -> ActionValue {
        ActionValue::continuous(vec![v, 0.0])
    }

    #[test]
    fn centred_car_earns_full_reward() {
        let mut env = straight();
        let s = env.step(&steer(0.0)).unwrap();
        assert!((s.reward - 0.001).abs() < 1e-15);
    }

    #[test]
    fn straight_road_keeps_zero_cte_for_the_whole_episode() {
        let mut env = straight();
        let mut n = 0;
        loop {
            let s = env.step(&steer(0.0)).unwrap();
            n += 1;
            assert_eq!(env.cte, 0.0);
            if s.done {
                break;
            }
        }
        assert_eq!(n, 400);
    }

    #[test]
    fn leaving_the_road_ends_the_episode_with_zero_reward() {
        let mut env = straight();
        env.cte = 0.99;
        env.heading_error = 1.0;
        let s = env.step(&steer(1.0)).unwrap();
        assert!(s.done);
        assert_eq!(s.reward, 0.0);
        assert!(matches!(env.step(&steer(0.0)), Err(Error::StepAfterDone)));
    }

    #[test]
    fn grid_is_binary_and_centred_on_straight_road() {
        let env = straight();
        let obs = env.observe();
        assert_eq!(obs.len(), 256);
        assert!(obs.iter().all(|&v| v == 0.0 || v == 1.0));
        // lateral cells within one road half-width of the centre are road
        for i in 0..16 {
            let row = &obs[i * 16..(i + 1) * 16];
            assert_eq!(row, &obs[0..16]);
            assert_eq!(row.iter().sum::<f64>(), 10.0);
        }
    }

    #[test]
    fn reward_stays_in_unit_thousandth() {
        let mut env = CarEnv::new(CarConfig::default());
        env.reset(9);
        let mut rng = RngStream::new(1);
        loop {
            let s = env.step(&steer(rng.uniform_range(-1.0, 1.0))).unwrap();
            assert!((0.0..=0.001).contains(&s.reward));
            if s.done {
                break;
            }
        }
    }

    #[test]
    fn second_action_entry_is_ignored() {
        let mut a = straight();
        let mut b = straight();
        a.step(&steer(0.3)).unwrap();
        b.step(&ActionValue::continuous(vec![0.3, -1.0])).unwrap();
        assert_eq!(a.heading_error, b.heading_error);
        assert!(a.step(&ActionValue::continuous(vec![0.0; 3])).is_err());
    }
}
