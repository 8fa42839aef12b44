//! Top-down item collector: drive around the unit square picking up yellow
//! items (+1) while avoiding blue ones (-1). The observation is the agent's
//! body-frame velocity plus seven ray sensors.

use serde::{Deserialize, Serialize};

use super::{ActionSpace, EnvContract, Environment, Step};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::trace::{ActionValue, StateVec};

pub const COLLECTOR_OBS_DIM: usize = 37;
pub const RAY_COUNT: usize = 7;
const RAY_SLOTS: usize = 5;

pub const FORWARD: usize = 0;
pub const BACK: usize = 1;
pub const TURN_LEFT: usize = 2;
pub const TURN_RIGHT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectorConfig {
    pub max_steps: usize,
    pub n_yellow: usize,
    pub n_blue: usize,
    pub move_step: f64,
    pub turn_step: f64,
    pub pickup_radius: f64,
    /// Radius of an item as seen by the ray sensors.
    pub item_radius: f64,
    /// Angle between neighbouring rays, radians.
    pub ray_spacing: f64,
    pub ray_range: f64,
    /// Minimum distance between a (re)spawned item and the agent or other items.
    pub spawn_gap: f64,
}

impl Default for CollectorConfig {
    fn default() -> Self {
        Self {
            max_steps: 300,
            n_yellow: 8,
            n_blue: 4,
            move_step: 0.03,
            turn_step: 0.3,
            pickup_radius: 0.05,
            item_radius: 0.05,
            ray_spacing: 20f64.to_radians(),
            ray_range: 1.0,
            spawn_gap: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemColor {
    Yellow,
    Blue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Item {
    pub pos: [f64; 2],
    pub color: ItemColor,
}

#[derive(Debug, Clone)]
pub struct CollectorEnv {
    cfg: CollectorConfig,
    pub pos: [f64; 2],
    pub heading: f64,
    pub items: Vec<Item>,
    velocity: [f64; 2],
    rng: RngStream,
    steps: usize,
    done: bool,
}

enum Hit {
    Nothing,
    Wall(f64),
    Item(ItemColor, f64),
}

impl CollectorEnv {
    pub fn new(cfg: CollectorConfig) -> Self {
        Self {
            cfg,
            pos: [0.5, 0.5],
            heading: 0.0,
            items: Vec::new(),
            velocity: [0.0; 2],
            rng: RngStream::new(0),
            steps: 0,
            done: false,
        }
    }

    pub fn config(&self) -> &CollectorConfig {
        &self.cfg
    }

    fn free_location(&mut self) -> [f64; 2] {
        let gap = self.cfg.spawn_gap;
        let mut candidate = [0.5, 0.5];
        for _ in 0..100 {
            candidate = [self.rng.uniform_range(0.05, 0.95), self.rng.uniform_range(0.05, 0.95)];
            let clear_agent = dist(candidate, self.pos) >= gap;
            let clear_items = self.items.iter().all(|it| dist(candidate, it.pos) >= gap);
            if clear_agent && clear_items {
                break;
            }
        }
        candidate
    }

    fn cast(&self, angle: f64) -> Hit {
        let dir = [angle.cos(), angle.sin()];
        let range = self.cfg.ray_range;
        let wall = wall_distance(self.pos, dir);
        let mut best: Option<(ItemColor, f64)> = None;
        for item in &self.items {
            if let Some(t) = ray_circle(self.pos, dir, item.pos, self.cfg.item_radius) {
                if best.is_none_or(|(_, bt)| t < bt) {
                    best = Some((item.color, t));
                }
            }
        }
        match best {
            Some((color, t)) if t <= wall && t <= range => Hit::Item(color, t),
            _ if wall <= range => Hit::Wall(wall),
            _ => Hit::Nothing,
        }
    }

    pub fn observe(&self) -> StateVec {
        let mut obs = Vec::with_capacity(COLLECTOR_OBS_DIM);
        obs.push(self.velocity[0] / self.cfg.move_step);
        obs.push(self.velocity[1] / self.cfg.move_step);
        let half = (RAY_COUNT / 2) as f64;
        for r in 0..RAY_COUNT {
            let angle = self.heading + (r as f64 - half) * self.cfg.ray_spacing;
            let mut slot = [0.0; RAY_SLOTS];
            match self.cast(angle) {
                Hit::Nothing => slot[3] = 1.0,
                Hit::Wall(t) => {
                    slot[2] = 1.0;
                    slot[3] = (t / self.cfg.ray_range).clamp(0.0, 1.0);
                }
                Hit::Item(color, t) => {
                    slot[if color == ItemColor::Yellow { 0 } else { 1 }] = 1.0;
                    slot[3] = (t / self.cfg.ray_range).clamp(0.0, 1.0);
                }
            }
            obs.extend_from_slice(&slot);
        }
        StateVec::new(obs)
    }
}

impl Environment for CollectorEnv {
    fn contract(&self) -> EnvContract {
        EnvContract {
            observation_dim: COLLECTOR_OBS_DIM,
            action_space: ActionSpace::Discrete(4),
            max_steps: self.cfg.max_steps,
            grid_shape: None,
        }
    }

    fn reset(&mut self, seed: u64) -> StateVec {
        self.rng = RngStream::new(seed);
        self.pos = [self.rng.uniform_range(0.2, 0.8), self.rng.uniform_range(0.2, 0.8)];
        self.heading = self.rng.uniform_range(-std::f64::consts::PI, std::f64::consts::PI);
        self.items.clear();
        let colors = std::iter::repeat_n(ItemColor::Yellow, self.cfg.n_yellow)
            .chain(std::iter::repeat_n(ItemColor::Blue, self.cfg.n_blue))
            .collect::<Vec<_>>();
        for color in colors {
            let pos = self.free_location();
            self.items.push(Item { pos, color });
        }
        self.velocity = [0.0; 2];
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: &ActionValue) -> Result<Step> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        let id = match action {
            ActionValue::Discrete(id) if *id < 4 => *id,
            other => return Err(Error::InvalidAction(format!("collector expects an id in 0..4, got {other:?}"))),
        };
        let old = self.pos;
        match id {
            FORWARD | BACK => {
                let sign = if id == FORWARD { 1.0 } else { -1.0 };
                let step = sign * self.cfg.move_step;
                self.pos = [
                    (self.pos[0] + step * self.heading.cos()).clamp(0.0, 1.0),
                    (self.pos[1] + step * self.heading.sin()).clamp(0.0, 1.0),
                ];
            }
            TURN_LEFT => self.heading = wrap_angle(self.heading + self.cfg.turn_step),
            TURN_RIGHT => self.heading = wrap_angle(self.heading - self.cfg.turn_step),
            _ => unreachable!(),
        }
        let d = [self.pos[0] - old[0], self.pos[1] - old[1]];
        let (c, s) = (self.heading.cos(), self.heading.sin());
        self.velocity = [d[0] * c + d[1] * s, -d[0] * s + d[1] * c];

        let nearest = self
            .items
            .iter()
            .enumerate()
            .map(|(i, it)| (i, dist(it.pos, self.pos)))
            .filter(|&(_, dd)| dd < self.cfg.pickup_radius)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let mut reward = 0.0;
        if let Some((i, _)) = nearest {
            let item = self.items.remove(i);
            reward = match item.color {
                ItemColor::Yellow => 1.0,
                ItemColor::Blue => -1.0,
            };
            let pos = self.free_location();
            self.items.insert(i, Item { pos, color: item.color });
        }

        self.steps += 1;
        self.done = self.steps >= self.cfg.max_steps;
        Ok(Step {
            state: self.observe(),
            reward,
            done: self.done,
        })
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn wrap_angle(a: f64) -> f64 {
    let pi = std::f64::consts::PI;
    (a + pi).rem_euclid(2.0 * pi) - pi
}

/// Distance along `dir` from `p` (inside the unit square) to its boundary.
fn wall_distance(p: [f64; 2], dir: [f64; 2]) -> f64 {
    let mut t = f64::INFINITY;
    for k in 0..2 {
        if dir[k] > 1e-12 {
            t = t.min((1.0 - p[k]) / dir[k]);
        } else if dir[k] < -1e-12 {
            t = t.min(-p[k] / dir[k]);
        }
    }
    t.max(0.0)
}

/// First non-negative intersection of a ray with a disc, 0 when starting inside.
fn ray_circle(p: [f64; 2], dir: [f64; 2], center: [f64; 2], radius: f64) -> Option<f64> {
    let m = [p[0] - center[0], p[1] - center[1]];
    let b = m[0] * dir[0] + m[1] * dir[1];
    let c = m[0] * m[0] + m[1] * m[1] - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    if b > 0.0 {
        return None;
    }
    let disc = b * b - c;
    (disc >= 0.0).then(|| -b - disc.sqrt())
}
