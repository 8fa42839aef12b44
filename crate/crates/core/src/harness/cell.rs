//! Table cells: a victim evaluated under one timer across the noise kinds.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::episode::{run_attacked_episode, Timer, TimerKind};
use crate::attackers::{pepg_asa_train, AttackerPolicy, Perturbation};
use crate::envs::{make_env, EnvKind, Environment};
use crate::error::{Error, Result};
use crate::noise::{NoiseKind, NoiseName};
use crate::rng::{derive_seed, RngStream};
use crate::trace::{episode_return, EpisodeTrace};
use crate::victims::{load_victim, save_victim, train_victim, Algo, TrainedVictim, Victim};

const SEED_ROW: u64 = 0x100;
const SEED_VICTIM: u64 = 0x5EED;
const SEED_EPISODE: u64 = 0xE000;
const SEED_PEPG: u64 = 0xA000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// `None` for unattacked episodes.
    pub noise: Option<NoiseName>,
    pub episode: usize,
    pub ret: f64,
    pub attacks: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellResult {
    pub episodes: Vec<EpisodeRecord>,
}

impl CellResult {
    pub fn returns(&self) -> impl Iterator<Item = f64> + '_ {
        self.episodes.iter().map(|e| e.ret)
    }

    /// Sum of returns over the number of episodes.
    pub fn aggregate(&self) -> f64 {
        self.returns().sum::<f64>() / self.episodes.len().max(1) as f64
    }

    /// Population standard deviation of the per-episode returns.
    pub fn std(&self) -> f64 {
        let n = self.episodes.len().max(1) as f64;
        let mean = self.aggregate();
        (self.returns().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt()
    }

    pub fn max_attacks(&self) -> usize {
        self.episodes.iter().map(|e| e.attacks).max().unwrap_or(0)
    }

    pub fn total_attacks(&self) -> usize {
        self.episodes.iter().map(|e| e.attacks).sum()
    }

    /// `mean±std` with one decimal.
    pub fn display(&self) -> String {
        format!("{:.1}±{:.1}", self.aggregate(), self.std())
    }
}

/// Seed for a table row; fixed per (env, algo) so a single cell run
/// reproduces the corresponding table cell.
pub fn row_seed(master: u64, env: EnvKind, algo: Algo) -> u64 {
    let env_index = EnvKind::ALL.iter().position(|&k| k == env).unwrap_or(0) as u64;
    let algo_index = Algo::ALL.iter().position(|&a| a == algo).unwrap_or(0) as u64;
    derive_seed(master, SEED_ROW + 2 * env_index + algo_index)
}

pub fn episode_seed(row_seed: u64, index: usize) -> u64 {
    derive_seed(row_seed, SEED_EPISODE + index as u64)
}

pub fn victim_seed(master: u64, env: EnvKind, algo: Algo) -> u64 {
    derive_seed(row_seed(master, env, algo), SEED_VICTIM)
}

pub fn checkpoint_path(cfg: &ExperimentConfig, env: EnvKind, algo: Algo) -> Option<PathBuf> {
    cfg.victim.checkpoint_dir.as_ref().map(|dir| {
        dir.join(format!(
            "{env}-{algo}-{:016x}-{}.ckpt",
            victim_seed(cfg.env.seed, env, algo),
            cfg.train.steps
        ))
    })
}

/// Loads the cached victim for (env, algo) or trains and caches it.
pub fn obtain_victim(cfg: &ExperimentConfig, env: EnvKind, algo: Algo) -> Result<TrainedVictim> {
    let path = checkpoint_path(cfg, env, algo);
    if let Some(p) = path.as_ref().filter(|p| p.exists()) {
        return load_victim(p);
    }
    let outcome = train_victim(env, &cfg.env_settings(), algo, &cfg.train, victim_seed(cfg.env.seed, env, algo), None)?;
    if let Some(p) = path {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        save_victim(&p, &outcome.victim)?;
    }
    Ok(outcome.victim)
}

/// Trains a black-box attack timer for one noise kind.
pub fn train_pepg_timer(
    cfg: &ExperimentConfig,
    env: EnvKind,
    victim: &dyn Victim,
    noise: &NoiseKind,
    seed: u64,
) -> Result<AttackerPolicy> {
    let settings = cfg.env_settings();
    let grid_shape = make_env(env, &settings).contract().grid_shape;
    let factory = move || make_env(env, &settings);
    let perturb = |s: &[f64], rng: &mut RngStream| noise.apply(s, victim, grid_shape, rng);
    let perturb: &Perturbation = &perturb;
    Ok(pepg_asa_train(&factory, victim, perturb, &cfg.pepg_config(), seed)?.policy)
}

fn record(trace: &EpisodeTrace, noise: Option<NoiseName>, episode: usize) -> Result<EpisodeRecord> {
    Ok(EpisodeRecord {
        noise,
        episode,
        ret: episode_return(trace)?,
        attacks: trace.attack_count(),
        frames: trace.len(),
    })
}

/// Like [`evaluate_cell`], also returning every episode trace.
pub fn evaluate_cell_traced(
    cfg: &ExperimentConfig,
    env: EnvKind,
    victim: &dyn Victim,
    timer: TimerKind,
    row_seed: u64,
    keep_traces: bool,
) -> Result<(CellResult, Vec<EpisodeTrace>)> {
    let noises = cfg.noise.build()?;
    let per_noise = cfg.eval.episodes_per_noise;
    let budget = cfg.attacker.budget;
    let mut env_box: Box<dyn Environment> = make_env(env, &cfg.env_settings());
    let mut cell = CellResult::default();
    let mut traces = Vec::new();
    let mut keep = |trace: EpisodeTrace, noise, index| -> Result<()> {
        cell.episodes.push(record(&trace, noise, index)?);
        if keep_traces {
            traces.push(trace);
        }
        Ok(())
    };

    if timer == TimerKind::None {
        for index in 0..noises.len() * per_noise {
            let trace = run_attacked_episode(
                env_box.as_mut(),
                victim,
                &Timer::None,
                &NoiseKind::ZeroOut,
                budget,
                episode_seed(row_seed, index),
            )?;
            keep(trace, None, index)?;
        }
        return Ok((cell, traces));
    }

    for (j, noise) in noises.iter().enumerate() {
        let configured = match timer {
            TimerKind::None => unreachable!(),
            TimerKind::Random => Timer::Random,
            TimerKind::Lin => Timer::Lin { beta: cfg.attacker.beta },
            TimerKind::Wma => Timer::Wma { beta: cfg.attacker.beta },
            TimerKind::Pepg => Timer::Pepg(train_pepg_timer(cfg, env, victim, noise, derive_seed(row_seed, SEED_PEPG + j as u64))?),
        };
        for e in 0..per_noise {
            let index = j * per_noise + e;
            let trace = run_attacked_episode(env_box.as_mut(), victim, &configured, noise, budget, episode_seed(row_seed, index))?;
            keep(trace, Some(noise.name()), index)?;
        }
    }
    Ok((cell, traces))
}

/// Runs `episodes_per_noise` seeded episodes per configured noise kind (the
/// baseline runs the same number of unattacked episodes) and aggregates.
pub fn evaluate_cell(cfg: &ExperimentConfig, env: EnvKind, victim: &dyn Victim, timer: TimerKind, row_seed: u64) -> Result<CellResult> {
    evaluate_cell_traced(cfg, env, victim, timer, row_seed, false).map(|(cell, _)| cell)
}

/// Checks that an env and a victim agree on the observation width.
pub fn check_compatible(env: EnvKind, cfg: &ExperimentConfig, victim: &dyn Victim) -> Result<()> {
    let dim = make_env(env, &cfg.env_settings()).contract().observation_dim;
    if dim != victim.observation_dim() {
        return Err(Error::Shape {
            expected: dim,
            got: victim.observation_dim(),
        });
    }
    Ok(())
}
