//! Per-episode reward curves for the training run and for attacked
//! evaluations of training snapshots.

use std::io::Write;
use std::path::Path;

use super::cell::{episode_seed, row_seed, train_pepg_timer, victim_seed};
use super::config::ExperimentConfig;
use super::episode::{run_attacked_episode, Timer, TimerKind};
use crate::envs::{make_env, EnvKind};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::trace::episode_return;
use crate::victims::{train_victim, ActionTable, Algo, EpisodeEnd, FrozenVictim};

const SEED_CURVE_PEPG: u64 = 0xC0;

/// Named columns of per-episode values; `None` marks episodes a condition
/// was not evaluated on.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardCurves {
    pub conditions: Vec<(String, Vec<Option<f64>>)>,
}

impl RewardCurves {
    pub fn episodes(&self) -> usize {
        self.conditions.iter().map(|(_, v)| v.len()).max().unwrap_or(0)
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.conditions.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Header `episode,<condition>...`, one row per episode.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        if self.episodes() == 0 {
            return Err(Error::Precondition("reward curves are empty".into()));
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["episode".to_string()];
        header.extend(self.conditions.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        for i in 0..self.episodes() {
            let mut record = vec![i.to_string()];
            for (_, values) in &self.conditions {
                record.push(values.get(i).copied().flatten().map(|v| v.to_string()).unwrap_or_default());
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn export_reward_curves(curves: &RewardCurves, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    curves.write_csv(std::fs::File::create(path)?)
}

/// Trains a victim, keeping a snapshot every `eval.curve_stride` episodes.
/// The `baseline` column is the training curve itself; every other column
/// is one attacked greedy episode of the snapshot at that index, with the
/// first configured noise kind. The PEPG timer is trained once, against the
/// final victim.
pub fn reward_curves(cfg: &ExperimentConfig, env: EnvKind, algo: Algo) -> Result<RewardCurves> {
    let stride = cfg.eval.curve_stride;
    let mut snapshots = Vec::new();
    let mut snapshot_error = None;
    let mut observer = |end: EpisodeEnd<'_>| {
        if end.index % stride == 0 {
            match FrozenVictim::of(end.victim, ActionTable::for_env(env)) {
                Ok(v) => snapshots.push((end.index, v)),
                Err(e) => snapshot_error = Some(e),
            }
        }
    };
    let outcome = train_victim(env, &cfg.env_settings(), algo, &cfg.train, victim_seed(cfg.env.seed, env, algo), Some(&mut observer))?;
    if let Some(e) = snapshot_error {
        return Err(e);
    }

    let seed = row_seed(cfg.env.seed, env, algo);
    let noise = cfg.noise.build()?.remove(0);
    let pepg = train_pepg_timer(cfg, env, outcome.victim.as_victim(), &noise, derive_seed(seed, SEED_CURVE_PEPG))?;
    let timers = [
        Timer::Random,
        Timer::Wma { beta: cfg.attacker.beta },
        Timer::Pepg(pepg),
        Timer::Lin { beta: cfg.attacker.beta },
    ];

    let n = outcome.curve.len();
    let mut conditions = vec![(TimerKind::None.name().to_string(), outcome.curve.iter().map(|&r| Some(r)).collect::<Vec<_>>())];
    let mut environment = make_env(env, &cfg.env_settings());
    for timer in &timers {
        let mut column = vec![None; n];
        for (index, victim) in &snapshots {
            let trace = run_attacked_episode(
                environment.as_mut(),
                victim,
                timer,
                &noise,
                cfg.attacker.budget,
                episode_seed(seed, *index),
            )?;
            column[*index] = Some(episode_return(&trace)?);
        }
        conditions.push((timer.kind().name().to_string(), column));
    }
    Ok(RewardCurves { conditions })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let curves = RewardCurves {
            conditions: ["baseline", "random", "wma", "pepg", "lin"]
                .iter()
                .map(|n| (n.to_string(), vec![Some(1.5), None, Some(-0.25)]))
                .collect(),
        };
        let mut out = Vec::new();
        curves.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "episode,baseline,random,wma,pepg,lin");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[2], "1,,,,,");
        assert_eq!(lines[3].split(',').count(), 6);
    }

    #[test]
    fn empty_curves_are_rejected() {
        let curves = RewardCurves { conditions: vec![] };
        assert!(curves.write_csv(Vec::new()).is_err());
    }
}
