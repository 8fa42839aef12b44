//! Experiment configuration, read from TOML. Every field has a default, so
//! an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::TimerKind;
use crate::attackers::{PepgConfig, DEFAULT_BETA, DEFAULT_BUDGET};
use crate::envs::{CarConfig, CollectorConfig, EnvKind, EnvSettings, ReacherConfig};
use crate::error::{Error, Result};
use crate::noise::{NoiseKind, NoiseName, DEFAULT_EPSILON, DEFAULT_KERNEL_SIZE, DEFAULT_SIGMA};
use crate::victims::{Algo, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub kind: EnvKind,
    /// Master seed; every other seed in a run is derived from it.
    pub seed: u64,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            kind: EnvKind::Collector,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VictimSection {
    pub algo: Algo,
    /// Trained victims are cached here; unset means always retrain.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for VictimSection {
    fn default() -> Self {
        Self {
            algo: Algo::Dqn,
            checkpoint_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    /// Single noise kind; overrides `kinds` when set.
    pub kind: Option<NoiseName>,
    /// Noise kinds an attacked cell averages over.
    pub kinds: Vec<NoiseName>,
    pub epsilon: f64,
    pub kernel: usize,
    pub sigma: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            kind: None,
            kinds: NoiseName::PHYSICAL.to_vec(),
            epsilon: DEFAULT_EPSILON,
            kernel: DEFAULT_KERNEL_SIZE,
            sigma: DEFAULT_SIGMA,
        }
    }
}

impl NoiseSection {
    pub fn names(&self) -> Vec<NoiseName> {
        match self.kind {
            Some(k) => vec![k],
            None => self.kinds.clone(),
        }
    }

    pub fn build(&self) -> Result<Vec<NoiseKind>> {
        self.names()
            .into_iter()
            .map(|n| NoiseKind::build(n, self.epsilon, self.kernel, self.sigma))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackerSection {
    pub kind: TimerKind,
    pub beta: f64,
    pub budget: usize,
}

impl Default for AttackerSection {
    fn default() -> Self {
        Self {
            kind: TimerKind::Wma,
            beta: DEFAULT_BETA,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub episodes_per_noise: usize,
    /// Training-episode stride between snapshots in `curves`.
    pub curve_stride: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            episodes_per_noise: 10,
            curve_stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSection,
    pub victim: VictimSection,
    pub train: TrainConfig,
    pub noise: NoiseSection,
    pub attacker: AttackerSection,
    pub pepg: PepgConfig,
    pub eval: EvalSection,
    pub output: OutputSection,
    pub reacher: ReacherConfig,
    pub collector: CollectorConfig,
    pub car: CarConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// Reduced budgets for smoke runs: short training, one episode per
    /// noise kind, and a tiny PEPG search.
    pub fn quick(mut self) -> Self {
        self.train.steps = 3_000;
        self.train.dqn.learning_starts = 500;
        self.train.dqn.eps_decay_steps = 2_000;
        self.train.dqn.replay_capacity = 3_000;
        self.eval.episodes_per_noise = 1;
        self.pepg.population = 4;
        self.pepg.generations = 2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval.episodes_per_noise == 0 {
            return Err(Error::Config("eval.episodes_per_noise must be at least 1".into()));
        }
        if self.eval.curve_stride == 0 {
            return Err(Error::Config("eval.curve_stride must be at least 1".into()));
        }
        if self.noise.names().is_empty() {
            return Err(Error::Config("noise.kinds must name at least one noise kind".into()));
        }
        if !(0.0..1.0).contains(&self.attacker.beta) {
            return Err(Error::Config(format!("attacker.beta must lie in [0, 1), got {}", self.attacker.beta)));
        }
        if self.pepg.population < 2 {
            return Err(Error::Config("pepg.population must be at least 2".into()));
        }
        self.noise.build()?;
        Ok(())
    }

    pub fn env_settings(&self) -> EnvSettings {
        EnvSettings {
            reacher: self.reacher.clone(),
            collector: self.collector.clone(),
            car: self.car.clone(),
        }
    }

    /// PEPG settings with the attack budget taken from `attacker.budget`.
    pub fn pepg_config(&self) -> PepgConfig {
        PepgConfig {
            budget: self.attacker.budget,
            ..self.pepg
        }
    }
}
