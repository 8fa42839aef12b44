//! Black-box attack timer trained by parameter-exploring policy gradients.
//!
//! The attacker is a small MLP from the true state to one logit; it attacks
//! when `sigmoid(logit) > 0.5`. Its weights are drawn from a diagonal
//! Gaussian whose mean and stddev are the trained quantities. The victim is
//! only ever queried through [`Actor::act`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::timers::{AttackBudget, AttackDecision, DEFAULT_BUDGET};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::numerics::{MlpParams, MlpSpec};
use crate::rng::{derive_seed, RngStream};
use crate::trace::StateVec;
use crate::victims::Actor;

pub const SIGMA_MIN: f64 = 1e-3;

const SEED_SAMPLE: u64 = 0x5045_0000;
const SEED_EPISODE: u64 = 0x5045_1000_0000;
const SEED_NOISE: u64 = 0x5045_2000_0000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PepgConfig {
    pub population: usize,
    pub generations: usize,
    pub alpha_mu: f64,
    pub alpha_sigma: f64,
    pub initial_sigma: f64,
    pub sigma_min: f64,
    pub hidden: usize,
    /// Set from the attacker budget rather than read on its own.
    #[serde(skip)]
    pub budget: usize,
    /// Subtract the population-mean fitness before weighting samples.
    pub baseline: bool,
}

impl Default for PepgConfig {
    fn default() -> Self {
        Self {
            population: 32,
            generations: 200,
            alpha_mu: 0.1,
            alpha_sigma: 0.05,
            initial_sigma: 1.0,
            sigma_min: SIGMA_MIN,
            hidden: 16,
            budget: DEFAULT_BUDGET,
            baseline: true,
        }
    }
}

/// Diagonal Gaussian over attacker parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PepgDistribution {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
    pub alpha_mu: f64,
    pub alpha_sigma: f64,
    pub population: usize,
    pub sigma_min: f64,
}

impl PepgDistribution {
    pub fn new(mean: Vec<f64>, cfg: &PepgConfig) -> Result<Self> {
        if !(cfg.initial_sigma >= cfg.sigma_min) || !(cfg.sigma_min > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "initial sigma {} must be at least sigma_min {} > 0",
                cfg.initial_sigma, cfg.sigma_min
            )));
        }
        let n = mean.len();
        Ok(Self {
            mean,
            stddev: vec![cfg.initial_sigma; n],
            alpha_mu: cfg.alpha_mu,
            alpha_sigma: cfg.alpha_sigma,
            population: cfg.population,
            sigma_min: cfg.sigma_min,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.stddev)
            .map(|(m, s)| m + s * rng.standard_normal())
            .collect()
    }

    /// `ln p(theta | mean, stddev)`.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        theta
            .iter()
            .zip(self.mean.iter().zip(&self.stddev))
            .map(|(t, (m, s))| {
                let z = (t - m) / s;
                -0.5 * z * z - s.ln() - half_ln_2pi
            })
            .sum()
    }

    /// One ascent step. Both gradients are preconditioned by `sigma^2` and
    /// divided by `fitness_scale`; sigma is clamped to `sigma_min` afterwards.
    pub fn apply(&mut self, grad: &PepgGradient, fitness_scale: f64) -> Result<()> {
        if grad.mu.len() != self.dim() || grad.sigma.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                got: grad.mu.len(),
            });
        }
        if !(fitness_scale > 0.0) {
            return Err(Error::InvalidParameter(format!("fitness scale must be positive, got {fitness_scale}")));
        }
        for i in 0..self.dim() {
            let var = self.stddev[i] * self.stddev[i];
            self.mean[i] += self.alpha_mu * var * grad.mu[i] / fitness_scale;
            self.stddev[i] = (self.stddev[i] + self.alpha_sigma * var * grad.sigma[i] / fitness_scale).max(self.sigma_min);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PepgGradient {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Gradient of `ln p(theta)` with respect to the mean and the stddev.
pub fn pepg_log_grad(theta: &[f64], dist: &PepgDistribution) -> Result<PepgGradient> {
    if theta.len() != dist.dim() {
        return Err(Error::Shape {
            expected: dist.dim(),
            got: theta.len(),
        });
    }
    if let Some(s) = dist.stddev.iter().find(|&&s| !(s >= dist.sigma_min)) {
        return Err(Error::Precondition(format!("stddev {s} below sigma_min {}", dist.sigma_min)));
    }
    let mut mu = Vec::with_capacity(theta.len());
    let mut sigma = Vec::with_capacity(theta.len());
    for ((t, m), s) in theta.iter().zip(&dist.mean).zip(&dist.stddev) {
        let diff = t - m;
        mu.push(diff / (s * s));
        sigma.push((diff * diff - s * s) / (s * s * s));
    }
    Ok(PepgGradient { mu, sigma })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PepgSample {
    pub theta: Vec<f64>,
    pub fitness: f64,
}

/// `(1/N) sum_n grad ln p(theta_n) (r_n - b)`; `baseline = None` means `b = 0`.
pub fn pepg_gradient_estimate(samples: &[PepgSample], dist: &PepgDistribution, baseline: Option<f64>) -> Result<PepgGradient> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {}", samples.len())));
    }
    let b = baseline.unwrap_or(0.0);
    let n = samples.len() as f64;
    let mut out = PepgGradient {
        mu: vec![0.0; dist.dim()],
        sigma: vec![0.0; dist.dim()],
    };
    for s in samples {
        let g = pepg_log_grad(&s.theta, dist)?;
        let weight = (s.fitness - b) / n;
        for i in 0..dist.dim() {
            out.mu[i] += g.mu[i] * weight;
            out.sigma[i] += g.sigma[i] * weight;
        }
    }
    Ok(out)
}

/// The attacker's per-frame reward: the negated magnitude of the victim's.
pub fn adversarial_reward(env_reward: f64) -> f64 {
    -env_reward.abs()
}

/// State -> tanh hidden layer -> one attack logit.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackerPolicy {
    params: MlpParams,
}

impl AttackerPolicy {
    pub fn spec(state_dim: usize, hidden: usize) -> MlpSpec {
        MlpSpec::tanh(state_dim, &[hidden], 1)
    }

    pub fn zeros(state_dim: usize, hidden: usize) -> Self {
        Self {
            params: MlpParams::zeros(&Self::spec(state_dim, hidden)),
        }
    }

    pub fn from_params(params: MlpParams) -> Result<Self> {
        if params.spec().output_dim() != 1 {
            return Err(Error::Shape {
                expected: 1,
                got: params.spec().output_dim(),
            });
        }
        Ok(Self { params })
    }

    pub fn from_flat(state_dim: usize, hidden: usize, flat: &[f64]) -> Result<Self> {
        Self::from_params(MlpParams::from_flat(&Self::spec(state_dim, hidden), flat)?)
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn logit(&self, state: &[f64]) -> Result<f64> {
        Ok(self.params.forward(state)?[0])
    }

    pub fn attack_probability(&self, state: &[f64]) -> Result<f64> {
        Ok(1.0 / (1.0 + (-self.logit(state)?).exp()))
    }
}

/// Attack iff the policy output exceeds 0.5 and the budget has room.
pub fn pepg_asa_decide(policy: &AttackerPolicy, state: &[f64], budget: &mut AttackBudget) -> Result<AttackDecision> {
    let p = policy.attack_probability(state)?;
    Ok(AttackDecision {
        attack: p > 0.5 && budget.try_spend(),
        score: Some(p),
    })
}

/// Maps a true state to the perturbed state the victim should see.
pub type Perturbation<'a> = dyn Fn(&[f64], &mut RngStream) -> Result<StateVec> + Sync + 'a;

/// Builds a fresh environment for one rollout.
pub type EnvFactory<'a> = dyn Fn() -> Box<dyn Environment> + Sync + 'a;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rollout {
    pub fitness: f64,
    pub attacks: usize,
    pub frames: usize,
}

/// One budgeted episode of `policy` timing attacks on `victim`.
pub fn attacker_rollout(
    env: &mut dyn Environment,
    victim: &dyn Actor,
    perturb: &Perturbation,
    policy: &AttackerPolicy,
    budget_cap: usize,
    episode_seed: u64,
    noise_rng: &mut RngStream,
) -> Result<Rollout> {
    let mut state = env.reset(episode_seed);
    let mut budget = AttackBudget::new(budget_cap);
    let mut out = Rollout {
        fitness: 0.0,
        attacks: 0,
        frames: 0,
    };
    loop {
        let decision = pepg_asa_decide(policy, &state, &mut budget)?;
        let action = if decision.attack {
            out.attacks += 1;
            victim.act(&perturb(&state, noise_rng)?)?
        } else {
            victim.act(&state)?
        };
        let step = env.step(&action)?;
        out.fitness += adversarial_reward(step.reward);
        out.frames += 1;
        if step.done {
            return Ok(out);
        }
        state = step.state;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub mean_fitness: f64,
    pub best_fitness: f64,
    pub max_attacks: usize,
    pub mean_sigma: f64,
}

#[derive(Debug, Clone)]
pub struct PepgOutcome {
    pub policy: AttackerPolicy,
    pub distribution: PepgDistribution,
    pub history: Vec<GenerationStats>,
}

/// Trains an attacker against an opaque victim. All members of a generation
/// replay the same episode seed, so fitness differences come from the
/// policies rather than the episode draw. Returns the distribution mean as
/// the final policy.
pub fn pepg_asa_train(
    make_env: &EnvFactory,
    victim: &dyn Actor,
    perturb: &Perturbation,
    cfg: &PepgConfig,
    seed: u64,
) -> Result<PepgOutcome> {
    if cfg.population < 2 {
        return Err(Error::InvalidParameter(format!("population must be at least 2, got {}", cfg.population)));
    }
    let state_dim = make_env().contract().observation_dim;
    let spec = AttackerPolicy::spec(state_dim, cfg.hidden);
    let mut dist = PepgDistribution::new(vec![0.0; spec.param_count()], cfg)?;
    let mut history = Vec::with_capacity(cfg.generations);

    for generation in 0..cfg.generations {
        let mut sampler = RngStream::new(derive_seed(seed, SEED_SAMPLE + generation as u64));
        let thetas: Vec<Vec<f64>> = (0..cfg.population).map(|_| dist.sample(&mut sampler)).collect();
        let episode_seed = derive_seed(seed, SEED_EPISODE + generation as u64);
        let noise_seed = derive_seed(seed, SEED_NOISE + generation as u64);

        let rollouts: Vec<Rollout> = thetas
            .par_iter()
            .map(|theta| {
                let policy = AttackerPolicy::from_params(MlpParams::from_flat(&spec, theta)?)?;
                let mut env = make_env();
                let mut noise_rng = RngStream::new(noise_seed);
                attacker_rollout(env.as_mut(), victim, perturb, &policy, cfg.budget, episode_seed, &mut noise_rng)
            })
            .collect::<Result<_>>()?;

        if let Some(bad) = rollouts.iter().find(|r| !r.fitness.is_finite()) {
            return Err(Error::Divergence(format!("non-finite fitness {} in generation {generation}", bad.fitness)));
        }
        let n = rollouts.len() as f64;
        let mean = rollouts.iter().map(|r| r.fitness).sum::<f64>() / n;
        let scale = (rollouts.iter().map(|r| (r.fitness - mean).powi(2)).sum::<f64>() / n).sqrt();
        history.push(GenerationStats {
            generation,
            mean_fitness: mean,
            best_fitness: rollouts.iter().map(|r| r.fitness).fold(f64::NEG_INFINITY, f64::max),
            max_attacks: rollouts.iter().map(|r| r.attacks).max().unwrap_or(0),
            mean_sigma: dist.stddev.iter().sum::<f64>() / dist.dim() as f64,
        });
        if scale <= 1e-12 {
            continue;
        }
        let samples: Vec<PepgSample> = thetas
            .into_iter()
            .zip(&rollouts)
            .map(|(theta, r)| PepgSample { theta, fitness: r.fitness })
            .collect();
        let grad = pepg_gradient_estimate(&samples, &dist, cfg.baseline.then_some(mean))?;
        dist.apply(&grad, scale)?;
    }

    let policy = AttackerPolicy::from_params(MlpParams::from_flat(&spec, &dist.mean)?)?;
    Ok(PepgOutcome {
        policy,
        distribution: dist,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::PlantedParityEnv;
    use crate::noise::zero_out;
    use crate::trace::ActionValue;

    fn dist(mean: Vec<f64>, sigma: f64) -> PepgDistribution {
        let cfg = PepgConfig {
            initial_sigma: sigma,
            ..PepgConfig::default()
        };
        PepgDistribution::new(mean, &cfg).unwrap()
    }

    #[test]
    fn log_grad_special_points() {
        let d = dist(vec![0.5, -1.0], 2.0);
        let g = pepg_log_grad(&[0.5, -1.0], &d).unwrap();
        assert_eq!(g.mu, vec![0.0, 0.0]);
        assert_eq!(g.sigma, vec![-0.5, -0.5]);
        let g = pepg_log_grad(&[2.5, -3.0], &d).unwrap();
        assert_eq!(g.sigma, vec![0.0, 0.0]);
    }

    #[test]
    fn log_grad_matches_finite_differences() {
        let mut rng = RngStream::new(5);
        for _ in 0..20 {
            let mean: Vec<f64> = (0..4).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
            let mut d = dist(mean, 1.0);
            d.stddev = (0..4).map(|_| rng.uniform_range(0.3, 2.0)).collect();
            let theta = d.sample(&mut rng);
            let g = pepg_log_grad(&theta, &d).unwrap();
            let h = 1e-6;
            for i in 0..4 {
                let mut plus = d.clone();
                let mut minus = d.clone();
                plus.mean[i] += h;
                minus.mean[i] -= h;
                let fd = (plus.log_density(&theta) - minus.log_density(&theta)) / (2.0 * h);
                assert!((fd - g.mu[i]).abs() <= 1e-6 * g.mu[i].abs().max(1.0));
                let mut plus = d.clone();
                let mut minus = d.clone();
                plus.stddev[i] += h;
                minus.stddev[i] -= h;
                let fd = (plus.log_density(&theta) - minus.log_density(&theta)) / (2.0 * h);
                assert!((fd - g.sigma[i]).abs() <= 1e-6 * g.sigma[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn equal_fitness_with_baseline_is_zero() {
        let d = dist(vec![0.0; 3], 1.0);
        let mut rng = RngStream::new(1);
        let samples: Vec<PepgSample> = (0..8)
            .map(|_| PepgSample {
                theta: d.sample(&mut rng),
                fitness: 4.0,
            })
            .collect();
        let g = pepg_gradient_estimate(&samples, &d, Some(4.0)).unwrap();
        assert!(g.mu.iter().chain(&g.sigma).all(|v| *v == 0.0));
        assert!(pepg_gradient_estimate(&samples[..1], &d, None).is_err());
    }

    #[test]
    fn estimate_is_linear_in_fitness() {
        let d = dist(vec![0.0; 2], 1.0);
        let mut rng = RngStream::new(2);
        let samples: Vec<PepgSample> = (0..16)
            .map(|_| PepgSample {
                theta: d.sample(&mut rng),
                fitness: rng.uniform(),
            })
            .collect();
        let doubled: Vec<PepgSample> = samples
            .iter()
            .map(|s| PepgSample {
                theta: s.theta.clone(),
                fitness: 2.0 * s.fitness,
            })
            .collect();
        let a = pepg_gradient_estimate(&samples, &d, None).unwrap();
        let b = pepg_gradient_estimate(&doubled, &d, None).unwrap();
        for (x, y) in a.mu.iter().zip(&b.mu) {
            assert!((2.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_toy_mean_gradient() {
        let d = dist(vec![0.0], 1.0);
        let mut rng = RngStream::new(77);
        let samples: Vec<PepgSample> = (0..100_000)
            .map(|_| {
                let theta = d.sample(&mut rng);
                let fitness = -(theta[0] - 3.0).powi(2);
                PepgSample { theta, fitness }
            })
            .collect();
        let g = pepg_gradient_estimate(&samples, &d, None).unwrap();
        assert!((g.mu[0] - 6.0).abs() < 0.6, "estimate {}", g.mu[0]);
    }

    #[test]
    fn sigma_is_clamped() {
        let mut d = dist(vec![0.0], 1e-2);
        let grad = PepgGradient {
            mu: vec![0.0],
            sigma: vec![-1e6],
        };
        d.apply(&grad, 1.0).unwrap();
        assert_eq!(d.stddev[0], SIGMA_MIN);
    }

    #[test]
    fn adversarial_reward_examples() {
        assert_eq!(adversarial_reward(-2.0), -2.0);
        assert_eq!(adversarial_reward(3.0), -3.0);
    }

    #[test]
    fn decide_boundary_and_budget() {
        let policy = AttackerPolicy::zeros(3, 4);
        let mut b = AttackBudget::new(5);
        let d = pepg_asa_decide(&policy, &[1.0, 0.0, 1.0], &mut b).unwrap();
        assert!(!d.attack);
        assert_eq!(d.score, Some(0.5));

        let mut flat = vec![0.0; AttackerPolicy::spec(3, 4).param_count()];
        *flat.last_mut().unwrap() = 5.0;
        let eager = AttackerPolicy::from_flat(3, 4, &flat).unwrap();
        assert!(pepg_asa_decide(&eager, &[0.0; 3], &mut b).unwrap().attack);
        let mut spent = AttackBudget::new(0);
        assert!(!pepg_asa_decide(&eager, &[0.0; 3], &mut spent).unwrap().attack);
    }

    struct Rule;
    impl Actor for Rule {
        fn act(&self, state: &[f64]) -> Result<ActionValue> {
            Ok(PlantedParityEnv::healthy_rule(state))
        }
    }

    #[test]
    fn learns_the_planted_parity_signal() {
        let cfg = PepgConfig {
            generations: 60,
            ..PepgConfig::default()
        };
        let factory = || Box::new(PlantedParityEnv::new()) as Box<dyn Environment>;
        let perturb = |s: &[f64], _: &mut RngStream| Ok(zero_out(s));
        let out = pepg_asa_train(&factory, &Rule, &perturb, &cfg, 11).unwrap();
        assert!(out.history.iter().all(|g| g.max_attacks <= cfg.budget));
        let odd = out.policy.attack_probability(&[1.0, 0.0, 1.0]).unwrap();
        let even = out.policy.attack_probability(&[0.0, 1.0, 1.0]).unwrap();
        assert!(odd > 0.5 && even < 0.5, "odd {odd} even {even}");
    }
}
