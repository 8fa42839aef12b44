//! Advantage actor-critic with a shared trunk: the network emits the policy
//! head (logits, or pre-tanh Gaussian means) followed by one value output.
//! Workers compute gradients against a parameter snapshot; updates are
//! applied one at a time and bump a version counter.

use serde::{Deserialize, Serialize};

use super::grid::ActionTable;
use crate::error::{Error, Result};
use crate::numerics::{argmax, log_softmax, softmax, AdamState, MlpParams, MlpSpec};
use crate::rng::RngStream;
use crate::trace::{ActionValue, StateVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A3cConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub n_workers: usize,
    pub n_step: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub grad_clip: f64,
}

impl Default for A3cConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            lr: 1e-3,
            gamma: 0.99,
            n_workers: 4,
            n_step: 5,
            entropy_coef: 0.01,
            value_coef: 0.5,
            grad_clip: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyHead {
    /// Softmax over the rows of an action table.
    Discrete(ActionTable),
    /// Independent Gaussians with tanh-squashed means and a fixed stddev.
    Gaussian { action_dim: usize, stddev: f64 },
}

impl PolicyHead {
    pub fn width(&self) -> usize {
        match self {
            PolicyHead::Discrete(t) => t.len(),
            PolicyHead::Gaussian { action_dim, .. } => *action_dim,
        }
    }
}

pub const GAUSSIAN_STDDEV: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyOutput {
    Probabilities(Vec<f64>),
    Gaussian { means: Vec<f64>, stddev: f64 },
}

/// A sampled action as the learner needs it: the discrete index, or the
/// raw continuous draw.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSample {
    Index(usize),
    Continuous(Vec<f64>),
}

/// Up to `n_step` consecutive transitions from one worker.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub states: Vec<StateVec>,
    pub actions: Vec<ActionSample>,
    pub rewards: Vec<f64>,
    /// State after the last transition, or `None` if the episode ended there.
    pub bootstrap: Option<StateVec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FragmentLoss {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct A3cAgent {
    pub net: MlpParams,
    pub head: PolicyHead,
    pub cfg: A3cConfig,
    adam: AdamState,
    version: u64,
}

impl A3cAgent {
    pub fn new(obs_dim: usize, head: PolicyHead, cfg: A3cConfig, rng: &mut RngStream) -> Self {
        let spec = MlpSpec::tanh(obs_dim, &cfg.hidden, head.width() + 1);
        let net = MlpParams::init(&spec, rng);
        Self::from_params(net, head, cfg)
    }

    pub fn from_params(net: MlpParams, head: PolicyHead, cfg: A3cConfig) -> Self {
        let adam = AdamState::new(&net, cfg.lr);
        Self {
            net,
            head,
            cfg,
            adam,
            version: 0,
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn action_count(&self) -> usize {
        self.head.width()
    }

    /// Policy logits (discrete head) or pre-squash means (Gaussian head).
    pub fn policy_logits(&self, state: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.net.forward(state)?;
        out.truncate(self.head.width());
        Ok(out)
    }

    pub fn value(&self, state: &[f64]) -> Result<f64> {
        Ok(*self.net.forward(state)?.last().unwrap())
    }

    pub fn policy(&self, state: &[f64]) -> Result<PolicyOutput> {
        self.policy_with(&self.net, state)
    }

    /// Policy under `params` (a snapshot) instead of the live parameters.
    pub fn policy_with(&self, params: &MlpParams, state: &[f64]) -> Result<PolicyOutput> {
        let mut logits = params.forward(state)?;
        logits.truncate(self.head.width());
        Ok(match &self.head {
            PolicyHead::Discrete(_) => PolicyOutput::Probabilities(softmax(&logits)),
            PolicyHead::Gaussian { stddev, .. } => PolicyOutput::Gaussian {
                means: logits.iter().map(|z| z.tanh()).collect(),
                stddev: *stddev,
            },
        })
    }

    pub fn sample(&self, state: &[f64], rng: &mut RngStream) -> Result<ActionSample> {
        self.sample_with(&self.net, state, rng)
    }

    pub fn sample_with(&self, params: &MlpParams, state: &[f64], rng: &mut RngStream) -> Result<ActionSample> {
        Ok(match self.policy_with(params, state)? {
            PolicyOutput::Probabilities(p) => {
                let u = rng.uniform();
                let mut acc = 0.0;
                let mut pick = p.len() - 1;
                for (i, pi) in p.iter().enumerate() {
                    acc += pi;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                ActionSample::Index(pick)
            }
            PolicyOutput::Gaussian { means, stddev } => ActionSample::Continuous(
                means.iter().map(|&m| m + stddev * rng.standard_normal()).collect(),
            ),
        })
    }

    /// Most likely action (argmax probability, or the Gaussian means).
    pub fn greedy(&self, state: &[f64]) -> Result<ActionSample> {
        Ok(match self.policy(state)? {
            PolicyOutput::Probabilities(p) => ActionSample::Index(argmax(&p)),
            PolicyOutput::Gaussian { means, .. } => ActionSample::Continuous(means),
        })
    }

    pub fn to_env_action(&self, sample: &ActionSample) -> ActionValue {
        match (sample, &self.head) {
            (ActionSample::Index(i), PolicyHead::Discrete(table)) => table.action(*i),
            (ActionSample::Continuous(v), _) => ActionValue::continuous(v.clone()),
            (ActionSample::Index(i), PolicyHead::Gaussian { .. }) => ActionValue::Discrete(*i),
        }
    }

    /// Gradients of the actor-critic loss on one fragment, evaluated at
    /// `params` (a worker's snapshot):
    /// `-log pi(a) * A + value_coef * (R - V)^2 - entropy_coef * H(pi)`,
    /// averaged over the fragment, with `A = R - V` and `R` the n-step return.
    pub fn fragment_gradients(&self, params: &MlpParams, fragment: &Fragment) -> Result<(MlpParams, FragmentLoss)> {
        let n = fragment.states.len();
        if n == 0 || fragment.actions.len() != n || fragment.rewards.len() != n {
            return Err(Error::Precondition("fragment needs matching, non-empty states/actions/rewards".into()));
        }
        if n > self.cfg.n_step {
            return Err(Error::Precondition(format!("fragment length {n} exceeds n-step horizon {}", self.cfg.n_step)));
        }
        let width = self.head.width();
        let mut ret = match &fragment.bootstrap {
            Some(s) => *params.forward(s)?.last().unwrap(),
            None => 0.0,
        };
        let mut returns = vec![0.0; n];
        for t in (0..n).rev() {
            ret = fragment.rewards[t] + self.cfg.gamma * ret;
            returns[t] = ret;
        }

        let scale = 1.0 / n as f64;
        let mut grads = params.zeros_like();
        let mut loss = FragmentLoss {
            policy: 0.0,
            value: 0.0,
            entropy: 0.0,
        };
        for t in 0..n {
            let cache = params.forward_cached(&fragment.states[t])?;
            let out = cache.output();
            let value = out[width];
            let advantage = returns[t] - value;
            let mut out_grad = vec![0.0; width + 1];
            match (&self.head, &fragment.actions[t]) {
                (PolicyHead::Discrete(_), ActionSample::Index(a)) => {
                    let logits = &out[..width];
                    let p = softmax(logits);
                    let logp = log_softmax(logits);
                    let h: f64 = -p.iter().zip(&logp).map(|(pi, lp)| pi * lp).sum::<f64>();
                    loss.policy -= logp[*a] * advantage * scale;
                    loss.entropy += h * scale;
                    for j in 0..width {
                        let onehot = if j == *a { 1.0 } else { 0.0 };
                        let pg = advantage * (p[j] - onehot);
                        let ent = self.cfg.entropy_coef * p[j] * (logp[j] + h);
                        out_grad[j] = (pg + ent) * scale;
                    }
                }
                (PolicyHead::Gaussian { stddev, .. }, ActionSample::Continuous(a)) => {
                    if a.len() != width {
                        return Err(Error::Shape { expected: width, got: a.len() });
                    }
                    let var = stddev * stddev;
                    for j in 0..width {
                        let mean = out[j].tanh();
                        let diff = a[j] - mean;
                        loss.policy += advantage * diff * diff / (2.0 * var) * scale;
                        out_grad[j] = -advantage * diff / var * (1.0 - mean * mean) * scale;
                    }
                    // Fixed stddev: entropy carries no gradient.
                    loss.entropy += width as f64 * (0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * var).ln()) * scale;
                }
                (head, sample) => {
                    return Err(Error::InvalidAction(format!("{sample:?} does not match policy head {head:?}")));
                }
            }
            loss.value += self.cfg.value_coef * advantage * advantage * scale;
            out_grad[width] = -2.0 * self.cfg.value_coef * advantage * scale;
            params.backward_accumulate(&cache, &out_grad, &mut grads)?;
        }
        Ok((grads, loss))
    }

    /// Applies one worker's gradient under exclusive access.
    pub fn apply_gradients(&mut self, mut grads: MlpParams) {
        if self.cfg.grad_clip > 0.0 {
            let norm = grads.l2_norm();
            if norm > self.cfg.grad_clip {
                grads.scale(self.cfg.grad_clip / norm);
            }
        }
        self.adam.step(&mut self.net, &grads);
        self.version += 1;
    }

    /// Computes gradients on the current parameters and applies them.
    pub fn update(&mut self, fragment: &Fragment) -> Result<FragmentLoss> {
        let (grads, loss) = self.fragment_gradients(&self.net, fragment)?;
        self.apply_gradients(grads);
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::MlpSpec;

    fn discrete_agent(d: usize, cfg: A3cConfig) -> A3cAgent {
        let spec = MlpSpec::tanh(1, &[8], d + 1);
        A3cAgent::from_params(MlpParams::zeros(&spec), PolicyHead::Discrete(ActionTable::Discrete(d)), cfg)
    }

    #[test]
    fn zero_net_has_uniform_policy_with_max_entropy() {
        let agent = discrete_agent(4, A3cConfig::default());
        let PolicyOutput::Probabilities(p) = agent.policy(&[0.3]).unwrap() else { panic!() };
        assert_eq!(p, vec![0.25; 4]);
        let fragment = Fragment {
            states: vec![StateVec::new(vec![0.3])],
            actions: vec![ActionSample::Index(0)],
            rewards: vec![0.0],
            bootstrap: None,
        };
        let (_, loss) = agent.fragment_gradients(&agent.net, &fragment).unwrap();
        assert!((loss.entropy - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = RngStream::new(1);
        let agent = A3cAgent::new(3, PolicyHead::Discrete(ActionTable::Discrete(5)), A3cConfig::default(), &mut rng);
        let PolicyOutput::Probabilities(p) = agent.policy(&[0.1, -2.0, 4.0]).unwrap() else { panic!() };
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn gaussian_means_are_squashed() {
        let mut rng = RngStream::new(2);
        let mut agent = A3cAgent::new(
            2,
            PolicyHead::Gaussian { action_dim: 3, stddev: GAUSSIAN_STDDEV },
            A3cConfig::default(),
            &mut rng,
        );
        agent.net.scale(50.0);
        let PolicyOutput::Gaussian { means, stddev } = agent.policy(&[3.0, -3.0]).unwrap() else { panic!() };
        assert_eq!(stddev, 0.1);
        assert!(means.iter().all(|m| (-1.0..=1.0).contains(m)));
        let sample = agent.sample(&[3.0, -3.0], &mut rng).unwrap();
        let ActionValue::Continuous(a) = agent.to_env_action(&sample) else { panic!() };
        assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn zero_advantage_leaves_only_entropy_and_value_terms() {
        // value head biased to exactly the terminal reward => advantage 0
        let cfg = A3cConfig {
            entropy_coef: 0.0,
            ..A3cConfig::default()
        };
        let mut agent = discrete_agent(3, cfg);
        agent.net.layers_mut()[1].bias[3] = 2.0;
        let fragment = Fragment {
            states: vec![StateVec::new(vec![1.0])],
            actions: vec![ActionSample::Index(2)],
            rewards: vec![2.0],
            bootstrap: None,
        };
        let (grads, loss) = agent.fragment_gradients(&agent.net, &fragment).unwrap();
        assert_eq!(loss.policy, 0.0);
        assert!(grads.values().all(|&g| g == 0.0));
    }

    #[test]
    fn value_head_regresses_to_constant_reward() {
        let cfg = A3cConfig {
            gamma: 0.0,
            lr: 1e-2,
            ..A3cConfig::default()
        };
        let mut rng = RngStream::new(4);
        let mut agent = A3cAgent::new(1, PolicyHead::Discrete(ActionTable::Discrete(2)), cfg, &mut rng);
        let state = StateVec::new(vec![1.0]);
        for _ in 0..2000 {
            let a = agent.sample(&state, &mut rng).unwrap();
            let fragment = Fragment {
                states: vec![state.clone()],
                actions: vec![a],
                rewards: vec![1.0],
                bootstrap: Some(state.clone()),
            };
            agent.update(&fragment).unwrap();
        }
        assert!((agent.value(&state).unwrap() - 1.0).abs() <= 0.05);
        assert_eq!(agent.version(), 2000);
    }

    #[test]
    fn fragment_longer_than_horizon_rejected() {
        let agent = discrete_agent(2, A3cConfig::default());
        let s = StateVec::new(vec![0.0]);
        let fragment = Fragment {
            states: vec![s.clone(); 6],
            actions: vec![ActionSample::Index(0); 6],
            rewards: vec![0.0; 6],
            bootstrap: None,
        };
        assert!(agent.fragment_gradients(&agent.net, &fragment).is_err());
    }

    #[test]
    fn discrete_policy_gradient_matches_finite_differences() {
        let mut rng = RngStream::new(8);
        let cfg = A3cConfig::default();
        let agent = A3cAgent::new(2, PolicyHead::Discrete(ActionTable::Discrete(3)), cfg.clone(), &mut rng);
        let fragment = Fragment {
            states: vec![StateVec::new(vec![0.4, -0.2]), StateVec::new(vec![-0.1, 0.7])],
            actions: vec![ActionSample::Index(2), ActionSample::Index(0)],
            rewards: vec![1.0, -0.5],
            bootstrap: None,
        };
        let (grads, _) = agent.fragment_gradients(&agent.net, &fragment).unwrap();
        // The advantage is a constant in the policy term (no gradient flows
        // through the critic there).
        let returns = [1.0 + cfg.gamma * -0.5, -0.5];
        let flat = agent.net.to_flat();
        let spec = agent.net.spec().clone();
        let adv: Vec<f64> = fragment
            .states
            .iter()
            .zip(returns)
            .map(|(s, r)| r - *agent.net.forward(s).unwrap().last().unwrap())
            .collect();
        let loss_at = |theta: &[f64]| {
            let net = MlpParams::from_flat(&spec, theta).unwrap();
            let mut total = 0.0;
            for (t, s) in fragment.states.iter().enumerate() {
                let out = net.forward(s).unwrap();
                let lp = log_softmax(&out[..3]);
                let p = softmax(&out[..3]);
                let h: f64 = -p.iter().zip(&lp).map(|(a, b)| a * b).sum::<f64>();
                let ActionSample::Index(a) = fragment.actions[t] else { unreachable!() };
                let v = out[3];
                total += -lp[a] * adv[t] + cfg.value_coef * (returns[t] - v).powi(2) - cfg.entropy_coef * h;
            }
            total / 2.0
        };
        let analytic = grads.to_flat();
        let h = 1e-6;
        for i in 0..flat.len() {
            let mut plus = flat.clone();
            plus[i] += h;
            let mut minus = flat.clone();
            minus[i] -= h;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let denom = numeric.abs().max(analytic[i].abs()).max(1e-8);
            assert!(
                (numeric - analytic[i]).abs() / denom < 1e-4 || (numeric - analytic[i]).abs() < 1e-9,
                "param {i}: numeric {numeric} analytic {}",
                analytic[i]
            );
        }
    }
}
