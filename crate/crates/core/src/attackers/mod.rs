//! Attack timers: when to perturb the victim's observation.

mod hedge;
mod pepg;
mod potential;
mod timers;

pub use hedge::{
    hedge_eta, normalize_losses, regret_bound, uniform_loss_trial, ExpertWeights, RegretLedger, Round,
};
pub use pepg::{
    adversarial_reward, attacker_rollout, pepg_asa_decide, pepg_asa_train, pepg_gradient_estimate, pepg_log_grad,
    AttackerPolicy, EnvFactory, GenerationStats, PepgConfig, PepgDistribution, PepgGradient, PepgOutcome, PepgSample,
    Perturbation, Rollout, SIGMA_MIN,
};
pub use potential::{policy_potential_c, potential_energy_c, Potential};
pub use timers::{
    lin_decide, lin_score, threshold_decide, AttackBudget, AttackDecision, RandomTimer, WmaTimer, DEFAULT_BETA,
    DEFAULT_BUDGET,
};
