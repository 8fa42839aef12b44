//! Frame-selection rules: random, Lin-style potential gap, and the
//! weighted-majority timer.

use std::collections::BTreeSet;

use super::hedge::{normalize_losses, ExpertWeights, RegretLedger};
use super::potential::{policy_potential_c, potential_energy_c};
use crate::error::{Error, Result};
use crate::numerics::softmax;
use crate::rng::{sample_without_replacement, RngStream};
use crate::victims::WhiteBox;

pub const DEFAULT_BETA: f64 = 0.3;
pub const DEFAULT_BUDGET: usize = 40;

/// At most `cap` attacks per episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackBudget {
    cap: usize,
    used: usize,
}

impl AttackBudget {
    pub fn new(cap: usize) -> Self {
        Self { cap, used: 0 }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn remaining(&self) -> usize {
        self.cap - self.used
    }

    pub fn is_free(&self) -> bool {
        self.used < self.cap
    }

    /// Consumes one attack if any remain.
    pub fn try_spend(&mut self) -> bool {
        if self.is_free() {
            self.used += 1;
            true
        } else {
            false
        }
    }

    pub fn reset(&mut self) {
        self.used = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackDecision {
    pub attack: bool,
    /// The score the rule thresholded, when it has one.
    pub score: Option<f64>,
}

impl AttackDecision {
    pub const PASS: AttackDecision = AttackDecision { attack: false, score: None };
}

/// Attack iff `score > beta` and the budget has room; spends on attack.
pub fn threshold_decide(score: f64, beta: f64, budget: &mut AttackBudget) -> AttackDecision {
    AttackDecision {
        attack: score > beta && budget.try_spend(),
        score: Some(score),
    }
}

/// `max softmax(prefs) - min softmax(prefs)`; a policy view is already a
/// softmax of the logits and is used as is.
pub fn lin_score(view: &WhiteBox) -> f64 {
    let probs = match view {
        WhiteBox::QValues(q) => softmax(q),
        WhiteBox::Policy(pi) => pi.clone(),
    };
    let hi = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = probs.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

pub fn lin_decide(view: &WhiteBox, beta: f64, budget: &mut AttackBudget) -> AttackDecision {
    threshold_decide(lin_score(view), beta, budget)
}

/// Random baseline: `min(H, horizon)` distinct frames drawn at episode start.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RandomTimer {
    frames: BTreeSet<usize>,
}

impl RandomTimer {
    pub fn draw(rng: &mut RngStream, cap: usize, horizon: usize) -> Self {
        let k = cap.min(horizon);
        Self {
            frames: sample_without_replacement(rng, horizon, k).into_iter().collect(),
        }
    }

    pub fn frames(&self) -> &BTreeSet<usize> {
        &self.frames
    }

    pub fn random_decide(&self, frame: usize, budget: &mut AttackBudget) -> AttackDecision {
        AttackDecision {
            attack: self.frames.contains(&frame) && budget.try_spend(),
            score: None,
        }
    }
}

/// Weighted-majority timer. Each frame it scores the potential gap under the
/// current expert weights, decides, then runs one Hedge step with the
/// min-max-normalized Q-values (or policy) as losses.
#[derive(Debug, Clone)]
pub struct WmaTimer {
    pub beta: f64,
    weights: ExpertWeights,
    ledger: RegretLedger,
}

impl WmaTimer {
    /// Fresh all-ones weights with `eta` tuned to `horizon`.
    pub fn new(d: usize, horizon: usize, beta: f64) -> Result<Self> {
        if d < 2 || horizon == 0 {
            return Err(Error::InvalidParameter(format!(
                "weighted-majority timer needs d >= 2 and a positive horizon, got d = {d}, T = {horizon}"
            )));
        }
        Ok(Self {
            beta,
            weights: ExpertWeights::uniform(d),
            ledger: RegretLedger::new(d, horizon),
        })
    }

    pub fn weights(&self) -> &ExpertWeights {
        &self.weights
    }

    pub fn eta(&self) -> f64 {
        self.ledger.eta
    }

    pub fn ledger(&self) -> &RegretLedger {
        &self.ledger
    }

    /// Score only, no update.
    pub fn score(&self, view: &WhiteBox) -> Result<f64> {
        let p = match view {
            WhiteBox::QValues(q) => potential_energy_c(&self.weights, q)?,
            WhiteBox::Policy(pi) => policy_potential_c(&self.weights, pi)?,
        };
        Ok(p.c)
    }

    pub fn wma_decide(&mut self, view: &WhiteBox, budget: &mut AttackBudget) -> Result<AttackDecision> {
        let decision = threshold_decide(self.score(view)?, self.beta, budget);
        let values = match view {
            WhiteBox::QValues(v) | WhiteBox::Policy(v) => v,
        };
        let losses = normalize_losses(values);
        self.ledger.record(&self.weights, &losses)?;
        self.weights.hedge_update(&losses, self.ledger.eta)?;
        Ok(decision)
    }
}
