//! Multiplicative-weights (Hedge) core and its regret bookkeeping.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Unnormalized expert weights; `normalized()` is the distribution `w / Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertWeights {
    raw: Vec<f64>,
}

impl ExpertWeights {
    /// All-ones start.
    pub fn uniform(d: usize) -> Self {
        Self { raw: vec![1.0; d] }
    }

    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() || raw.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("expert weights must be positive, got {raw:?}")));
        }
        Ok(Self { raw })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn normalizer(&self) -> f64 {
        self.raw.iter().sum()
    }

    pub fn normalized(&self) -> Vec<f64> {
        let z = self.normalizer();
        self.raw.iter().map(|w| w / z).collect()
    }

    /// `w_i <- w_i * exp(-eta * loss_i)`, then renormalize so the stored
    /// weights sum to one (the normalized view is unchanged by this).
    pub fn hedge_update(&mut self, losses: &[f64], eta: f64) -> Result<()> {
        if losses.len() != self.raw.len() {
            return Err(Error::Shape {
                expected: self.raw.len(),
                got: losses.len(),
            });
        }
        if !(eta > 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate must be positive, got {eta}")));
        }
        if let Some(bad) = losses.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Precondition(format!("hedge loss {bad} outside [0, 1]")));
        }
        for (w, l) in self.raw.iter_mut().zip(losses) {
            *w *= (-eta * l).exp();
        }
        let z = self.normalizer();
        self.raw.iter_mut().for_each(|w| *w /= z);
        Ok(())
    }
}

/// Per-round min-max scaling to `[0, 1]`; a constant vector maps to zeros.
pub fn normalize_losses(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect()
}

/// `eta = sqrt(2 ln d / T)`.
pub fn hedge_eta(d: usize, horizon: usize) -> f64 {
    (2.0 * (d as f64).ln() / horizon as f64).sqrt()
}

/// `sqrt(2 ln d * T)`.
pub fn regret_bound(d: usize, horizon: usize) -> f64 {
    (2.0 * (d as f64).ln() * horizon as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub losses: Vec<f64>,
    pub weights: Vec<f64>,
    /// Sum of the unnormalized weights before the update.
    pub normalizer: f64,
}

/// Losses and the weights Hedge played against them, round by round.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    pub d: usize,
    pub horizon: usize,
    pub eta: f64,
    pub rounds: Vec<Round>,
}

impl RegretLedger {
    pub fn new(d: usize, horizon: usize) -> Self {
        Self {
            d,
            horizon,
            eta: hedge_eta(d, horizon),
            rounds: Vec::new(),
        }
    }

    pub fn record(&mut self, weights: &ExpertWeights, losses: &[f64]) -> Result<()> {
        if losses.len() != self.d {
            return Err(Error::Shape {
                expected: self.d,
                got: losses.len(),
            });
        }
        if let Some(bad) = losses.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Precondition(format!("recorded loss {bad} outside [0, 1]")));
        }
        self.rounds.push(Round {
            losses: losses.to_vec(),
            weights: weights.normalized(),
            normalizer: weights.normalizer(),
        });
        Ok(())
    }

    pub fn bound(&self) -> f64 {
        regret_bound(self.d, self.rounds.len())
    }

    /// `sum_t <w_t, l_t> - min_i sum_t l_t[i]`.
    pub fn empirical_regret(&self) -> Result<f64> {
        let t = self.rounds.len();
        if (t as f64) <= 2.0 * (self.d as f64).ln() {
            return Err(Error::Precondition(format!(
                "regret needs T > 2 ln d; have T = {t}, d = {}",
                self.d
            )));
        }
        let mut played = 0.0;
        let mut per_expert = vec![0.0; self.d];
        for r in &self.rounds {
            played += r.weights.iter().zip(&r.losses).map(|(w, l)| w * l).sum::<f64>();
            for (acc, l) in per_expert.iter_mut().zip(&r.losses) {
                *acc += l;
            }
        }
        let best = per_expert.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(played - best)
    }

    /// The regret expression read literally with `exp(-loss) / Z_t` terms and
    /// `Z_t` the weight normalizer. Diagnostic only; no bound is claimed.
    pub fn literal_regret_diagnostic(&self) -> f64 {
        let mut played = 0.0;
        let mut per_expert = vec![0.0; self.d];
        for r in &self.rounds {
            let z = r.normalizer;
            played += r.weights.iter().zip(&r.losses).map(|(w, l)| w * (-l).exp()).sum::<f64>() / z;
            for (acc, l) in per_expert.iter_mut().zip(&r.losses) {
                *acc += (-l).exp() / z;
            }
        }
        played - per_expert.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Runs Hedge over `horizon` rounds of i.i.d. uniform `[0, 1]` losses.
pub fn uniform_loss_trial(d: usize, horizon: usize, rng: &mut RngStream) -> Result<RegretLedger> {
    let mut ledger = RegretLedger::new(d, horizon);
    let mut weights = ExpertWeights::uniform(d);
    for _ in 0..horizon {
        let losses: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
        ledger.record(&weights, &losses)?;
        weights.hedge_update(&losses, ledger.eta)?;
    }
    Ok(ledger)
}
