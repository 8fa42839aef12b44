//! Fast invariant checks runnable from the command line.

use crate::attackers::{
    pepg_log_grad, potential_energy_c, uniform_loss_trial, AttackBudget, ExpertWeights, PepgConfig, PepgDistribution,
    RandomTimer,
};
use crate::error::Result;
use crate::noise::{gaussian_fusion, shuffle, zero_out, GaussianKernel};
use crate::numerics::{MlpParams, MlpSpec};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Maximum regret over `trials` uniform-loss runs, with the bound.
pub fn regret_check(d: usize, horizon: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = RngStream::new(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut bound = 0.0;
    for _ in 0..trials {
        let ledger = uniform_loss_trial(d, horizon, &mut rng)?;
        worst = worst.max(ledger.empirical_regret()?);
        bound = ledger.bound();
    }
    Ok((worst, bound))
}

fn check(name: &'static str, result: Result<(bool, String)>) -> Check {
    match result {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

pub fn run_selftest(seed: u64) -> Vec<Check> {
    vec![
        check("regret bound", regret_suite(seed)),
        check("potential range and scale invariance", potential_suite(seed)),
        check("noise invariants", noise_suite(seed)),
        check("random timer budget", budget_suite(seed)),
        check("mlp input gradient", mlp_suite(seed)),
        check("pepg log-density gradient", pepg_suite(seed)),
    ]
}

fn regret_suite(seed: u64) -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [2, 4, 16] {
        for t in [100, 1000] {
            let (worst, bound) = regret_check(d, t, 50, seed ^ (d * t) as u64)?;
            ok &= worst <= bound;
            parts.push(format!("d={d} T={t}: {worst:.2}/{bound:.2}"));
        }
    }
    Ok((ok, parts.join(", ")))
}

fn potential_suite(seed: u64) -> Result<(bool, String)> {
    let mut rng = RngStream::new(seed);
    for _ in 0..500 {
        let d = 2 + rng.below(7);
        let q: Vec<f64> = (0..d).map(|_| rng.uniform_range(-10.0, 10.0)).collect();
        let raw: Vec<f64> = (0..d).map(|_| rng.uniform_range(0.01, 5.0)).collect();
        let p = potential_energy_c(&ExpertWeights::from_raw(raw.clone())?, &q)?;
        let scaled = potential_energy_c(&ExpertWeights::from_raw(raw.iter().map(|w| w * 7.0).collect())?, &q)?;
        if !(0.0..=1.0).contains(&p.c) || (p.c - scaled.c).abs() > 1e-12 {
            return Ok((false, format!("c = {} vs scaled {}", p.c, scaled.c)));
        }
    }
    Ok((true, "500 random inputs".into()))
}

fn noise_suite(seed: u64) -> Result<(bool, String)> {
    let mut rng = RngStream::new(seed);
    let state: Vec<f64> = (0..37).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let zero_ok = zero_out(&state).iter().all(|&v| v == 0.0);
    let kernel = GaussianKernel::new(5, 1.0)?;
    let sum_ok = (kernel.taps().iter().sum::<f64>() - 1.0).abs() <= 1e-9;
    let constant_ok = gaussian_fusion(&[2.5; 37], &kernel).iter().all(|&v| (v - 2.5).abs() <= 1e-12);
    let mut a = shuffle(&state, &mut rng).into_inner();
    let mut b = state.clone();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let multiset_ok = a == b;
    Ok((
        zero_ok && sum_ok && constant_ok && multiset_ok,
        format!("zero {zero_ok}, kernel sum {sum_ok}, constant {constant_ok}, multiset {multiset_ok}"),
    ))
}

fn budget_suite(seed: u64) -> Result<(bool, String)> {
    let mut rng = RngStream::new(seed);
    for (cap, horizon) in [(40, 300), (40, 40), (40, 10), (0, 50)] {
        let timer = RandomTimer::draw(&mut rng, cap, horizon);
        let mut budget = AttackBudget::new(cap);
        let hits = (0..horizon).filter(|&f| timer.random_decide(f, &mut budget).attack).count();
        if hits != cap.min(horizon) {
            return Ok((false, format!("H={cap} horizon={horizon}: {hits} attacks")));
        }
    }
    Ok((true, "exactly min(H, horizon) attacks".into()))
}

fn mlp_suite(seed: u64) -> Result<(bool, String)> {
    let mut rng = RngStream::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let net = MlpParams::init(&MlpSpec::tanh(6, &[8, 8], 3), &mut rng);
        let x: Vec<f64> = (0..6).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let w: Vec<f64> = (0..3).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let objective = |x: &[f64]| -> Result<f64> { Ok(net.forward(x)?.iter().zip(&w).map(|(o, w)| o * w).sum()) };
        let (_, grad) = net.backward(&x, &w)?;
        for i in 0..x.len() {
            let h = 1e-5;
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (objective(&plus)? - objective(&minus)?) / (2.0 * h);
            worst = worst.max((fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8));
        }
    }
    Ok((worst <= 1e-4, format!("max rel. err {worst:.2e}")))
}

fn pepg_suite(seed: u64) -> Result<(bool, String)> {
    let mut rng = RngStream::new(seed);
    let mut dist = PepgDistribution::new(vec![0.3, -0.7, 1.1], &PepgConfig::default())?;
    dist.stddev = vec![0.5, 1.3, 2.0];
    let theta = dist.sample(&mut rng);
    let g = pepg_log_grad(&theta, &dist)?;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        let mut plus = dist.clone();
        let mut minus = dist.clone();
        plus.mean[i] += h;
        minus.mean[i] -= h;
        let fd = (plus.log_density(&theta) - minus.log_density(&theta)) / (2.0 * h);
        worst = worst.max((fd - g.mu[i]).abs() / g.mu[i].abs().max(1.0));
    }
    Ok((worst <= 1e-6, format!("max err {worst:.2e}")))
}
