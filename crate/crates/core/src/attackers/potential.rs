//! Potential-gap scores that rate how attack-worthy a frame is.

use super::hedge::ExpertWeights;
use crate::error::{Error, Result};
use crate::numerics::{argmax, argmin};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    pub c: f64,
    pub a_max: usize,
    pub a_min: usize,
}

/// Value-based score: with `u_i = w_i exp(-q_i)` and `p = u / sum(u)`,
/// `c = p[argmax u] - p[argmin u]`. Weights are used normalized; `-q` is
/// max-shifted before exponentiation.
pub fn potential_energy_c(weights: &ExpertWeights, q: &[f64]) -> Result<Potential> {
    let d = q.len();
    if d < 2 {
        return Err(Error::InvalidParameter(format!("potential needs at least 2 actions, got {d}")));
    }
    if weights.len() != d {
        return Err(Error::Shape { expected: weights.len(), got: d });
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite Q-value".into()));
    }
    let shift = q.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max);
    let u: Vec<f64> = weights
        .normalized()
        .iter()
        .zip(q)
        .map(|(w, qi)| w * (-qi - shift).exp())
        .collect();
    let total: f64 = u.iter().sum();
    let (a_max, a_min) = (argmax(&u), argmin(&u));
    Ok(Potential {
        c: (u[a_max] - u[a_min]) / total,
        a_max,
        a_min,
    })
}

/// Policy-based score: `v_i = w_i pi_i`, `c = max v - min v`.
pub fn policy_potential_c(weights: &ExpertWeights, pi: &[f64]) -> Result<Potential> {
    let d = pi.len();
    if d < 2 {
        return Err(Error::InvalidParameter(format!("potential needs at least 2 actions, got {d}")));
    }
    if weights.len() != d {
        return Err(Error::Shape { expected: weights.len(), got: d });
    }
    let sum: f64 = pi.iter().sum();
    if pi.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!("not a probability vector: {pi:?}")));
    }
    let v: Vec<f64> = weights.normalized().iter().zip(pi).map(|(w, p)| w * p).collect();
    let (a_max, a_min) = (argmax(&v), argmin(&v));
    Ok(Potential {
        c: v[a_max] - v[a_min],
        a_max,
        a_min,
    })
}
