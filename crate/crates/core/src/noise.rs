//! Observation perturbations: what an attacked frame looks like to the
//! victim. Every pattern preserves the observation length.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numerics::{argmax, cross_entropy_grad, softmax};
use crate::rng::{shuffle_in_place, RngStream};
use crate::trace::StateVec;
use crate::victims::Victim;

pub const DEFAULT_EPSILON: f64 = 0.3;
pub const DEFAULT_KERNEL_SIZE: usize = 5;
pub const DEFAULT_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseName {
    ZeroOut,
    Gaussian,
    Fgsm,
    Shuffle,
}

impl NoiseName {
    pub const PHYSICAL: [NoiseName; 3] = [NoiseName::ZeroOut, NoiseName::Gaussian, NoiseName::Fgsm];

    pub fn name(self) -> &'static str {
        match self {
            NoiseName::ZeroOut => "zero_out",
            NoiseName::Gaussian => "gaussian",
            NoiseName::Fgsm => "fgsm",
            NoiseName::Shuffle => "shuffle",
        }
    }
}

impl fmt::Display for NoiseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zero_out" => Ok(NoiseName::ZeroOut),
            "gaussian" | "gaussian_fusion" => Ok(NoiseName::Gaussian),
            "fgsm" => Ok(NoiseName::Fgsm),
            "shuffle" => Ok(NoiseName::Shuffle),
            other => Err(format!("unknown noise kind `{other}` (zero_out|gaussian|fgsm|shuffle)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    ZeroOut,
    GaussianFusion(GaussianKernel),
    Fgsm { epsilon: f64 },
    Shuffle,
}

impl NoiseKind {
    pub fn build(name: NoiseName, epsilon: f64, kernel_size: usize, sigma: f64) -> Result<Self> {
        Ok(match name {
            NoiseName::ZeroOut => NoiseKind::ZeroOut,
            NoiseName::Gaussian => NoiseKind::GaussianFusion(GaussianKernel::new(kernel_size, sigma)?),
            NoiseName::Fgsm => {
                if !(epsilon > 0.0) {
                    return Err(Error::InvalidParameter(format!("fgsm epsilon must be positive, got {epsilon}")));
                }
                NoiseKind::Fgsm { epsilon }
            }
            NoiseName::Shuffle => NoiseKind::Shuffle,
        })
    }

    pub fn name(&self) -> NoiseName {
        match self {
            NoiseKind::ZeroOut => NoiseName::ZeroOut,
            NoiseKind::GaussianFusion(_) => NoiseName::Gaussian,
            NoiseKind::Fgsm { .. } => NoiseName::Fgsm,
            NoiseKind::Shuffle => NoiseName::Shuffle,
        }
    }

    /// Perturbs `state`. `victim` is consulted only by FGSM; `grid_shape`
    /// makes Gaussian fusion separable over rows then columns.
    pub fn apply(
        &self,
        state: &[f64],
        victim: &dyn Victim,
        grid_shape: Option<(usize, usize)>,
        rng: &mut RngStream,
    ) -> Result<StateVec> {
        match self {
            NoiseKind::ZeroOut => Ok(zero_out(state)),
            NoiseKind::GaussianFusion(kernel) => match grid_shape {
                Some((rows, cols)) => gaussian_fusion_grid(state, kernel, rows, cols),
                None => Ok(gaussian_fusion(state, kernel)),
            },
            NoiseKind::Fgsm { epsilon } => fgsm(state, victim, *epsilon),
            NoiseKind::Shuffle => Ok(shuffle(state, rng)),
        }
    }
}

/// Normalized, symmetric Gaussian taps.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    taps: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(kernel_size: usize, sigma: f64) -> Result<Self> {
        if kernel_size < 3 || kernel_size % 2 == 0 {
            return Err(Error::InvalidParameter(format!("kernel size must be odd and >= 3, got {kernel_size}")));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("kernel sigma must be positive, got {sigma}")));
        }
        let centre = (kernel_size / 2) as f64;
        let raw: Vec<f64> = (0..kernel_size)
            .map(|i| (-(i as f64 - centre).powi(2) / (2.0 * sigma * sigma)).exp())
            .collect();
        let sum: f64 = raw.iter().sum();
        Ok(Self {
            taps: raw.into_iter().map(|t| t / sum).collect(),
        })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

impl Default for GaussianKernel {
    fn default() -> Self {
        Self::new(DEFAULT_KERNEL_SIZE, DEFAULT_SIGMA).unwrap()
    }
}

/// Pulsed blackout: every reading becomes exactly zero.
pub fn zero_out(state: &[f64]) -> StateVec {
    StateVec::zeros(state.len())
}

/// Mirror an out-of-range index back into `[0, n)` without repeating the edge.
fn reflect(mut i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

fn convolve(values: &[f64], taps: &[f64]) -> Vec<f64> {
    let half = (taps.len() / 2) as isize;
    (0..values.len())
        .map(|i| {
            taps.iter()
                .enumerate()
                .map(|(k, &t)| t * values[reflect(i as isize + k as isize - half, values.len())])
                .sum()
        })
        .collect()
}

/// Sensor-fusion smoothing: 1-D convolution with reflect padding.
pub fn gaussian_fusion(state: &[f64], kernel: &GaussianKernel) -> StateVec {
    StateVec::new(convolve(state, &kernel.taps))
}

/// Separable smoothing of a row-major grid: along rows, then along columns.
pub fn gaussian_fusion_grid(state: &[f64], kernel: &GaussianKernel, rows: usize, cols: usize) -> Result<StateVec> {
    check_len(rows * cols, state.len())?;
    let mut out = Vec::with_capacity(state.len());
    for r in 0..rows {
        out.extend(convolve(&state[r * cols..(r + 1) * cols], &kernel.taps));
    }
    for c in 0..cols {
        let column: Vec<f64> = (0..rows).map(|r| out[r * cols + c]).collect();
        for (r, v) in convolve(&column, &kernel.taps).into_iter().enumerate() {
            out[r * cols + c] = v;
        }
    }
    Ok(StateVec::new(out))
}

/// Cross-entropy of the victim's softmaxed preferences against its own
/// preferred action, and the gradient of that loss with respect to the input.
pub fn fgsm_loss_and_gradient(victim: &dyn Victim, state: &[f64]) -> Result<(f64, Vec<f64>)> {
    let net = victim.preference_net();
    check_len(net.spec().input_dim(), state.len())?;
    let d = victim.action_count();
    let cache = net.forward_cached(state)?;
    let prefs = &cache.output()[..d];
    let target = argmax(prefs);
    let (loss, logit_grad) = cross_entropy_grad(&softmax(prefs), target)?;
    let mut out_grad = vec![0.0; net.spec().output_dim()];
    out_grad[..d].copy_from_slice(&logit_grad);
    Ok((loss, net.input_gradient(&cache, &out_grad)?))
}

/// `s + epsilon * sign(grad_x J)` with `sign(0) = 0`.
pub fn fgsm(state: &[f64], victim: &dyn Victim, epsilon: f64) -> Result<StateVec> {
    let (_, grad) = fgsm_loss_and_gradient(victim, state)?;
    Ok(StateVec::new(
        state
            .iter()
            .zip(&grad)
            .map(|(&x, &g)| {
                let sign = if g > 0.0 {
                    1.0
                } else if g < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                x + epsilon * sign
            })
            .collect(),
    ))
}

/// Uniform random permutation of the readings (Fisher–Yates).
pub fn shuffle(state: &[f64], rng: &mut RngStream) -> StateVec {
    let mut values = state.to_vec();
    shuffle_in_place(rng, &mut values);
    StateVec::new(values)
}
