use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Tanh => 1,
            Activation::Relu => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Relu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, hidden: Activation, output: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidParameter(format!(
                "mlp needs at least two positive layer sizes, got {layer_sizes:?}"
            )));
        }
        Ok(Self {
            layer_sizes,
            hidden,
            output,
        })
    }

    /// `input -> hidden.. -> output` with tanh hidden units and a linear head.
    pub fn tanh(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes, Activation::Tanh, Activation::Identity).expect("positive layer sizes")
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 2 == self.layer_sizes.len() {
            self.output
        } else {
            self.hidden
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out x n_in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Weights and biases of an MLP. The same shape is used for gradients and
/// optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    spec: MlpSpec,
    layers: Vec<Layer>,
}

/// Per-layer pre-activations and outputs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input, `activations[l + 1]` the output of layer `l`.
    pub activations: Vec<Vec<f64>>,
    pub pre_activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

impl MlpParams {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let layers = spec
            .layer_sizes
            .windows(2)
            .map(|w| Layer {
                n_in: w[0],
                n_out: w[1],
                weights: vec![0.0; w[0] * w[1]],
                bias: vec![0.0; w[1]],
            })
            .collect();
        Self {
            spec: spec.clone(),
            layers,
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(spec: &MlpSpec, rng: &mut RngStream) -> Self {
        let mut params = Self::zeros(spec);
        for layer in &mut params.layers {
            let limit = (6.0 / (layer.n_in + layer.n_out) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.uniform_range(-limit, limit);
            }
        }
        params
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.spec)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len(self.spec.input_dim(), input.len())?;
        let mut current = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let act = self.spec.activation(l);
            current = affine(layer, &current).into_iter().map(|z| act.apply(z)).collect();
        }
        Ok(current)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        check_len(self.spec.input_dim(), input.len())?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(input.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let act = self.spec.activation(l);
            let z = affine(layer, activations.last().unwrap());
            activations.push(z.iter().map(|&v| act.apply(v)).collect());
            pre_activations.push(z);
        }
        Ok(ForwardCache {
            activations,
            pre_activations,
        })
    }

    /// Gradients of a scalar loss with respect to every parameter and to the
    /// input, given `dL/d(output)`.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<(MlpParams, Vec<f64>)> {
        let cache = self.forward_cached(input)?;
        let mut grads = self.zeros_like();
        let input_grad = self.backward_accumulate(&cache, output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Adds this sample's parameter gradients into `grads` and returns the
    /// input gradient.
    pub fn backward_accumulate(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
        grads: &mut MlpParams,
    ) -> Result<Vec<f64>> {
        self.backpropagate(cache, output_grad, Some(grads))
    }

    /// Input gradient only; parameter gradients are not formed.
    pub fn input_gradient(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<Vec<f64>> {
        self.backpropagate(cache, output_grad, None)
    }

    fn backpropagate(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
        mut grads: Option<&mut MlpParams>,
    ) -> Result<Vec<f64>> {
        check_len(self.spec.output_dim(), output_grad.len())?;
        let n = self.layers.len();
        let mut delta: Vec<f64> = output_grad.to_vec();
        for l in (0..n).rev() {
            let act = self.spec.activation(l);
            let z = &cache.pre_activations[l];
            let a = &cache.activations[l + 1];
            for i in 0..delta.len() {
                delta[i] *= act.derivative(z[i], a[i]);
            }
            let layer = &self.layers[l];
            let prev = &cache.activations[l];
            if let Some(grads) = grads.as_deref_mut() {
                let g = &mut grads.layers[l];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g.bias[o] += d;
                    let row = &mut g.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    for (gw, &x) in row.iter_mut().zip(prev) {
                        *gw += d * x;
                    }
                }
            }
            let mut next = vec![0.0; layer.n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                for (nx, &w) in next.iter_mut().zip(row) {
                    *nx += d * w;
                }
            }
            delta = next;
        }
        Ok(delta)
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    /// Layer by layer: weights (row-major) then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn from_flat(spec: &MlpSpec, flat: &[f64]) -> Result<Self> {
        check_len(spec.param_count(), flat.len())?;
        let mut params = Self::zeros(spec);
        let mut offset = 0;
        for layer in &mut params.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(params)
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    pub fn add_scaled(&mut self, other: &MlpParams, factor: f64) {
        debug_assert_eq!(self.spec, other.spec);
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += factor * b;
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }
}

fn affine(layer: &Layer, input: &[f64]) -> Vec<f64> {
    let mut out = layer.bias.clone();
    for (o, acc) in out.iter_mut().enumerate() {
        let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
        *acc += row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
    }
    out
}
