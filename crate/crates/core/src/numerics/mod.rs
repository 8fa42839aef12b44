//! Small dense-network kernel: forward/backward over a fixed MLP shape,
//! softmax and cross-entropy, and the Adam optimizer.

mod adam;
mod checkpoint;
mod loss;
mod mlp;

pub use adam::AdamState;
pub use checkpoint::{read_params, write_params, CHECKPOINT_VERSION};
pub use loss::{cross_entropy_grad, log_softmax, softmax};
pub use mlp::{Activation, ForwardCache, MlpParams, MlpSpec};

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest entry; ties go to the lowest index.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}
