use crate::error::{Error, Result};

/// Numerically stable softmax (max-shifted before exponentiation).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// Smallest probability fed to the log, so a zero-probability target
/// yields a large finite loss instead of infinity.
const PROB_FLOOR: f64 = 1e-300;

/// Cross-entropy of `probs` against `target_id`, and its gradient with
/// respect to the logits that produced `probs` through softmax.
pub fn cross_entropy_grad(probs: &[f64], target_id: usize) -> Result<(f64, Vec<f64>)> {
    if target_id >= probs.len() {
        return Err(Error::IndexOutOfRange {
            index: target_id,
            len: probs.len(),
        });
    }
    let loss = -probs[target_id].max(PROB_FLOOR).ln();
    let mut grad = probs.to_vec();
    grad[target_id] -= 1.0;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits_give_uniform_probs() {
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
    }

    #[test]
    fn ln3_logit_gives_three_to_one() {
        let p = softmax(&[3f64.ln(), 0.0]);
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-300);
    }

    #[test]
    fn cross_entropy_examples() {
        let (loss, grad) = cross_entropy_grad(&[1.0, 0.0], 0).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad, vec![0.0, 0.0]);

        let (loss, grad) = cross_entropy_grad(&[0.75, 0.25], 0).unwrap();
        assert!((loss - 0.287_682_072_451_780_9).abs() < 1e-12);
        assert_eq!(grad, vec![-0.25, 0.25]);

        let (loss, _) = cross_entropy_grad(&[0.25; 4], 2).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_target_out_of_range() {
        assert!(matches!(
            cross_entropy_grad(&[0.5, 0.5], 2),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn log_softmax_matches_log_of_softmax() {
        let z = [0.3, -1.2, 2.5];
        for (a, b) in log_softmax(&z).iter().zip(softmax(&z)) {
            assert!((a - b.ln()).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn softmax_normalized_and_shift_invariant(
            logits in prop::collection::vec(-50.0f64..50.0, 1..12),
            shift in -100.0f64..100.0,
        ) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
