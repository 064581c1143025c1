//! Mean-squared-error loss and its gradient.

use crate::element::Element;

/// Mean squared error between `prediction` and `target`.
///
/// Computed as `Σ (pᵢ − tᵢ)² / n` with `f64` accumulation in index order.
///
/// # Panics
///
/// Panics when the slices are empty or their lengths differ.
pub fn mse_loss<F: Element>(prediction: &[F], target: &[F]) -> f64 {
    assert!(!prediction.is_empty(), "mse_loss over an empty slice");
    assert_eq!(
        prediction.len(),
        target.len(),
        "mse_loss length mismatch"
    );
    let mut sum = 0.0;
    for (p, t) in prediction.iter().zip(target.iter()) {
        let d = p.to_f64() - t.to_f64();
        sum += d * d;
    }
    sum / prediction.len() as f64
}

/// Writes `∂(scale · MSE)/∂prediction` into `grad`.
///
/// Each element becomes `scale · 2 (pᵢ − tᵢ) / n`; existing contents of
/// `grad` are overwritten. `scale` lets callers weight this loss within a
/// multi-term objective (for a mean over k heads, pass `1/k`).
///
/// # Panics
///
/// Panics when the slices are empty or their lengths differ.
pub fn mse_loss_grad<F: Element>(prediction: &[F], target: &[F], scale: f64, grad: &mut [F]) {
    assert!(!prediction.is_empty(), "mse_loss_grad over an empty slice");
    assert_eq!(
        prediction.len(),
        target.len(),
        "mse_loss_grad length mismatch"
    );
    assert_eq!(
        prediction.len(),
        grad.len(),
        "mse_loss_grad output length mismatch"
    );
    let factor = 2.0 * scale / prediction.len() as f64;
    for ((g, p), t) in grad.iter_mut().zip(prediction.iter()).zip(target.iter()) {
        *g = F::from_f64(factor * (p.to_f64() - t.to_f64()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_matches_hand_computation() {
        // ((1−0)² + (2−0)²) / 2 = 2.5
        assert_eq!(mse_loss(&[1.0f64, 2.0], &[0.0, 0.0]), 2.5);
        // Perfect prediction → 0.
        assert_eq!(mse_loss(&[3.0f32, -1.0], &[3.0, -1.0]), 0.0);
    }

    #[test]
    fn grad_matches_hand_computation() {
        let mut grad = [0.0f64; 2];
        mse_loss_grad(&[1.0, 2.0], &[0.0, 0.0], 1.0, &mut grad);
        // 2·(p−t)/n with n = 2 → exactly p − t.
        assert_eq!(grad, [1.0, 2.0]);

        mse_loss_grad(&[1.0, 2.0], &[0.0, 0.0], 0.5, &mut grad);
        assert_eq!(grad, [0.5, 1.0]);
    }

    #[test]
    fn grad_agrees_with_finite_differences() {
        let pred = [0.7f64, -0.3, 1.9];
        let target = [1.0f64, 0.0, 2.0];
        let mut grad = [0.0f64; 3];
        mse_loss_grad(&pred, &target, 1.0, &mut grad);
        let eps = 1e-7;
        for i in 0..pred.len() {
            let mut up = pred;
            up[i] += eps;
            let mut down = pred;
            down[i] -= eps;
            let numeric = (mse_loss(&up, &target) - mse_loss(&down, &target)) / (2.0 * eps);
            assert!(
                (grad[i] - numeric).abs() < 1e-8,
                "grad[{i}]: analytic {} vs numeric {numeric}",
                grad[i]
            );
        }
    }

    #[test]
    #[should_panic(expected = "length mismatch")]
    fn mismatched_lengths_panic() {
        mse_loss(&[1.0f32], &[1.0, 2.0]);
    }
}
