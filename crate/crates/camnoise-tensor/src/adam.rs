//! Adam optimizer with bias-corrected first and second moments.

use crate::element::Element;
use crate::error::GraphError;
use crate::graph::{Gradients, Graph};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    /// Step size α.
    pub learning_rate: f64,
    /// Exponential decay of the first-moment estimate (β₁).
    pub beta1: f64,
    /// Exponential decay of the second-moment estimate (β₂).
    pub beta2: f64,
    /// Denominator fuzz term ε.
    pub epsilon: f64,
}

impl Default for AdamConfig {
    /// Learning rate 1e-4 with the standard β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    /// Default moments with a caller-chosen learning rate.
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Optimizer state: one first- and second-moment accumulator per parameter
/// scalar, plus the step counter driving bias correction.
///
/// Moments are held in `f64` whatever the graph's element type, so the update
/// itself never becomes the precision bottleneck.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    /// Fresh zeroed state sized for `graph`'s parameter tensors.
    pub fn new<F: Element>(graph: &Graph<F>, config: AdamConfig) -> Self {
        let m = graph
            .param_tensors()
            .iter()
            .map(|t| vec![0.0; t.len()])
            .collect::<Vec<_>>();
        let v = m.clone();
        Self {
            config,
            m,
            v,
            step: 0,
        }
    }

    /// The hyperparameters this state was created with.
    pub fn config(&self) -> AdamConfig {
        self.config
    }

    /// Number of update steps applied so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one Adam update to every parameter of `graph` in place.
    ///
    /// For each scalar with gradient `g`:
    /// `m ← β₁·m + (1−β₁)·g`, `v ← β₂·v + (1−β₂)·g²`, then
    /// `p ← p − α · (m / (1−β₁ᵗ)) / (√(v / (1−β₂ᵗ)) + ε)`.
    /// A scalar with zero gradient and zero accumulated moments is left
    /// bit-identical.
    ///
    /// # Errors
    ///
    /// Fails when `grads` does not match the graph's parameter layout (for
    /// example, gradients taken from a different architecture).
    pub fn apply<F: Element>(
        &mut self,
        graph: &mut Graph<F>,
        grads: &Gradients<F>,
    ) -> Result<(), GraphError> {
        let tensors = graph.param_tensors_mut();
        if grads.param_grads().len() != tensors.len() {
            return Err(GraphError::ShapeMismatch {
                context: "adam update".to_string(),
                expected: format!("{} parameter tensors", tensors.len()),
                got: format!("{}", grads.param_grads().len()),
            });
        }
        for (slot, (tensor, grad)) in tensors.iter().zip(grads.param_grads().iter()).enumerate() {
            if tensor.dims() != grad.dims() {
                return Err(GraphError::ShapeMismatch {
                    context: format!("adam update, parameter slot {slot}"),
                    expected: format!("{:?}", tensor.dims()),
                    got: format!("{:?}", grad.dims()),
                });
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let c = self.config;
        let m_corr = 1.0 - c.beta1.powi(t);
        let v_corr = 1.0 - c.beta2.powi(t);
        for ((tensor, grad), (m, v)) in tensors
            .iter_mut()
            .zip(grads.param_grads().iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for ((p, g), (m, v)) in tensor
                .data_mut()
                .iter_mut()
                .zip(grad.data().iter())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                let g = g.to_f64();
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                let m_hat = *m / m_corr;
                let v_hat = *v / v_corr;
                let update = c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
                if update != 0.0 {
                    *p = F::from_f64(p.to_f64() - update);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use crate::tensor::Tensor;

    /// One trainable scalar behind a 1-feature dense layer (bias unused).
    /// Returns the graph and the dense node's id.
    fn scalar_graph(initial: f64) -> (Graph<f64>, usize) {
        let mut b = GraphBuilder::new();
        let x = b.input_flat(1);
        let out = b.dense(x, 1, "p").unwrap();
        let mut g: Graph<f64> = b.build(0);
        g.set_param("p.weight", Tensor::new(&[1, 1], vec![initial]).unwrap())
            .unwrap();
        (g, out)
    }

    /// Drives one forward/backward pass that lands gradient `g` on the
    /// weight: input 1.0, seed g — d(w·x)/dw = x·g = g.
    fn grads_with(g: &Graph<f64>, out: usize, grad: f64) -> Gradients<f64> {
        let input = Tensor::new(&[1, 1], vec![1.0]).unwrap();
        let acts = g.forward(&[&input]).unwrap();
        let seed = vec![grad];
        g.backward(acts, &[(out, &seed)], false).unwrap()
    }

    #[test]
    fn first_step_matches_hand_computation() {
        let (mut g, out) = scalar_graph(1.0);
        let mut adam = AdamState::new(&g, AdamConfig::with_learning_rate(0.1));
        let grads = grads_with(&g, out, 1.0);
        adam.apply(&mut g, &grads).unwrap();
        // m̂ = v̂ = 1 after bias correction on step 1, so the update is
        // α · 1/(1 + ε): the weight moves from 1.0 to 1 − 0.1/(1+1e-8).
        let want = 1.0 - 0.1 / (1.0 + 1e-8);
        let got = g.param("p.weight").unwrap().data()[0];
        assert!((got - want).abs() < 1e-15, "got {got}, want {want}");
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn second_step_matches_hand_computation() {
        let (mut g, out) = scalar_graph(1.0);
        let mut adam = AdamState::new(&g, AdamConfig::with_learning_rate(0.1));
        for _ in 0..2 {
            let grads = grads_with(&g, out, 1.0);
            adam.apply(&mut g, &grads).unwrap();
        }
        // Constant gradient 1: after two steps m̂ = v̂ = 1 again, so each
        // step subtracts α/(1+ε).
        let step = 0.1 / (1.0 + 1e-8);
        let want = 1.0 - 2.0 * step;
        let got = g.param("p.weight").unwrap().data()[0];
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }

    #[test]
    fn zero_gradient_leaves_parameters_untouched() {
        let (mut g, out) = scalar_graph(2.5);
        let mut adam = AdamState::new(&g, AdamConfig::default());
        let grads = grads_with(&g, out, 0.0);
        adam.apply(&mut g, &grads).unwrap();
        assert_eq!(g.param("p.weight").unwrap().data()[0], 2.5);
    }

    #[test]
    fn descends_a_simple_quadratic() {
        // Minimize (w − 3)² by feeding its gradient 2(w − 3).
        let (mut g, out) = scalar_graph(0.0);
        let mut adam = AdamState::new(&g, AdamConfig::with_learning_rate(0.05));
        for _ in 0..2000 {
            let w = g.param("p.weight").unwrap().data()[0];
            let grads = grads_with(&g, out, 2.0 * (w - 3.0));
            adam.apply(&mut g, &grads).unwrap();
        }
        let w = g.param("p.weight").unwrap().data()[0];
        assert!((w - 3.0).abs() < 1e-2, "converged to {w}, want 3.0");
    }

    #[test]
    fn rejects_mismatched_gradients() {
        let (mut g, _) = scalar_graph(1.0);
        let (other, other_out) = {
            let mut b = GraphBuilder::new();
            let x = b.input_flat(2);
            let out = b.dense(x, 2, "q").unwrap();
            (b.build::<f64>(0), out)
        };
        let input = Tensor::new(&[1, 2], vec![1.0, 1.0]).unwrap();
        let acts = other.forward(&[&input]).unwrap();
        let seed = vec![1.0, 1.0];
        let foreign = other.backward(acts, &[(other_out, &seed)], false).unwrap();
        let mut adam = AdamState::new(&g, AdamConfig::default());
        assert!(adam.apply(&mut g, &foreign).is_err());
    }
}
