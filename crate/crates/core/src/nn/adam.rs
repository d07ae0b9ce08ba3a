use ndarray::Zip;

use super::{DenseNet, GradientSet, NnError};

/// First and second moment estimates for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: GradientSet,
    pub v: GradientSet,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &DenseNet) -> Self {
        AdamState {
            m: GradientSet::zeros_like(net),
            v: GradientSet::zeros_like(net),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(net: &mut DenseNet, grads: &GradientSet, state: &mut AdamState, lr: f64) -> Result<(), NnError> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(NnError::InvalidLearningRate(lr));
    }
    if !grads.is_congruent(net) || !state.m.is_congruent(net) || !state.v.is_congruent(net) {
        return Err(NnError::ShapeMismatch("gradients or optimizer state do not match the network".to_string()));
    }
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let update = |p: &mut f64, &g: &f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };
    for (((layer, g), m), v) in net
        .layers_mut()
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.m.layers.iter_mut())
        .zip(state.v.layers.iter_mut())
    {
        Zip::from(&mut layer.weights)
            .and(&g.weights)
            .and(&mut m.weights)
            .and(&mut v.weights)
            .for_each(update);
        Zip::from(&mut layer.bias).and(&g.bias).and(&mut m.bias).and(&mut v.bias).for_each(update);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_network, Dense};
    use ndarray::array;

    fn scalar_net(w: f64) -> DenseNet {
        DenseNet::from_layers(vec![Dense { weights: array![[w]], bias: array![0.0] }]).unwrap()
    }

    fn scalar_grad(g: f64) -> GradientSet {
        GradientSet { layers: vec![Dense { weights: array![[g]], bias: array![0.0] }] }
    }

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        let mut net = init_network(&[3, 4, 1], 1).unwrap();
        let before = net.flatten();
        let mut grads = GradientSet::zeros_like(&net);
        for (k, l) in grads.layers.iter_mut().enumerate() {
            l.weights.mapv_inplace(|_| if k % 2 == 0 { 0.37 } else { -5.0 });
            l.bias.fill(2e-3);
        }
        let mut state = AdamState::new(&net);
        adam_step(&mut net, &grads, &mut state, 1e-3).unwrap();
        for ((a, b), g) in net.flatten().iter().zip(&before).zip(grads.flatten()) {
            let step = a - b;
            assert!((step + 1e-3 * g.signum()).abs() < 1e-8, "step {step} for grad {g}");
        }
        assert_eq!(state.t, 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = init_network(&[3, 4, 1], 1).unwrap();
        let before = net.clone();
        let mut state = AdamState::new(&net);
        adam_step(&mut net, &GradientSet::zeros_like(&before), &mut state, 0.1).unwrap();
        assert_eq!(net, before);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn matches_scalar_recurrence() {
        let (lr, g) = (0.01, 0.25);
        let mut net = scalar_net(1.5);
        let mut state = AdamState::new(&net);
        // independent simulation of the m, v, theta recurrences
        let (mut m, mut v, mut theta) = (0.0f64, 0.0f64, 1.5f64);
        for t in 1..=10 {
            adam_step(&mut net, &scalar_grad(g), &mut state, lr).unwrap();
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t));
            let v_hat = v / (1.0 - 0.999f64.powi(t));
            theta -= lr * m_hat / (v_hat.sqrt() + 1e-8);
            assert!((net.layers()[0].weights[[0, 0]] - theta).abs() < 1e-14);
        }
        assert_eq!(state.t, 10);
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let mut net = init_network(&[3, 4, 1], 1).unwrap();
        let other = init_network(&[3, 5, 1], 1).unwrap();
        let mut state = AdamState::new(&net);
        assert!(matches!(
            adam_step(&mut net, &GradientSet::zeros_like(&other), &mut state, 0.1),
            Err(NnError::ShapeMismatch(_))
        ));
        assert!(matches!(
            adam_step(&mut net, &GradientSet::zeros_like(&other), &mut state, 0.0),
            Err(NnError::InvalidLearningRate(_))
        ));
    }
}
