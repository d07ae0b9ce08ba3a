use super::{DenseNet, GradientSet, NnError};

/// Central-difference estimate of `d loss / d theta` for every parameter.
///
/// Used as the test oracle for [`DenseNet::backward`].
pub fn numeric_gradient<F>(loss_fn: F, net: &DenseNet, h: f64) -> Result<GradientSet, NnError>
where
    F: Fn(&DenseNet) -> f64,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(NnError::InvalidStep(h));
    }
    let mut grads = GradientSet::zeros_like(net);
    let mut probe = net.clone();
    let mut k = 0;
    for layer in grads.layers.iter_mut() {
        for g in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            let orig = *probe.param_mut(k);
            *probe.param_mut(k) = orig + h;
            let plus = loss_fn(&probe);
            *probe.param_mut(k) = orig - h;
            let minus = loss_fn(&probe);
            *probe.param_mut(k) = orig;
            *g = (plus - minus) / (2.0 * h);
            k += 1;
        }
    }
    Ok(grads)
}
