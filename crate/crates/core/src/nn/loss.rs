use ndarray::ArrayView1;

use super::NnError;

/// Probabilities are clipped to `[PROB_EPS, 1 - PROB_EPS]` before the log.
pub const PROB_EPS: f64 = 1e-7;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy.
pub fn bce_loss(probs: ArrayView1<f64>, labels: ArrayView1<f64>) -> Result<f64, NnError> {
    if probs.len() != labels.len() {
        return Err(NnError::LengthMismatch { left: probs.len(), right: labels.len() });
    }
    if probs.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = probs
        .iter()
        .zip(labels.iter())
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / probs.len() as f64)
}
