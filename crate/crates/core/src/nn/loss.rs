use super::{NnError, Result};

/// Floor added inside the logarithm of the cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

/// Numerically stable softmax (the maximum logit is subtracted first).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// `-ln(probs[label] + PROB_FLOOR)`.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or(NnError::Label {
        label,
        classes: probs.len(),
    })?;
    Ok(-(p + PROB_FLOOR).ln())
}

/// Gradient of `cross_entropy(softmax(z), label)` with respect to the logits `z`,
/// given `probs = softmax(z)`.
///
/// The floor makes this `p_y / (p_y + floor) * (p - onehot)` rather than the
/// textbook `p - onehot`; the two agree to within the floor.
pub fn cross_entropy_logit_grad(probs: &[f64], label: usize) -> Result<Vec<f64>> {
    let p_label = *probs.get(label).ok_or(NnError::Label {
        label,
        classes: probs.len(),
    })?;
    let scale = p_label / (p_label + PROB_FLOOR);
    Ok(probs
        .iter()
        .enumerate()
        .map(|(j, &p)| scale * (p - if j == label { 1.0 } else { 0.0 }))
        .collect())
}
