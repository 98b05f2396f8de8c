use alloc::vec::Vec;

use crate::label::{Label, NUM_CLASSES};

/// Number of cumulative thresholds of a CORAL head.
pub const CORAL_THRESHOLDS: usize = NUM_CLASSES - 1;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

/// `ln sigmoid(z)`.
pub fn log_sigmoid(z: f64) -> f64 {
    -softplus(-z)
}

/// Sum of the four binary cross-entropies of the cumulative logits against
/// the extended targets `t_k = [y >= k]`.
pub fn coral_loss(logits: &[f64], y: Label) -> f64 {
    logits
        .iter()
        .enumerate()
        .map(|(k, &z)| {
            if y.index() > k {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum()
}

/// Gradient of [`coral_loss`] with respect to each cumulative logit.
pub(crate) fn coral_loss_grad(logits: &[f64], y: Label) -> Vec<f64> {
    logits
        .iter()
        .enumerate()
        .map(|(k, &z)| sigmoid(z) - if y.index() > k { 1.0 } else { 0.0 })
        .collect()
}

/// Number of cumulative probabilities above 0.5.
pub fn coral_decode(probabilities: &[f64]) -> Label {
    let count = probabilities.iter().filter(|&&p| p > 0.5).count();
    Label::ALL[count.min(NUM_CLASSES - 1)]
}

pub fn binary_loss(logit: f64, y: u8) -> f64 {
    if y > 0 {
        softplus(-logit)
    } else {
        softplus(logit)
    }
}

/// `1` iff `sigmoid(logit) > 0.5`; a logit of exactly 0 decodes to 0.
pub fn binary_decode(logit: f64) -> u8 {
    u8::from(logit > 0.0)
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + libm::log(logits.iter().map(|&z| libm::exp(z - max)).sum::<f64>())
}

pub fn multiclass_loss(logits: &[f64], y: Label) -> f64 {
    log_sum_exp(logits) - logits[y.index()]
}

pub(crate) fn multiclass_loss_grad(logits: &[f64], y: Label) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits
        .iter()
        .enumerate()
        .map(|(c, &z)| libm::exp(z - lse) - if c == y.index() { 1.0 } else { 0.0 })
        .collect()
}

/// Arg-max, ties to the lower label.
pub fn multiclass_decode(logits: &[f64]) -> Label {
    let mut best = 0;
    for (c, &z) in logits.iter().enumerate() {
        if z > logits[best] {
            best = c;
        }
    }
    Label::ALL[best]
}
