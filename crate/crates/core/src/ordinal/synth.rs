//! Synthetic feature sets standing in for encoder output.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::head::Example;
use crate::label::Label;

/// One feature `x ~ U(0, 5)` with label `clamp(floor(x), 0, 4)`.
pub fn synthetic_ordinal(n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let x: f64 = rng.random_range(0.0..5.0);
            let y = (libm::floor(x) as i64).clamp(0, 4);
            Example::new(format!("s{i:05}"), vec![x], Label::ALL[y as usize])
        })
        .collect()
}

/// Two features in `[-3, 3]^2`, labeled by the side of the diagonal
/// `x0 + x1 = 0`, with points closer than 0.5 to it rejected so the classes
/// sit a margin of 1 apart. Positives carry label 1.
pub fn synthetic_binary(n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x0: f64 = rng.random_range(-3.0..3.0);
        let x1: f64 = rng.random_range(-3.0..3.0);
        let side = (x0 + x1) / core::f64::consts::SQRT_2;
        if side.abs() < 0.5 {
            continue;
        }
        let label = if side > 0.0 { Label::ALL[1] } else { Label::ABSENT };
        out.push(Example::new(format!("s{:05}", out.len()), vec![x0, x1], label));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordinal_labels_follow_floor() {
        for ex in synthetic_ordinal(200, 1) {
            assert_eq!(ex.label.value() as f64, libm::floor(ex.features[0]).min(4.0));
        }
    }

    #[test]
    fn binary_has_margin() {
        let data = synthetic_binary(300, 2);
        assert_eq!(data.len(), 300);
        for ex in &data {
            let side = (ex.features[0] + ex.features[1]) / core::f64::consts::SQRT_2;
            assert!(side.abs() >= 0.5);
            assert_eq!(ex.binary, u8::from(side > 0.0));
        }
    }
}
