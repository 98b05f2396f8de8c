//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use labelwise_core::agreement::AnnotationMatrix;
use labelwise_core::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PAIRING_FREQUENCIES: [[f64; 5]; 5] = [
    [0.525, 0.032, 0.037, 0.015, 0.003],
    [0.032, 0.014, 0.020, 0.009, 0.001],
    [0.037, 0.020, 0.052, 0.036, 0.007],
    [0.015, 0.009, 0.036, 0.044, 0.016],
    [0.003, 0.001, 0.007, 0.016, 0.013],
];

pub const LABEL_SHARES: [f64; 5] = [0.665, 0.073, 0.142, 0.094, 0.026];

/// Krippendorff's alpha straight from the pairable values of each item,
/// without building a coincidence matrix.
///
/// `D_o = (1/n) sum_u 1/(m_u - 1) sum_{i != j} delta(v_ui, v_uj)` and
/// `D_e = 1/(n (n - 1)) sum_{p != q} delta(v_p, v_q)` over all pairable values.
pub fn brute_force_alpha(grid: &[Vec<Option<u8>>], ordinal: bool, binary: bool) -> Option<f64> {
    let map = |v: u8| if binary { u8::from(v > 0) } else { v };
    let units: Vec<Vec<u8>> = grid
        .iter()
        .map(|row| row.iter().flatten().map(|&v| map(v)).collect::<Vec<u8>>())
        .filter(|vals| vals.len() >= 2)
        .collect();
    let all: Vec<u8> = units.iter().flatten().copied().collect();
    let n = all.len() as f64;
    if all.is_empty() {
        return None;
    }
    let mut counts = [0f64; 5];
    for &v in &all {
        counts[v as usize] += 1.0;
    }
    let delta = |a: u8, b: u8| -> f64 {
        if a == b {
            return 0.0;
        }
        if !ordinal {
            return 1.0;
        }
        let (lo, hi) = (a.min(b) as usize, a.max(b) as usize);
        let span: f64 = counts[lo..=hi].iter().sum();
        let d = span - (counts[a as usize] + counts[b as usize]) / 2.0;
        d * d
    };
    let mut observed = 0.0;
    for vals in &units {
        let m = vals.len() as f64;
        for (i, &a) in vals.iter().enumerate() {
            for (j, &b) in vals.iter().enumerate() {
                if i != j {
                    observed += delta(a, b) / (m - 1.0);
                }
            }
        }
    }
    observed /= n;
    let mut expected = 0.0;
    for (p, &a) in all.iter().enumerate() {
        for (q, &b) in all.iter().enumerate() {
            if p != q {
                expected += delta(a, b);
            }
        }
    }
    expected /= n * (n - 1.0);
    if expected == 0.0 {
        return None;
    }
    Some(1.0 - observed / expected)
}

/// Most frequent label by counting each candidate from the top down.
pub fn naive_most_frequent(labels: &[u8]) -> u8 {
    let count = |c: u8| labels.iter().filter(|&&l| l == c).count();
    let best = (0..5).map(count).max().unwrap();
    (0..5u8).rev().find(|&c| count(c) == best).unwrap()
}

pub fn naive_max(labels: &[u8]) -> u8 {
    let mut m = 0;
    for &l in labels {
        if l > m {
            m = l;
        }
    }
    m
}

/// Every multiset of labels with `1..=max_size` elements, as sorted vectors.
pub fn all_multisets(max_size: usize) -> Vec<Vec<u8>> {
    fn extend(prefix: &mut Vec<u8>, min: u8, left: usize, out: &mut Vec<Vec<u8>>) {
        if left == 0 {
            out.push(prefix.clone());
            return;
        }
        for v in min..5 {
            prefix.push(v);
            extend(prefix, v, left - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for size in 1..=max_size {
        extend(&mut Vec::new(), 0, size, &mut out);
    }
    out
}

pub fn labels(values: &[u8]) -> Vec<Label> {
    values.iter().map(|&v| Label::new(v as i64).unwrap()).collect()
}

/// Random sparse grid: up to `max_items` items, up to `max_annotators`
/// annotators, each cell present with probability 0.7, every item keeping at
/// least one label.
pub fn random_grid(rng: &mut ChaCha8Rng, max_items: usize, max_annotators: usize) -> Vec<Vec<Option<u8>>> {
    let items = rng.random_range(1..=max_items);
    let annotators = rng.random_range(1..=max_annotators);
    let levels = rng.random_range(2..=5u8);
    (0..items)
        .map(|_| {
            let mut row: Vec<Option<u8>> = (0..annotators)
                .map(|_| rng.random_bool(0.7).then(|| rng.random_range(0..levels)))
                .collect();
            if row.iter().all(Option::is_none) {
                row[0] = Some(rng.random_range(0..levels));
            }
            row
        })
        .collect()
}

pub fn grid_matrix(grid: &[Vec<Option<u8>>]) -> AnnotationMatrix {
    AnnotationMatrix::from_grid(grid)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Large matrix whose labels carry item-level signal, then a shuffled copy
/// with the same cells and the same multiset of labels.
pub fn shuffled_large(seed: u64) -> (AnnotationMatrix, AnnotationMatrix) {
    use rand::seq::SliceRandom;
    let mut rng = rng(seed);
    let mut cells = Vec::new();
    for item in 0..4000 {
        let severity: u8 = rng.random_range(0..5);
        for a in 0..3 {
            let noisy = if rng.random_bool(0.7) { severity } else { rng.random_range(0..5) };
            cells.push((format!("i{item}"), format!("a{}", (item + a) % 8), noisy));
        }
    }
    let original = AnnotationMatrix::from_cells(
        cells.iter().map(|(i, a, v)| (i.as_str(), a.as_str(), Label::new(*v as i64).unwrap())),
    );
    let mut values: Vec<u8> = cells.iter().map(|c| c.2).collect();
    values.shuffle(&mut rng);
    let shuffled = AnnotationMatrix::from_cells(
        cells
            .iter()
            .zip(values)
            .map(|((i, a, _), v)| (i.as_str(), a.as_str(), Label::new(v as i64).unwrap())),
    );
    (original, shuffled)
}
