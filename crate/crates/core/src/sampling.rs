//! Choosing which postings go into the next round.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default half-width of the probability band around 0.5 for
/// [`PreclassMode::NearBoundary`].
pub const DEFAULT_BOUNDARY_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("requested {requested} postings but only {available} are eligible")]
    TooMany { requested: usize, available: usize },
    #[error("no candidate postings carry a pre-classifier probability")]
    NoProbabilities,
}

/// Draws `n` distinct ids uniformly without replacement.
///
/// The eligible ids are sorted before drawing so the result depends only on
/// the set of ids, `n` and `seed`.
pub fn sample_random(eligible: &[String], n: usize, seed: u64) -> Result<Vec<String>, SamplingError> {
    if n > eligible.len() {
        return Err(SamplingError::TooMany {
            requested: n,
            available: eligible.len(),
        });
    }
    let mut sorted: Vec<&String> = eligible.iter().collect();
    sorted.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, sorted.len(), n)
        .into_iter()
        .map(|i| sorted[i].clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreclassMode {
    /// Highest positive-class probability first (catches false positives).
    TopPositive,
    /// Closest to 0.5 first, restricted to `|p - 0.5| <= epsilon`.
    NearBoundary,
}

/// Picks postings by their pre-classifier probability.
///
/// Candidates without a probability are ignored; ties are broken by id.
pub fn sample_preclassified(
    candidates: &[(String, Option<f64>)],
    mode: PreclassMode,
    n: usize,
    epsilon: f64,
) -> Result<Vec<String>, SamplingError> {
    let mut scored: Vec<(&str, f64)> = candidates
        .iter()
        .filter_map(|(id, p)| p.map(|p| (id.as_str(), p)))
        .collect();
    if scored.is_empty() {
        return Err(SamplingError::NoProbabilities);
    }
    match mode {
        PreclassMode::TopPositive => {
            scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(b.0)));
        }
        PreclassMode::NearBoundary => {
            scored.retain(|(_, p)| (p - 0.5).abs() <= epsilon);
            scored.sort_by(|a, b| {
                (a.1 - 0.5)
                    .abs()
                    .partial_cmp(&(b.1 - 0.5).abs())
                    .unwrap_or(Ordering::Equal)
                    .then(a.0.cmp(b.0))
            });
        }
    }
    Ok(scored.into_iter().take(n).map(|(id, _)| String::from(id)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i:04}")).collect()
    }

    fn probs() -> Vec<(String, Option<f64>)> {
        vec![
            ("a".to_string(), Some(0.9)),
            ("b".to_string(), Some(0.51)),
            ("c".to_string(), Some(0.1)),
        ]
    }

    #[test]
    fn zero_draw_is_empty() {
        assert!(sample_random(&ids(10), 0, 1).unwrap().is_empty());
    }

    #[test]
    fn exhaustive_draw_returns_every_id() {
        let all = ids(5);
        let mut got = sample_random(&all, 5, 9).unwrap();
        got.sort();
        assert_eq!(got, all);
    }

    #[test]
    fn same_seed_same_draw() {
        let all = ids(1000);
        let a = sample_random(&all, 100, 42).unwrap();
        let b = sample_random(&all, 100, 42).unwrap();
        assert_eq!(a, b);
        let mut reversed = all.clone();
        reversed.reverse();
        assert_eq!(sample_random(&reversed, 100, 42).unwrap(), a);
    }

    #[test]
    fn too_many_requested() {
        assert_eq!(
            sample_random(&ids(3), 4, 0),
            Err(SamplingError::TooMany { requested: 4, available: 3 })
        );
    }

    #[test]
    fn near_boundary_picks_closest() {
        let got = sample_preclassified(&probs(), PreclassMode::NearBoundary, 1, 0.25).unwrap();
        assert_eq!(got, vec!["b".to_string()]);
    }

    #[test]
    fn top_positive_picks_largest() {
        let got = sample_preclassified(&probs(), PreclassMode::TopPositive, 1, 0.0).unwrap();
        assert_eq!(got, vec!["a".to_string()]);
    }

    #[test]
    fn empty_band() {
        let got = sample_preclassified(&probs(), PreclassMode::NearBoundary, 3, 0.0).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn no_probabilities() {
        let c = vec![("a".to_string(), None)];
        assert_eq!(
            sample_preclassified(&c, PreclassMode::TopPositive, 1, 0.1),
            Err(SamplingError::NoProbabilities)
        );
    }
}
