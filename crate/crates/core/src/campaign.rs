//! Annotation rounds and the disagreement heuristic used to pick postings
//! for adjudication.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::Label;

/// Postings per round unless configured otherwise.
pub const DEFAULT_ROUND_SIZE: usize = 100;
/// Annotators per regular round unless configured otherwise.
pub const DEFAULT_ANNOTATORS_PER_ROUND: usize = 3;
/// Distance assigned to any absent-versus-present pair of labels.
pub const PRESENCE_DISTANCE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundKind {
    /// Shown to every active annotator to surface guideline misunderstandings.
    Calibration,
    Regular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundStatus {
    Open,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub id: String,
    pub kind: RoundKind,
    pub posting_ids: Vec<String>,
    pub assigned_annotator_ids: BTreeSet<String>,
    pub status: RoundStatus,
}

impl Round {
    pub fn is_assigned(&self, annotator_id: &str) -> bool {
        self.assigned_annotator_ids.contains(annotator_id)
    }

    pub fn contains_posting(&self, posting_id: &str) -> bool {
        self.posting_ids.iter().any(|p| p == posting_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoundError {
    #[error("round has no postings")]
    NoPostings,
    #[error("posting {0} appears twice in the round")]
    DuplicatePosting(String),
    #[error("posting {0} already belongs to a round")]
    AlreadyAssigned(String),
    #[error("no annotators given")]
    NoAnnotators,
    #[error("need {needed} annotators but only {available} are available")]
    NotEnoughAnnotators { needed: usize, available: usize },
}

fn check_postings(posting_ids: &[String], taken: &BTreeSet<String>) -> Result<(), RoundError> {
    if posting_ids.is_empty() {
        return Err(RoundError::NoPostings);
    }
    let mut seen = BTreeSet::new();
    for id in posting_ids {
        if taken.contains(id) {
            return Err(RoundError::AlreadyAssigned(id.clone()));
        }
        if !seen.insert(id) {
            return Err(RoundError::DuplicatePosting(id.clone()));
        }
    }
    Ok(())
}

/// Builds a calibration round that assigns every given annotator.
///
/// `taken` holds the postings that already belong to some round.
pub fn plan_calibration_round(
    id: String,
    posting_ids: Vec<String>,
    annotators: &BTreeSet<String>,
    taken: &BTreeSet<String>,
) -> Result<Round, RoundError> {
    check_postings(&posting_ids, taken)?;
    if annotators.is_empty() {
        return Err(RoundError::NoAnnotators);
    }
    Ok(Round {
        id,
        kind: RoundKind::Calibration,
        posting_ids,
        assigned_annotator_ids: annotators.clone(),
        status: RoundStatus::Open,
    })
}

/// Builds a regular round assigned to `k` annotators drawn uniformly without
/// replacement from `available`, deterministically for a given seed.
pub fn plan_round(
    id: String,
    posting_ids: Vec<String>,
    available: &BTreeSet<String>,
    k: usize,
    seed: u64,
    taken: &BTreeSet<String>,
) -> Result<Round, RoundError> {
    if available.len() < k {
        return Err(RoundError::NotEnoughAnnotators {
            needed: k,
            available: available.len(),
        });
    }
    if k == 0 {
        return Err(RoundError::NoAnnotators);
    }
    check_postings(&posting_ids, taken)?;
    let pool: Vec<&String> = available.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect();
    Ok(Round {
        id,
        kind: RoundKind::Regular,
        posting_ids,
        assigned_annotator_ids: chosen,
        status: RoundStatus::Open,
    })
}

/// Pairwise label distance: 4 between absence and any severity, otherwise the
/// absolute difference of severities.
pub fn label_distance(a: Label, b: Label) -> f64 {
    if a == b {
        0.0
    } else if a.is_positive() != b.is_positive() {
        PRESENCE_DISTANCE
    } else {
        (a.value() as f64 - b.value() as f64).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("a disagreement score needs at least 2 labels, got {0}")]
pub struct TooFewLabels(pub usize);

/// Mean of [`label_distance`] over all unordered pairs of labels.
pub fn disagreement_score(labels: &[Label]) -> Result<f64, TooFewLabels> {
    let m = labels.len();
    if m < 2 {
        return Err(TooFewLabels(m));
    }
    let mut total = 0.0;
    for (i, &a) in labels.iter().enumerate() {
        for &b in &labels[i + 1..] {
            total += label_distance(a, b);
        }
    }
    Ok(total / (m * (m - 1) / 2) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementRecord {
    pub posting_id: String,
    pub labels: Vec<Label>,
    pub score: f64,
}

/// Scores every posting with at least two labels and sorts by descending
/// score, ties by posting id. Postings with fewer labels are skipped.
pub fn rank_disagreements<'a, I>(postings: I) -> Vec<DisagreementRecord>
where
    I: IntoIterator<Item = (&'a str, Vec<Label>)>,
{
    let mut records: Vec<DisagreementRecord> = postings
        .into_iter()
        .filter_map(|(id, mut labels)| {
            let score = disagreement_score(&labels).ok()?;
            labels.sort();
            Some(DisagreementRecord {
                posting_id: String::from(id),
                labels,
                score,
            })
        })
        .collect();
    records.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.posting_id.cmp(&b.posting_id))
    });
    records
}
