//! Corpus entities: postings, annotators and their annotations.

use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::Label;

/// Where a posting entered the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SourceTag {
    /// Reported by a reader with a sexism-related keyword in the reason.
    #[serde(rename = "S1_reported_sexism_keyword", alias = "s1")]
    ReportedSexismKeyword,
    /// Reported for some other reason.
    #[serde(rename = "S2_reported_other", alias = "s2")]
    ReportedOther,
    /// Uniform sample of all postings.
    #[serde(rename = "S3_random_sample", alias = "s3")]
    RandomSample,
    /// Subset of S2 scored by an earlier binary classifier.
    #[serde(rename = "S4_preclassified_from_S2", alias = "s4")]
    PreclassifiedFromReported,
    /// Postings from forums known to attract sexist comments, pre-scored.
    #[serde(rename = "S5_preclassified_hot_forums", alias = "s5")]
    PreclassifiedHotForums,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posting {
    pub id: String,
    pub forum_id: String,
    /// Stored verbatim.
    pub text: String,
    pub source_tag: SourceTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preclass_prob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PostingError {
    #[error("posting id is empty")]
    EmptyId,
    #[error("posting {0}: text is empty")]
    EmptyText(String),
    #[error("posting {id}: preclass_prob {value} is outside [0, 1]")]
    ProbabilityOutOfRange { id: String, value: f64 },
}

impl Posting {
    pub fn validate(&self) -> Result<(), PostingError> {
        if self.id.is_empty() {
            return Err(PostingError::EmptyId);
        }
        if self.text.trim().is_empty() {
            return Err(PostingError::EmptyText(self.id.clone()));
        }
        if let Some(p) = self.preclass_prob {
            if !(0.0..=1.0).contains(&p) {
                return Err(PostingError::ProbabilityOutOfRange {
                    id: self.id.clone(),
                    value: p,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorRole {
    Moderator,
    NlpExpert,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotator {
    pub id: String,
    pub display_name: String,
    pub role: AnnotatorRole,
    pub active: bool,
}

/// One label given by one annotator to one posting within a round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub posting_id: String,
    pub annotator_id: String,
    pub round_id: String,
    pub label: Label,
    /// Unix seconds.
    pub submitted_at: u64,
}
