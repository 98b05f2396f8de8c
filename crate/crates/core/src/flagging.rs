//! Per-forum misogyny rates from per-posting classifier scores.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Posting-level decision threshold on `p_positive`.
pub const DEFAULT_TAU_POST: f64 = 0.5;
/// Forum-level flag threshold on the positive rate.
pub const DEFAULT_TAU_FORUM: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub posting_id: String,
    pub forum_id: String,
    pub p_positive: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("posting {posting_id}: p_positive {value} is outside [0, 1]")]
    OutOfRange { posting_id: String, value: f64 },
    #[error("score record has an empty posting or forum id")]
    EmptyId,
}

impl ScoreRecord {
    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.posting_id.is_empty() || self.forum_id.is_empty() {
            return Err(ScoreError::EmptyId);
        }
        if !(0.0..=1.0).contains(&self.p_positive) {
            return Err(ScoreError::OutOfRange {
                posting_id: self.posting_id.clone(),
                value: self.p_positive,
            });
        }
        Ok(())
    }
}

/// Scores keyed by posting id; later records replace earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreBook {
    scores: BTreeMap<String, ScoreRecord>,
}

impl ScoreBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates every record first, then upserts them all. Returns the
    /// number of records ingested.
    pub fn ingest<I: IntoIterator<Item = ScoreRecord>>(&mut self, records: I) -> Result<usize, ScoreError> {
        let records: Vec<ScoreRecord> = records.into_iter().collect();
        for r in &records {
            r.validate()?;
        }
        let n = records.len();
        for r in records {
            self.scores.insert(r.posting_id.clone(), r);
        }
        Ok(n)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, posting_id: &str) -> Option<&ScoreRecord> {
        self.scores.get(posting_id)
    }

    pub fn records(&self) -> impl Iterator<Item = &ScoreRecord> {
        self.scores.values()
    }

    pub fn forum_rates(&self, tau_post: f64) -> Vec<ForumRate> {
        forum_rates(self.records(), tau_post)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForumRate {
    pub forum_id: String,
    pub n_postings: usize,
    pub n_positive: usize,
    pub rate: f64,
}

/// Fraction of each forum's postings with `p_positive >= tau_post`, in forum
/// id order.
pub fn forum_rates<'a, I>(records: I, tau_post: f64) -> Vec<ForumRate>
where
    I: IntoIterator<Item = &'a ScoreRecord>,
{
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in records {
        let entry = counts.entry(&r.forum_id).or_default();
        entry.0 += 1;
        if r.p_positive >= tau_post {
            entry.1 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(forum, (n, positive))| ForumRate {
            forum_id: String::from(forum),
            n_postings: n,
            n_positive: positive,
            rate: positive as f64 / n as f64,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForumReport {
    pub forum_id: String,
    pub n_postings: usize,
    pub positive_rate: f64,
    pub flagged: bool,
    pub tau_post: f64,
    pub tau_forum: f64,
}

/// Flags every forum whose rate reaches `tau_forum`, highest rate first and
/// ties by forum id.
pub fn flag_forums(rates: &[ForumRate], tau_post: f64, tau_forum: f64) -> Vec<ForumReport> {
    let mut reports: Vec<ForumReport> = rates
        .iter()
        .map(|r| ForumReport {
            forum_id: r.forum_id.clone(),
            n_postings: r.n_postings,
            positive_rate: r.rate,
            flagged: r.rate >= tau_forum,
            tau_post,
            tau_forum,
        })
        .collect();
    reports.sort_by(|a, b| {
        b.positive_rate
            .total_cmp(&a.positive_rate)
            .then_with(|| a.forum_id.cmp(&b.forum_id))
    });
    reports
}
