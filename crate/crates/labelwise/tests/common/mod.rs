#![allow(dead_code)]

use std::collections::BTreeSet;

use labelwise::store::{RoundRequest, Store};
use labelwise_core::campaign::{Round, RoundKind};
use labelwise_core::corpus::{Annotator, AnnotatorRole, Posting, SourceTag};
use labelwise_core::flagging::ScoreRecord;
use tempfile::TempDir;

pub fn posting(id: &str, text: &str, prob: Option<f64>) -> Posting {
    Posting {
        id: id.to_string(),
        forum_id: "forum-1".to_string(),
        text: text.to_string(),
        source_tag: SourceTag::RandomSample,
        preclass_prob: prob,
    }
}

pub fn postings(n: usize) -> Vec<Posting> {
    (0..n).map(|i| posting(&format!("p{i:04}"), &format!("comment number {i}"), None)).collect()
}

pub fn annotator(id: &str, active: bool) -> Annotator {
    Annotator {
        id: id.to_string(),
        display_name: id.to_uppercase(),
        role: AnnotatorRole::Moderator,
        active,
    }
}

pub fn annotators(n: usize) -> Vec<Annotator> {
    (1..=n).map(|i| annotator(&format!("ann{i}"), true)).collect()
}

/// A fresh store holding `n_postings` postings and `n_annotators` active
/// annotators.
pub fn store_with(n_postings: usize, n_annotators: usize) -> (TempDir, Store) {
    let dir = TempDir::new().unwrap();
    let mut store = Store::init(dir.path().join("store")).unwrap();
    store.ingest_postings(postings(n_postings), true).unwrap();
    store.upsert_annotators(annotators(n_annotators)).unwrap();
    (dir, store)
}

pub fn ids(range: std::ops::Range<usize>) -> Vec<String> {
    range.map(|i| format!("p{i:04}")).collect()
}

pub fn calibration(store: &mut Store, posting_ids: Vec<String>) -> Round {
    store
        .create_round(RoundRequest::with_postings(RoundKind::Calibration, posting_ids))
        .unwrap()
}

pub fn regular(store: &mut Store, posting_ids: Vec<String>, k: usize, seed: u64) -> Round {
    store
        .create_round(RoundRequest {
            k,
            seed,
            ..RoundRequest::with_postings(RoundKind::Regular, posting_ids)
        })
        .unwrap()
}

pub fn assignees(round: &Round) -> BTreeSet<String> {
    round.assigned_annotator_ids.clone()
}

/// Six forums of 100 postings whose positive counts give the rates
/// 0.23, 0.17, 0.27, 0.01, 0.02 and 0.07.
pub fn six_forum_scores() -> Vec<ScoreRecord> {
    let forums = [("f1", 23), ("f2", 17), ("f3", 27), ("f4", 1), ("f5", 2), ("f6", 7)];
    let mut out = Vec::new();
    for (forum, positives) in forums {
        for i in 0..100 {
            out.push(ScoreRecord {
                posting_id: format!("{forum}-{i:03}"),
                forum_id: forum.to_string(),
                p_positive: if i < positives { 0.8 } else { 0.2 },
            });
        }
    }
    out
}
