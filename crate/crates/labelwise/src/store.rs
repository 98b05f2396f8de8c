//! Single-directory file store.
//!
//! Each entity lives in its own JSON-lines table next to a `meta.json` that
//! records the schema version. Every mutation is validated in full, applied to
//! a copy of the current state, written with an atomic rename and only then
//! published, so readers holding a [`Snapshot`] never observe partial updates.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use labelwise_core::agreement::{agreement_report, AgreementReport, AnnotationMatrix, LabelDistribution};
use labelwise_core::campaign::{
    plan_calibration_round, plan_round, rank_disagreements, DisagreementRecord, Round, RoundKind, RoundStatus,
    DEFAULT_ANNOTATORS_PER_ROUND,
};
use labelwise_core::corpus::{Annotation, Annotator, Posting};
use labelwise_core::flagging::{flag_forums, ForumReport, ScoreBook, ScoreRecord};
use labelwise_core::resolve::{resolve_record, BinaryRule, GoldRecord, Strategy};
use labelwise_core::sampling::{self, PreclassMode, DEFAULT_BOUNDARY_EPSILON};
use labelwise_core::Label;
use serde::{Deserialize, Serialize};

use crate::batch::BatchRow;
use crate::error::{Error, Result};
use crate::files::{read_json, read_jsonl_or_empty, to_jsonl, write_atomic, write_json_pretty};
use crate::SCHEMA_VERSION;

pub const META_FILE: &str = "meta.json";
pub const POSTINGS_FILE: &str = "postings.jsonl";
pub const ANNOTATORS_FILE: &str = "annotators.jsonl";
pub const ROUNDS_FILE: &str = "rounds.jsonl";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const SCORES_FILE: &str = "scores.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub schema_version: u32,
}

/// An immutable view of the whole store.
pub type Snapshot = Arc<State>;

#[derive(Debug, Clone, Default)]
pub struct State {
    postings: BTreeMap<String, Posting>,
    annotators: BTreeMap<String, Annotator>,
    rounds: Vec<Round>,
    annotations: BTreeMap<(String, String), Annotation>,
    scores: ScoreBook,
    round_of: BTreeMap<String, usize>,
}

/// How a new round picks its postings when they are not listed explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub mode: SamplerMode,
    pub n: usize,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    Random,
    TopPositive,
    NearBoundary,
}

fn default_kind() -> RoundKind {
    RoundKind::Regular
}

fn default_k() -> usize {
    DEFAULT_ANNOTATORS_PER_ROUND
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRequest {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default = "default_kind")]
    pub kind: RoundKind,
    #[serde(default)]
    pub posting_ids: Option<Vec<String>>,
    #[serde(default)]
    pub sampler: Option<SamplerSpec>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

impl RoundRequest {
    pub fn with_postings(kind: RoundKind, posting_ids: Vec<String>) -> Self {
        RoundRequest {
            id: None,
            kind,
            posting_ids: Some(posting_ids),
            sampler: None,
            k: DEFAULT_ANNOTATORS_PER_ROUND,
            seed: 0,
        }
    }
}

/// One open posting waiting for an annotator's label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub round_id: String,
    pub posting_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentList {
    pub annotator_id: String,
    pub open: Vec<Assignment>,
    /// Postings already labeled by the annotator in open rounds.
    pub done: usize,
    /// All postings assigned to the annotator in open rounds.
    pub total: usize,
}

/// Campaign overview derived purely from store state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSnapshot {
    pub n_postings: usize,
    pub n_rounds: usize,
    pub n_annotations: usize,
    pub agreement: AgreementReport,
    pub label_distribution: Option<LabelDistribution>,
    pub open_assignments: BTreeMap<String, usize>,
}

impl State {
    pub fn postings(&self) -> impl Iterator<Item = &Posting> {
        self.postings.values()
    }

    pub fn posting(&self, id: &str) -> Option<&Posting> {
        self.postings.get(id)
    }

    pub fn annotators(&self) -> impl Iterator<Item = &Annotator> {
        self.annotators.values()
    }

    pub fn annotator(&self, id: &str) -> Option<&Annotator> {
        self.annotators.get(id)
    }

    pub fn active_annotators(&self) -> BTreeSet<String> {
        self.annotators.values().filter(|a| a.active).map(|a| a.id.clone()).collect()
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn round(&self, id: &str) -> Option<&Round> {
        self.rounds.iter().find(|r| r.id == id)
    }

    pub fn round_of_posting(&self, posting_id: &str) -> Option<&Round> {
        self.round_of.get(posting_id).map(|&i| &self.rounds[i])
    }

    pub fn annotations(&self) -> impl Iterator<Item = &Annotation> {
        self.annotations.values()
    }

    pub fn annotation(&self, posting_id: &str, annotator_id: &str) -> Option<&Annotation> {
        self.annotations.get(&(posting_id.to_string(), annotator_id.to_string()))
    }

    pub fn scores(&self) -> &ScoreBook {
        &self.scores
    }

    fn require_round(&self, id: &str) -> Result<&Round> {
        self.round(id).ok_or_else(|| Error::Unknown {
            kind: "round",
            id: id.to_string(),
        })
    }

    fn require_annotator(&self, id: &str) -> Result<&Annotator> {
        self.annotator(id).ok_or_else(|| Error::Unknown {
            kind: "annotator",
            id: id.to_string(),
        })
    }

    fn is_annotated(&self, posting_id: &str) -> bool {
        self.annotations
            .range((posting_id.to_string(), String::new())..)
            .next()
            .is_some_and(|((p, _), _)| p == posting_id)
    }

    /// Postings that belong to no round and carry no annotation, by id.
    pub fn unassigned_posting_ids(&self) -> Vec<String> {
        self.postings
            .keys()
            .filter(|id| !self.round_of.contains_key(*id) && !self.is_annotated(id))
            .cloned()
            .collect()
    }

    pub fn sample_random(&self, n: usize, seed: u64) -> Result<Vec<String>> {
        Ok(sampling::sample_random(&self.unassigned_posting_ids(), n, seed)?)
    }

    pub fn sample_preclassified(&self, mode: PreclassMode, n: usize, epsilon: f64) -> Result<Vec<String>> {
        let candidates: Vec<(String, Option<f64>)> = self
            .unassigned_posting_ids()
            .into_iter()
            .map(|id| {
                let p = self.postings[&id].preclass_prob;
                (id, p)
            })
            .collect();
        Ok(sampling::sample_preclassified(&candidates, mode, n, epsilon)?)
    }

    pub fn sample(&self, spec: &SamplerSpec, seed: u64) -> Result<Vec<String>> {
        let epsilon = spec.epsilon.unwrap_or(DEFAULT_BOUNDARY_EPSILON);
        match spec.mode {
            SamplerMode::Random => self.sample_random(spec.n, seed),
            SamplerMode::TopPositive => self.sample_preclassified(PreclassMode::TopPositive, spec.n, epsilon),
            SamplerMode::NearBoundary => self.sample_preclassified(PreclassMode::NearBoundary, spec.n, epsilon),
        }
    }

    /// All annotations, or only those of one round.
    pub fn annotation_matrix(&self, round_id: Option<&str>) -> Result<AnnotationMatrix> {
        let round = round_id.map(|id| self.require_round(id)).transpose()?;
        let mut matrix = AnnotationMatrix::new();
        for a in self.annotations.values() {
            if round.is_none_or(|r| r.id == a.round_id) {
                matrix.insert(&a.posting_id, &a.annotator_id, a.label);
            }
        }
        Ok(matrix)
    }

    fn labels_by_posting(&self) -> BTreeMap<&str, Vec<Label>> {
        let mut by_posting: BTreeMap<&str, Vec<Label>> = BTreeMap::new();
        for a in self.annotations.values() {
            by_posting.entry(&a.posting_id).or_default().push(a.label);
        }
        by_posting
    }

    pub fn disagreements(&self, round_id: &str) -> Result<Vec<DisagreementRecord>> {
        let round = self.require_round(round_id)?;
        let by_posting = self.labels_by_posting();
        Ok(rank_disagreements(round.posting_ids.iter().map(|p| {
            let labels = by_posting.get(p.as_str()).cloned().unwrap_or_default();
            (p.as_str(), labels)
        })))
    }

    pub fn assignments(&self, annotator_id: &str) -> Result<AssignmentList> {
        self.require_annotator(annotator_id)?;
        let mut list = AssignmentList {
            annotator_id: annotator_id.to_string(),
            open: Vec::new(),
            done: 0,
            total: 0,
        };
        for round in &self.rounds {
            if round.status != RoundStatus::Open || !round.is_assigned(annotator_id) {
                continue;
            }
            for p in &round.posting_ids {
                list.total += 1;
                if self.annotation(p, annotator_id).is_some() {
                    list.done += 1;
                } else if let Some(posting) = self.postings.get(p) {
                    list.open.push(Assignment {
                        round_id: round.id.clone(),
                        posting_id: p.clone(),
                        text: posting.text.clone(),
                    });
                }
            }
        }
        Ok(list)
    }

    /// Gold records for every annotated posting, in posting id order.
    pub fn resolve(&self, strategy: Strategy, rule: BinaryRule) -> Result<Vec<GoldRecord>> {
        self.labels_by_posting()
            .into_iter()
            .map(|(id, labels)| Ok(resolve_record(id, &labels, strategy, rule)?))
            .collect()
    }

    pub fn flag_report(&self, tau_post: f64, tau_forum: f64) -> Vec<ForumReport> {
        flag_forums(&self.scores.forum_rates(tau_post), tau_post, tau_forum)
    }

    pub fn campaign_snapshot(&self) -> CampaignSnapshot {
        let matrix = self.annotation_matrix(None).expect("no round filter");
        let agreement = agreement_report(&matrix);
        let mut open_assignments = BTreeMap::new();
        for annotator in self.annotators.keys() {
            let list = self.assignments(annotator).expect("annotator exists");
            open_assignments.insert(annotator.clone(), list.open.len());
        }
        CampaignSnapshot {
            n_postings: self.postings.len(),
            n_rounds: self.rounds.len(),
            n_annotations: self.annotations.len(),
            label_distribution: agreement.label_distribution.clone(),
            agreement,
            open_assignments,
        }
    }

    /// Referential-integrity problems, one message each. Empty when sound.
    pub fn audit(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        for round in &self.rounds {
            for p in &round.posting_ids {
                if !self.postings.contains_key(p) {
                    problems.push(format!("round {} references unknown posting {p}", round.id));
                }
                if let Some(first) = owner.insert(p, &round.id) {
                    problems.push(format!("posting {p} belongs to rounds {first} and {}", round.id));
                }
            }
            for a in &round.assigned_annotator_ids {
                if !self.annotators.contains_key(a) {
                    problems.push(format!("round {} assigns unknown annotator {a}", round.id));
                }
            }
        }
        for a in self.annotations.values() {
            let what = format!("annotation ({}, {})", a.posting_id, a.annotator_id);
            if !self.postings.contains_key(&a.posting_id) {
                problems.push(format!("{what} references unknown posting"));
            }
            if !self.annotators.contains_key(&a.annotator_id) {
                problems.push(format!("{what} references unknown annotator"));
            }
            match self.round(&a.round_id) {
                None => problems.push(format!("{what} references unknown round {}", a.round_id)),
                Some(r) => {
                    if !r.contains_posting(&a.posting_id) {
                        problems.push(format!("{what}: posting is not in round {}", r.id));
                    }
                    if !r.is_assigned(&a.annotator_id) {
                        problems.push(format!("{what}: annotator is not assigned to round {}", r.id));
                    }
                }
            }
        }
        problems
    }

    fn reindex(&mut self) {
        self.round_of.clear();
        for (i, round) in self.rounds.iter().enumerate() {
            for p in &round.posting_ids {
                self.round_of.entry(p.clone()).or_insert(i);
            }
        }
        for i in 0..self.rounds.len() {
            self.refresh_status(i);
        }
    }

    /// A round is complete once every assignee has labeled every posting.
    fn refresh_status(&mut self, index: usize) {
        let round = &self.rounds[index];
        let complete = round
            .posting_ids
            .iter()
            .all(|p| round.assigned_annotator_ids.iter().all(|a| self.annotation(p, a).is_some()));
        self.rounds[index].status = if complete {
            RoundStatus::Complete
        } else {
            RoundStatus::Open
        };
    }

    fn next_round_id(&self) -> String {
        (self.rounds.len() + 1..)
            .map(|i| format!("round-{i:03}"))
            .find(|id| self.round(id).is_none())
            .expect("unbounded search")
    }

    /// Finds the round and checks the annotator may label `posting_id`.
    fn assignment_of(&self, posting_id: &str, annotator_id: &str) -> Result<&Round> {
        let round = self.round_of_posting(posting_id).ok_or_else(|| Error::NotAssigned {
            annotator: annotator_id.to_string(),
            what: format!("posting {posting_id}, which is in no round"),
        })?;
        if !round.is_assigned(annotator_id) {
            return Err(Error::NotAssigned {
                annotator: annotator_id.to_string(),
                what: format!("round {}", round.id),
            });
        }
        Ok(round)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Table {
    Postings,
    Annotators,
    Rounds,
    Annotations,
    Scores,
}

/// The single writer over a store directory.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    state: Snapshot,
}

impl Store {
    /// Creates the directory and `meta.json` when missing, then opens it.
    pub fn init(dir: impl AsRef<Path>) -> Result<Store> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = dir.join(META_FILE);
        if !meta.exists() {
            write_json_pretty(
                &meta,
                &Meta {
                    schema_version: SCHEMA_VERSION,
                },
            )?;
        }
        Store::open(dir)
    }

    pub fn open(dir: impl AsRef<Path>) -> Result<Store> {
        let dir = dir.as_ref().to_path_buf();
        let meta: Meta = read_json(&dir.join(META_FILE))?;
        if meta.schema_version > SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: meta.schema_version,
                supported: SCHEMA_VERSION,
            });
        }
        let mut state = State::default();
        for p in read_jsonl_or_empty::<Posting>(&dir.join(POSTINGS_FILE))? {
            state.postings.insert(p.id.clone(), p);
        }
        for a in read_jsonl_or_empty::<Annotator>(&dir.join(ANNOTATORS_FILE))? {
            state.annotators.insert(a.id.clone(), a);
        }
        state.rounds = read_jsonl_or_empty(&dir.join(ROUNDS_FILE))?;
        for a in read_jsonl_or_empty::<Annotation>(&dir.join(ANNOTATIONS_FILE))? {
            state.annotations.insert((a.posting_id.clone(), a.annotator_id.clone()), a);
        }
        state.scores.ingest(read_jsonl_or_empty::<ScoreRecord>(&dir.join(SCORES_FILE))?)?;
        state.reindex();
        Ok(Store {
            dir,
            state: Arc::new(state),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    /// A consistent view that stays valid while the store keeps changing.
    pub fn snapshot(&self) -> Snapshot {
        Arc::clone(&self.state)
    }

    fn commit(&mut self, next: State, tables: &[Table]) -> Result<()> {
        for table in tables {
            let (file, bytes) = match table {
                Table::Postings => (POSTINGS_FILE, to_jsonl(next.postings.values())),
                Table::Annotators => (ANNOTATORS_FILE, to_jsonl(next.annotators.values())),
                Table::Rounds => (ROUNDS_FILE, to_jsonl(&next.rounds)),
                Table::Annotations => (ANNOTATIONS_FILE, to_jsonl(next.annotations.values())),
                Table::Scores => (SCORES_FILE, to_jsonl(next.scores.records())),
            };
            write_atomic(&self.dir.join(file), &bytes)?;
        }
        self.state = Arc::new(next);
        Ok(())
    }

    /// Adds postings. With `dedupe`, ids already present (in the store or
    /// earlier in `records`) are skipped; without it they are an error and
    /// nothing is ingested. Returns the number of postings added.
    pub fn ingest_postings(&mut self, records: Vec<Posting>, dedupe: bool) -> Result<usize> {
        let mut next = (*self.state).clone();
        let mut added = 0;
        for posting in records {
            posting.validate()?;
            if next.postings.contains_key(&posting.id) {
                if dedupe {
                    continue;
                }
                return Err(Error::Duplicate {
                    kind: "posting",
                    id: posting.id,
                });
            }
            next.postings.insert(posting.id.clone(), posting);
            added += 1;
        }
        if added > 0 {
            self.commit(next, &[Table::Postings])?;
        }
        Ok(added)
    }

    /// Inserts or replaces annotators by id.
    pub fn upsert_annotators(&mut self, annotators: Vec<Annotator>) -> Result<usize> {
        let mut next = (*self.state).clone();
        for a in &annotators {
            if a.id.is_empty() {
                return Err(Error::Invalid("annotator id is empty".into()));
            }
        }
        let n = annotators.len();
        for a in annotators {
            next.annotators.insert(a.id.clone(), a);
        }
        self.commit(next, &[Table::Annotators])?;
        Ok(n)
    }

    /// Creates a round from explicit postings or a sampler, assigning the
    /// currently active annotators. Repeating a request whose `id` already
    /// exists returns the existing round when kind and postings agree.
    pub fn create_round(&mut self, request: RoundRequest) -> Result<Round> {
        let state = &*self.state;
        if let Some(existing) = request.id.as_deref().and_then(|id| state.round(id)) {
            let same_postings = request.posting_ids.as_ref().is_none_or(|p| *p == existing.posting_ids);
            if existing.kind == request.kind && same_postings {
                return Ok(existing.clone());
            }
            return Err(Error::Duplicate {
                kind: "round",
                id: existing.id.clone(),
            });
        }
        let posting_ids = match (&request.posting_ids, &request.sampler) {
            (Some(ids), None) => ids.clone(),
            (None, Some(spec)) => state.sample(spec, request.seed)?,
            _ => return Err(Error::Invalid("give exactly one of posting_ids or sampler".into())),
        };
        for p in &posting_ids {
            if state.posting(p).is_none() {
                return Err(Error::Unknown {
                    kind: "posting",
                    id: p.clone(),
                });
            }
        }
        let taken: BTreeSet<String> = state.round_of.keys().cloned().collect();
        let active = state.active_annotators();
        let id = request.id.clone().unwrap_or_else(|| state.next_round_id());
        let round = match request.kind {
            RoundKind::Calibration => plan_calibration_round(id, posting_ids, &active, &taken)?,
            RoundKind::Regular => plan_round(id, posting_ids, &active, request.k, request.seed, &taken)?,
        };
        let mut next = state.clone();
        next.rounds.push(round.clone());
        next.reindex();
        self.commit(next, &[Table::Rounds])?;
        Ok(self.state.rounds.last().expect("just pushed").clone())
    }

    /// Stores one label. Resubmitting the stored label changes nothing and
    /// returns the stored record; a different label replaces it.
    pub fn submit_annotation(
        &mut self,
        posting_id: &str,
        annotator_id: &str,
        label: Label,
        now: u64,
    ) -> Result<Annotation> {
        let state = &*self.state;
        if state.posting(posting_id).is_none() {
            return Err(Error::Unknown {
                kind: "posting",
                id: posting_id.to_string(),
            });
        }
        state.require_annotator(annotator_id)?;
        let round = state.assignment_of(posting_id, annotator_id)?;
        if let Some(existing) = state.annotation(posting_id, annotator_id) {
            if existing.label == label {
                return Ok(existing.clone());
            }
        }
        let annotation = Annotation {
            posting_id: posting_id.to_string(),
            annotator_id: annotator_id.to_string(),
            round_id: round.id.clone(),
            label,
            submitted_at: now,
        };
        let mut next = state.clone();
        next.annotations
            .insert((posting_id.to_string(), annotator_id.to_string()), annotation.clone());
        next.reindex();
        self.commit(next, &[Table::Annotations, Table::Rounds])?;
        Ok(annotation)
    }

    /// Applies a filled-in batch file. Every row is checked before anything
    /// is stored; all problems are reported together with their row numbers.
    /// Returns the stored annotation for each row, in file order.
    pub fn import_batch(
        &mut self,
        round_id: &str,
        annotator_id: &str,
        rows: &[BatchRow],
        now: u64,
    ) -> Result<Vec<Annotation>> {
        let state = &*self.state;
        state.require_annotator(annotator_id)?;
        let round = state.require_round(round_id)?;
        if !round.is_assigned(annotator_id) {
            return Err(Error::NotAssigned {
                annotator: annotator_id.to_string(),
                what: format!("round {round_id}"),
            });
        }
        let mut problems = Vec::new();
        let mut seen = BTreeSet::new();
        let mut parsed = Vec::with_capacity(rows.len());
        for row in rows {
            let at = format!("row {}", row.row);
            if !round.contains_posting(&row.posting_id) {
                let why = if state.posting(&row.posting_id).is_none() {
                    "unknown posting id"
                } else {
                    "posting is not in this round"
                };
                problems.push(format!("{at}: {why} {}", row.posting_id));
                continue;
            }
            if !seen.insert(row.posting_id.as_str()) {
                problems.push(format!("{at}: posting {} appears twice", row.posting_id));
                continue;
            }
            match parse_label(&row.label) {
                Ok(label) => parsed.push((row.posting_id.as_str(), label)),
                Err(why) => problems.push(format!("{at}: {why}")),
            }
        }
        if !problems.is_empty() {
            return Err(Error::Rows {
                file: format!("batch for {round_id}/{annotator_id}"),
                problems,
            });
        }
        let mut next = state.clone();
        let mut changed = false;
        let mut out = Vec::with_capacity(parsed.len());
        for (posting_id, label) in parsed {
            let key = (posting_id.to_string(), annotator_id.to_string());
            match next.annotations.get(&key) {
                Some(existing) if existing.label == label => out.push(existing.clone()),
                _ => {
                    let a = Annotation {
                        posting_id: posting_id.to_string(),
                        annotator_id: annotator_id.to_string(),
                        round_id: round_id.to_string(),
                        label,
                        submitted_at: now,
                    };
                    next.annotations.insert(key, a.clone());
                    out.push(a);
                    changed = true;
                }
            }
        }
        if changed {
            next.reindex();
            self.commit(next, &[Table::Annotations, Table::Rounds])?;
        }
        Ok(out)
    }

    /// Upserts classifier scores by posting id.
    pub fn ingest_scores(&mut self, records: Vec<ScoreRecord>) -> Result<usize> {
        let mut next = (*self.state).clone();
        let n = next.scores.ingest(records)?;
        self.commit(next, &[Table::Scores])?;
        Ok(n)
    }
}

fn parse_label(cell: &str) -> std::result::Result<Label, String> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Err("missing label".into());
    }
    let value: i64 = cell
        .parse()
        .map_err(|_| format!("label {cell:?} is not an integer in 0..=4"))?;
    Label::new(value).map_err(|e| e.to_string())
}

/// Seconds since the Unix epoch.
pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
