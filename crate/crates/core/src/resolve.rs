//! Gold-label resolution and class-stratified cross-validation folds.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::{binarize, Label, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("cannot resolve an empty label multiset")]
    NoLabels,
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("no records to split")]
    NoRecords,
    #[error("dev fraction {0} is outside [0, 1)")]
    DevFraction(String),
    #[error("record {0} appears twice")]
    DuplicateRecord(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Most frequent label, ties going to the highest tied label.
    MostFrequent,
    /// Highest label any annotator gave.
    Max,
}

/// How the binary target is derived under [`Strategy::MostFrequent`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BinaryRule {
    /// Binarize every annotation, then take the majority; ties go to 1.
    #[default]
    MajorityOfBinarized,
    /// Binarize the resolved five-class label.
    BinarizeResolved,
}

pub fn resolve_most_frequent(labels: &[Label]) -> Result<Label, ResolveError> {
    let mut counts = [0usize; NUM_CLASSES];
    for l in labels {
        counts[l.index()] += 1;
    }
    // max_by_key keeps the last maximum, i.e. the highest tied label
    counts
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c > 0)
        .max_by_key(|&(_, &c)| c)
        .map(|(i, _)| Label::ALL[i])
        .ok_or(ResolveError::NoLabels)
}

pub fn resolve_max(labels: &[Label]) -> Result<Label, ResolveError> {
    labels.iter().copied().max().ok_or(ResolveError::NoLabels)
}

pub fn binary_target(labels: &[Label], strategy: Strategy) -> Result<u8, ResolveError> {
    binary_target_with(labels, strategy, BinaryRule::default())
}

pub fn binary_target_with(labels: &[Label], strategy: Strategy, rule: BinaryRule) -> Result<u8, ResolveError> {
    if labels.is_empty() {
        return Err(ResolveError::NoLabels);
    }
    Ok(match (strategy, rule) {
        (Strategy::Max, _) => u8::from(labels.iter().any(|l| l.is_positive())),
        (Strategy::MostFrequent, BinaryRule::MajorityOfBinarized) => {
            let positive = labels.iter().filter(|l| l.is_positive()).count();
            u8::from(2 * positive >= labels.len())
        }
        (Strategy::MostFrequent, BinaryRule::BinarizeResolved) => binarize(resolve_most_frequent(labels)?),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub posting_id: String,
    pub gold_label: Label,
    pub gold_binary: u8,
    pub strategy: Strategy,
}

pub fn resolve_record(
    posting_id: &str,
    labels: &[Label],
    strategy: Strategy,
    rule: BinaryRule,
) -> Result<GoldRecord, ResolveError> {
    let gold_label = match strategy {
        Strategy::MostFrequent => resolve_most_frequent(labels)?,
        Strategy::Max => resolve_max(labels)?,
    };
    Ok(GoldRecord {
        posting_id: String::from(posting_id),
        gold_label,
        gold_binary: binary_target_with(labels, strategy, rule)?,
        strategy,
    })
}

/// Which target the folds are stratified on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StratifyOn {
    #[default]
    Label,
    Binary,
}

impl StratifyOn {
    fn class_of(self, r: &GoldRecord) -> u8 {
        match self {
            StratifyOn::Label => r.gold_label.value(),
            StratifyOn::Binary => r.gold_binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
}

/// Test-fold assignment plus, for every fold, the train/dev split of the
/// remaining records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub dev_frac: f64,
    pub seed: u64,
    pub stratify_on: StratifyOn,
    pub assignment: BTreeMap<String, usize>,
    /// `dev_assignment[i]` splits the training records of fold `i`.
    pub dev_assignment: Vec<BTreeMap<String, Split>>,
    pub warnings: Vec<String>,
}

impl FoldPlan {
    pub fn test_ids(&self, fold: usize) -> impl Iterator<Item = &str> {
        self.assignment
            .iter()
            .filter(move |&(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
    }

    pub fn split_ids(&self, fold: usize, split: Split) -> impl Iterator<Item = &str> {
        self.dev_assignment[fold]
            .iter()
            .filter(move |&(_, &s)| s == split)
            .map(|(id, _)| id.as_str())
    }
}

/// Deals records into `k` folds class by class.
///
/// Within each class the records are sorted by id, shuffled with the seed and
/// dealt round-robin, continuing the deal position across classes so fold
/// sizes stay balanced too. Each fold's training part is then split into
/// train and dev, taking `round(dev_frac * n_c)` records of every class.
pub fn stratified_folds(
    records: &[GoldRecord],
    k: usize,
    dev_frac: f64,
    seed: u64,
    stratify_on: StratifyOn,
) -> Result<FoldPlan, ResolveError> {
    if k < 2 {
        return Err(ResolveError::TooFewFolds(k));
    }
    if records.is_empty() {
        return Err(ResolveError::NoRecords);
    }
    if !(0.0..1.0).contains(&dev_frac) {
        return Err(ResolveError::DevFraction(format!("{dev_frac}")));
    }
    let mut by_class: BTreeMap<u8, Vec<&str>> = BTreeMap::new();
    let mut classes: BTreeMap<&str, u8> = BTreeMap::new();
    for r in records {
        let class = stratify_on.class_of(r);
        if classes.insert(&r.posting_id, class).is_some() {
            return Err(ResolveError::DuplicateRecord(r.posting_id.clone()));
        }
        by_class.entry(class).or_default().push(&r.posting_id);
    }

    let mut warnings = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = BTreeMap::new();
    let mut next = 0usize;
    for (class, ids) in by_class.iter_mut() {
        if ids.len() < k {
            warnings.push(format!(
                "class {class} has {} records, fewer than {k} folds; some folds lack it",
                ids.len()
            ));
        }
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        for id in ids.iter() {
            assignment.insert(String::from(*id), next % k);
            next += 1;
        }
    }

    let mut dev_assignment = Vec::with_capacity(k);
    for fold in 0..k {
        let mut fold_rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(fold as u64 + 1)));
        let mut split = BTreeMap::new();
        for ids in by_class.values() {
            let mut train: Vec<&str> = ids.iter().copied().filter(|id| assignment[*id] != fold).collect();
            train.sort_unstable();
            train.shuffle(&mut fold_rng);
            let n_dev = libm::round(dev_frac * train.len() as f64) as usize;
            for (i, id) in train.into_iter().enumerate() {
                let s = if i < n_dev { Split::Dev } else { Split::Train };
                split.insert(String::from(id), s);
            }
        }
        dev_assignment.push(split);
    }

    Ok(FoldPlan {
        k,
        dev_frac,
        seed,
        stratify_on,
        assignment,
        dev_assignment,
        warnings,
    })
}
