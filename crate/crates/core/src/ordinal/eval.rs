use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::head::{Example, HeadKind, Model, ModelError, ModelKind};
use super::train::{TrainConfig, TrainError, Trainer};
use crate::resolve::{FoldPlan, Split};

pub fn accuracy(gold: &[u8], pred: &[u8]) -> f64 {
    let correct = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    correct as f64 / gold.len() as f64
}

/// Unweighted mean of per-class F1 over the classes present in `gold`.
pub fn f1_macro(gold: &[u8], pred: &[u8]) -> f64 {
    let classes: BTreeSet<u8> = gold.iter().copied().collect();
    let per_class: Vec<f64> = classes
        .iter()
        .map(|&c| {
            let mut tp = 0usize;
            let mut fp = 0usize;
            let mut fn_ = 0usize;
            for (&g, &p) in gold.iter().zip(pred) {
                match (g == c, p == c) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fn_ += 1,
                    _ => {}
                }
            }
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        })
        .collect();
    per_class.iter().sum::<f64>() / per_class.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadScore {
    pub head: HeadKind,
    pub accuracy: f64,
    pub f1_macro: f64,
}

/// Accuracy and macro F1 of every head of `model` on `data`: the binary head
/// against the binary targets, the ordinal head against the five-class labels.
pub fn evaluate(model: &Model, data: &[Example]) -> Result<Vec<HeadScore>, ModelError> {
    let mut scores = Vec::new();
    if model.binary.is_some() {
        let gold: Vec<u8> = data.iter().map(|e| e.binary).collect();
        let mut pred = Vec::with_capacity(data.len());
        for e in data {
            pred.push(model.predict_binary(&e.features)?.unwrap_or(0));
        }
        scores.push(HeadScore {
            head: HeadKind::Binary,
            accuracy: accuracy(&gold, &pred),
            f1_macro: f1_macro(&gold, &pred),
        });
    }
    if let Some(head) = &model.ordinal {
        let gold: Vec<u8> = data.iter().map(|e| e.label.value()).collect();
        let mut pred = Vec::with_capacity(data.len());
        for e in data {
            pred.push(model.predict_label(&e.features)?.map_or(0, |l| l.value()));
        }
        scores.push(HeadScore {
            head: head.kind,
            accuracy: accuracy(&gold, &pred),
            f1_macro: f1_macro(&gold, &pred),
        });
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CvError {
    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: TrainError },
    #[error("fold {fold}: {source}")]
    Evaluation { fold: usize, source: ModelError },
    #[error("fold {fold} has no test records")]
    EmptyFold { fold: usize },
    #[error("fold plan references {0}, which has no features")]
    MissingExample(String),
    #[error("example {0} is not covered by the fold plan")]
    NotInPlan(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    /// Epoch (0-based) whose weights were kept, chosen by dev macro F1.
    pub best_epoch: Option<usize>,
    pub dev_f1: Option<f64>,
    pub history: Vec<f64>,
    pub scores: Vec<HeadScore>,
}

/// Trains on fold `fold`'s training part and tests on the fold.
///
/// After every epoch the dev split is scored by the mean macro F1 of the
/// model's heads; the best epoch wins, ties going to the earlier one. Without
/// dev records the last epoch is used.
pub fn run_fold(
    data: &[Example],
    kind: ModelKind,
    config: &TrainConfig,
    plan: &FoldPlan,
    fold: usize,
) -> Result<FoldResult, CvError> {
    let by_id: BTreeMap<&str, &Example> = data.iter().map(|e| (e.id.as_str(), e)).collect();
    for e in data {
        if !plan.assignment.contains_key(&e.id) {
            return Err(CvError::NotInPlan(e.id.clone()));
        }
    }
    let collect = |ids: &mut dyn Iterator<Item = &str>| -> Result<Vec<Example>, CvError> {
        ids.map(|id| {
            by_id
                .get(id)
                .map(|e| (*e).clone())
                .ok_or_else(|| CvError::MissingExample(String::from(id)))
        })
        .collect()
    };
    let test = collect(&mut plan.test_ids(fold))?;
    let train = collect(&mut plan.split_ids(fold, Split::Train))?;
    let dev = collect(&mut plan.split_ids(fold, Split::Dev))?;
    if test.is_empty() {
        return Err(CvError::EmptyFold { fold });
    }

    let fold_config = TrainConfig {
        seed: config.seed.wrapping_add(fold as u64),
        ..config.clone()
    };
    let fold_err = |source| CvError::Fold { fold, source };
    let eval_err = |source| CvError::Evaluation { fold, source };
    let mut trainer = Trainer::new(kind, fold_config, &train).map_err(fold_err)?;
    let mut best: Option<(f64, usize, Model)> = None;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        history.push(trainer.run_epoch(&train).map_err(fold_err)?);
        if dev.is_empty() {
            continue;
        }
        let scores = evaluate(trainer.model(), &dev).map_err(eval_err)?;
        let f1 = scores.iter().map(|s| s.f1_macro).sum::<f64>() / scores.len() as f64;
        if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
            best = Some((f1, epoch, trainer.model().clone()));
        }
    }
    let (dev_f1, best_epoch, model) = match best {
        Some((f1, epoch, model)) => (Some(f1), Some(epoch), model),
        None => {
            let last = config.epochs.checked_sub(1);
            (None, last, trainer.into_model())
        }
    };
    Ok(FoldResult {
        fold,
        best_epoch,
        dev_f1,
        history,
        scores: evaluate(&model, &test).map_err(eval_err)?,
    })
}

/// Mean and sample standard deviation of one head across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub head: HeadKind,
    /// 1 for the first head of the model, 2 for the second.
    pub head_index: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub f1_macro_mean: f64,
    pub f1_macro_std: f64,
    pub fold_accuracy: Vec<f64>,
    pub fold_f1_macro: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub model: ModelKind,
    pub rows: Vec<EvalResult>,
    pub folds: Vec<FoldResult>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

pub fn summarize(kind: ModelKind, folds: Vec<FoldResult>) -> CvReport {
    let heads = folds.first().map_or(0, |f| f.scores.len());
    let rows = (0..heads)
        .map(|h| {
            let acc: Vec<f64> = folds.iter().map(|f| f.scores[h].accuracy).collect();
            let f1: Vec<f64> = folds.iter().map(|f| f.scores[h].f1_macro).collect();
            let (accuracy_mean, accuracy_std) = mean_std(&acc);
            let (f1_macro_mean, f1_macro_std) = mean_std(&f1);
            EvalResult {
                head: folds[0].scores[h].head,
                head_index: h + 1,
                accuracy_mean,
                accuracy_std,
                f1_macro_mean,
                f1_macro_std,
                fold_accuracy: acc,
                fold_f1_macro: f1,
            }
        })
        .collect();
    CvReport {
        model: kind,
        rows,
        folds,
    }
}

/// Runs every fold of `plan` in order and summarizes them.
pub fn cross_validate(
    data: &[Example],
    kind: ModelKind,
    config: &TrainConfig,
    plan: &FoldPlan,
) -> Result<CvReport, CvError> {
    let folds = (0..plan.k)
        .map(|fold| run_fold(data, kind, config, plan, fold))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(kind, folds))
}
