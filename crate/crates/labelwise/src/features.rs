//! Feature vectors from an external encoder, or synthetic stand-ins.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use labelwise_core::ordinal::{synthetic_binary, synthetic_ordinal, Example};
use labelwise_core::resolve::{GoldRecord, Strategy};
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub dim: usize,
    pub rows: BTreeMap<String, Vec<f64>>,
}

#[derive(Deserialize)]
struct FeatureLine {
    posting_id: String,
    features: Vec<f64>,
}

/// Reads JSON-lines (`{"posting_id": .., "features": [..]}`) when the
/// extension is `.jsonl` or `.json`, otherwise TSV rows of
/// `posting_id<TAB>f1<TAB>f2...` with an optional header line starting with
/// `posting_id`. All vectors must share one non-zero dimension.
pub fn read_features(path: &Path) -> Result<FeatureTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let jsonl = matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "json"));
    parse_features(&text, jsonl, &path.display().to_string())
}

pub fn parse_features(text: &str, jsonl: bool, name: &str) -> Result<FeatureTable> {
    let mut rows = BTreeMap::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let at = format!("line {}", i + 1);
        if line.trim().is_empty() {
            continue;
        }
        let (id, features) = if jsonl {
            let l: FeatureLine = serde_json::from_str(line).map_err(|e| Error::record(name, &at, e))?;
            (l.posting_id, l.features)
        } else {
            let mut cells = line.split('\t');
            let id = cells.next().unwrap_or_default().to_string();
            if i == 0 && id == "posting_id" {
                continue;
            }
            let features = cells
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::record(name, &at, e))?;
            (id, features)
        };
        if id.is_empty() {
            return Err(Error::record(name, &at, "empty posting_id"));
        }
        if features.is_empty() {
            return Err(Error::record(name, &at, "no feature values"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::record(name, &at, "non-finite feature value"));
        }
        match dim {
            None => dim = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(Error::record(
                    name,
                    &at,
                    format!("dimension {} differs from {d} on earlier lines", features.len()),
                ))
            }
            Some(_) => {}
        }
        if rows.insert(id.clone(), features).is_some() {
            return Err(Error::record(name, &at, format!("duplicate posting_id {id}")));
        }
    }
    let dim = dim.ok_or_else(|| Error::record(name, "line 1", "no feature rows"))?;
    Ok(FeatureTable { dim, rows })
}

/// Joins gold targets with their feature vectors.
pub fn examples_from(table: &FeatureTable, gold: &[GoldRecord]) -> Result<Vec<Example>> {
    gold.iter()
        .map(|g| {
            let features = table.rows.get(&g.posting_id).ok_or_else(|| Error::Unknown {
                kind: "feature vector for posting",
                id: g.posting_id.clone(),
            })?;
            Ok(Example::new(g.posting_id.clone(), features.clone(), g.gold_label).with_binary(g.gold_binary))
        })
        .collect()
}

/// Gold records carrying the examples' own targets, for fold planning.
pub fn gold_of(examples: &[Example]) -> Vec<GoldRecord> {
    examples
        .iter()
        .map(|e| GoldRecord {
            posting_id: e.id.clone(),
            gold_label: e.label,
            gold_binary: e.binary,
            strategy: Strategy::MostFrequent,
        })
        .collect()
}

/// Where training examples come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureSource {
    /// One feature in [0, 5) whose floor is the label.
    SynthOrdinal,
    /// Two features separated by a line, labels 0 and 1.
    SynthBinary,
    File(PathBuf),
}

impl FeatureSource {
    pub fn parse(s: &str) -> FeatureSource {
        match s {
            "synth-ordinal" => FeatureSource::SynthOrdinal,
            "synth-binary" => FeatureSource::SynthBinary,
            path => FeatureSource::File(PathBuf::from(path)),
        }
    }

    /// Synthetic sources draw `n` examples from `seed`; file sources need
    /// gold records to attach targets.
    pub fn load(&self, gold: Option<&[GoldRecord]>, n: usize, seed: u64) -> Result<Vec<Example>> {
        match self {
            FeatureSource::SynthOrdinal => Ok(synthetic_ordinal(n, seed)),
            FeatureSource::SynthBinary => Ok(synthetic_binary(n, seed)),
            FeatureSource::File(path) => {
                let gold = gold.ok_or_else(|| Error::Invalid("a feature file needs gold records (--gold)".into()))?;
                examples_from(&read_features(path)?, gold)
            }
        }
    }
}
