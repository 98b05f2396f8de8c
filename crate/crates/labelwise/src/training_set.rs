//! Per-fold training files: `fold{i}.{train|dev|test}.{tsv|jsonl}` with the
//! columns posting_id, text, gold_label, gold_binary.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use csv::{QuoteStyle, ReaderBuilder, Terminator, WriterBuilder};
use labelwise_core::resolve::{FoldPlan, GoldRecord, Split};
use labelwise_core::Label;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files::{read_jsonl, to_jsonl, write_atomic};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub posting_id: String,
    pub text: String,
    pub gold_label: Label,
    pub gold_binary: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Tsv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Tsv => "tsv",
            Format::Jsonl => "jsonl",
        }
    }

    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Format::Jsonl,
            _ => Format::Tsv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Dev,
    Test,
}

impl Part {
    pub const ALL: [Part; 3] = [Part::Train, Part::Dev, Part::Test];

    pub fn name(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Dev => "dev",
            Part::Test => "test",
        }
    }
}

pub fn file_name(fold: usize, part: Part, format: Format) -> String {
    format!("fold{fold}.{}.{}", part.name(), format.extension())
}

/// Writes train, dev and test files for every fold of `plan` into `dir` and
/// returns their paths. `text_of` supplies posting texts; a missing text is
/// an error and nothing is written.
pub fn export_training_set(
    records: &[GoldRecord],
    plan: &FoldPlan,
    text_of: impl Fn(&str) -> Option<String>,
    format: Format,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut rows: BTreeMap<&str, TrainingRow> = BTreeMap::new();
    for r in records {
        let text = text_of(&r.posting_id).ok_or_else(|| Error::Invalid(format!("posting {} has no text", r.posting_id)))?;
        rows.insert(
            &r.posting_id,
            TrainingRow {
                posting_id: r.posting_id.clone(),
                text,
                gold_label: r.gold_label,
                gold_binary: r.gold_binary,
            },
        );
    }
    let lookup = |id: &str| {
        rows.get(id)
            .ok_or_else(|| Error::Invalid(format!("fold plan references posting {id} without a gold record")))
    };
    let mut files = Vec::new();
    for fold in 0..plan.k {
        for part in Part::ALL {
            let ids: Vec<&str> = match part {
                Part::Test => plan.test_ids(fold).collect(),
                Part::Train => plan.split_ids(fold, Split::Train).collect(),
                Part::Dev => plan.split_ids(fold, Split::Dev).collect(),
            };
            let part_rows = ids.into_iter().map(lookup).collect::<Result<Vec<_>>>()?;
            files.push((dir.join(file_name(fold, part, format)), encode(&part_rows, format)?));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (path, bytes) in &files {
        write_atomic(path, bytes)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

fn encode(rows: &[&TrainingRow], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Jsonl => Ok(to_jsonl(rows.iter().copied())),
        Format::Tsv => {
            let mut w = WriterBuilder::new()
                .delimiter(b'\t')
                .terminator(Terminator::Any(b'\n'))
                .quote_style(QuoteStyle::Necessary)
                .from_writer(Vec::new());
            w.write_record(["posting_id", "text", "gold_label", "gold_binary"])
                .and_then(|_| {
                    rows.iter().try_for_each(|r| {
                        w.write_record([
                            r.posting_id.as_str(),
                            r.text.as_str(),
                            &r.gold_label.value().to_string(),
                            &r.gold_binary.to_string(),
                        ])
                    })
                })
                .map_err(|e| Error::Invalid(e.to_string()))?;
            w.into_inner().map_err(|e| Error::Invalid(e.to_string()))
        }
    }
}

/// Reads a file written by [`export_training_set`]; the format follows the
/// extension.
pub fn import_training_file(path: &Path) -> Result<Vec<TrainingRow>> {
    let name = path.display().to_string();
    match Format::from_path(path) {
        Format::Jsonl => Ok(read_jsonl(path)?.into_iter().map(|(_, r)| r).collect()),
        Format::Tsv => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let mut r = ReaderBuilder::new().delimiter(b'\t').from_reader(file);
            r.deserialize()
                .enumerate()
                .map(|(i, row)| row.map_err(|e| Error::record(&name, format!("row {}", i + 1), e)))
                .collect()
        }
    }
}
