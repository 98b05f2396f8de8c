//! Batch files: one CSV per (round, annotator) with header
//! `posting_id,text,label`, LF line endings and RFC-4180 quoting.
//!
//! Rows are numbered from 1 starting at the first line after the header.

use std::io::{Read, Write};

use csv::{QuoteStyle, ReaderBuilder, Terminator, WriterBuilder};

use crate::error::{Error, Result};
use crate::store::State;

pub const HEADER: [&str; 3] = ["posting_id", "text", "label"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchRow {
    pub row: usize,
    pub posting_id: String,
    pub text: String,
    /// Raw cell content; validated on import.
    pub label: String,
}

/// Writes the batch for `annotator_id` in round order with empty labels.
pub fn export_batch(state: &State, round_id: &str, annotator_id: &str, out: impl Write) -> Result<()> {
    let round = state.round(round_id).ok_or_else(|| Error::Unknown {
        kind: "round",
        id: round_id.to_string(),
    })?;
    if !round.is_assigned(annotator_id) {
        return Err(Error::NotAssigned {
            annotator: annotator_id.to_string(),
            what: format!("round {round_id}"),
        });
    }
    let mut w = WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .quote_style(QuoteStyle::Necessary)
        .from_writer(out);
    let io_err = |e: csv::Error| Error::Invalid(format!("writing batch: {e}"));
    w.write_record(HEADER).map_err(io_err)?;
    for p in &round.posting_ids {
        let text = state.posting(p).map(|p| p.text.as_str()).unwrap_or_default();
        w.write_record([p.as_str(), text, ""]).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io("batch output", e))
}

pub fn export_batch_string(state: &State, round_id: &str, annotator_id: &str) -> Result<String> {
    let mut buf = Vec::new();
    export_batch(state, round_id, annotator_id, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output of UTF-8 input"))
}

/// Reads a batch file. Structural problems (wrong header, wrong number of
/// cells) fail here; label values are checked by the store on import.
pub fn read_batch(input: impl Read, name: &str) -> Result<Vec<BatchRow>> {
    let mut r = ReaderBuilder::new().has_headers(true).flexible(false).from_reader(input);
    let headers = r
        .headers()
        .map_err(|e| Error::record(name, "header", e))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_string())
        .collect::<Vec<_>>();
    if headers != HEADER {
        return Err(Error::record(
            name,
            "header",
            format!("expected {}, found {}", HEADER.join(","), headers.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::record(name, format!("row {row}"), e))?;
        rows.push(BatchRow {
            row,
            posting_id: record[0].to_string(),
            text: record[1].to_string(),
            label: record[2].to_string(),
        });
    }
    Ok(rows)
}
