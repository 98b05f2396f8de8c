//! Text renderings of statistics, cross-validation and forum reports.

use std::fmt::Write as _;

use labelwise_core::agreement::{AgreementReport, Measure, PairTable};
use labelwise_core::flagging::ForumReport;
use labelwise_core::ordinal::CvReport;

pub const CV_COLUMNS: [&str; 6] = [
    "model",
    "head",
    "accuracy_mean",
    "accuracy_std",
    "f1_macro_mean",
    "f1_macro_std",
];

pub const FORUM_COLUMNS: [&str; 4] = ["forum_id", "n", "rate", "flagged"];

/// The relative pair table as CSV with class labels as row and column
/// headers, rounded to three decimals.
pub fn pair_table_csv(table: &PairTable) -> String {
    let rows = table.relative_rows();
    let mut out = String::from("label");
    for c in 0..rows.len() {
        write!(out, ",{c}").unwrap();
    }
    out.push('\n');
    for (r, row) in rows.iter().enumerate() {
        write!(out, "{r}").unwrap();
        for v in row {
            write!(out, ",{v:.3}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn agreement_json(report: &AgreementReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes") + "\n"
}

fn measure(m: &Measure) -> String {
    match (m.value, &m.undefined) {
        (Some(v), _) => format!("{v:.4}"),
        (None, Some(why)) => format!("undefined ({why})"),
        (None, None) => "undefined".into(),
    }
}

/// Aligned plain-text summary for terminals.
pub fn agreement_text(report: &AgreementReport) -> String {
    let rows = [
        ("annotations", report.n_annotations.to_string()),
        ("annotation pairs", report.n_pairs.to_string()),
        ("alpha nominal", measure(&report.alpha_nominal)),
        ("alpha ordinal", measure(&report.alpha_ordinal)),
        ("alpha binary", measure(&report.alpha_binary)),
        ("agreement micro", measure(&report.pct_micro)),
        ("agreement micro (binary)", measure(&report.pct_micro_binary)),
        ("agreement macro", measure(&report.pct_macro)),
        ("agreement macro (binary)", measure(&report.pct_macro_binary)),
        ("kappa macro", measure(&report.kappa_macro)),
        ("kappa macro (binary)", measure(&report.kappa_macro_binary)),
        ("pairwise F1 macro", measure(&report.f1_macro_pairs)),
        ("pairwise F1 macro (binary)", measure(&report.f1_macro_pairs_binary)),
    ];
    let mut out = String::new();
    for (name, value) in rows {
        writeln!(out, "{name:<28}{value}").unwrap();
    }
    if let Some(d) = &report.label_distribution {
        let shares: Vec<String> = d.proportions.iter().enumerate().map(|(l, p)| format!("{l}:{p:.3}")).collect();
        writeln!(out, "{:<28}{}", "label distribution", shares.join(" ")).unwrap();
        writeln!(out, "{:<28}{:.3}", "positive share", d.positive_share()).unwrap();
    }
    out
}

/// One row per (model, head), in the order given.
pub fn cv_tsv(reports: &[CvReport]) -> String {
    let mut out = CV_COLUMNS.join("\t");
    out.push('\n');
    for report in reports {
        for row in &report.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                report.model.name(),
                row.head.name(),
                row.accuracy_mean,
                row.accuracy_std,
                row.f1_macro_mean,
                row.f1_macro_std
            )
            .unwrap();
        }
    }
    out
}

pub fn forum_tsv(reports: &[ForumReport]) -> String {
    let mut out = FORUM_COLUMNS.join("\t");
    out.push('\n');
    for r in reports {
        writeln!(out, "{}\t{}\t{}\t{}", r.forum_id, r.n_postings, r.positive_rate, r.flagged).unwrap();
    }
    out
}

pub fn forum_json(reports: &[ForumReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize") + "\n"
}
