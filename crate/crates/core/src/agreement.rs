//! Inter-annotator agreement statistics.
//!
//! Two pair structures are kept apart on purpose. [`PairTable`] counts every
//! unordered pair of labels on an item once, which is what percent agreement
//! and pairwise F1 are defined over. Krippendorff's alpha uses the coincidence
//! matrix, where each item's pairs are weighted by `1 / (m - 1)`; the two only
//! coincide when every item has the same number of annotators.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::{Label, Scale, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("the matrix holds no annotations")]
    Empty,
    #[error("no item has two or more annotations")]
    NoPairs,
    #[error("only one distinct label value among pairable annotations, alpha is undefined")]
    SingleValue,
    #[error("unknown annotator {0}")]
    UnknownAnnotator(String),
    #[error("annotators {0} and {1} share no item")]
    NoSharedItems(String, String),
    #[error("annotators {0} and {1} have degenerate marginals (expected agreement is 1)")]
    DegenerateMarginals(String, String),
    #[error("no annotator pair shares an item")]
    NoAnnotatorPairs,
    #[error("no annotator pair has a defined kappa")]
    NoValidKappaPair,
}

/// Items by annotators, with a label in every present cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationMatrix {
    items: Vec<String>,
    annotators: Vec<String>,
    item_index: BTreeMap<String, usize>,
    annotator_index: BTreeMap<String, usize>,
    // per item, sorted by annotator index
    rows: Vec<Vec<(usize, Label)>>,
}

impl AnnotationMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_cells<I, S, T>(cells: I) -> Self
    where
        I: IntoIterator<Item = (S, T, Label)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut m = Self::new();
        for (item, annotator, label) in cells {
            m.insert(item.as_ref(), annotator.as_ref(), label);
        }
        m
    }

    /// Builds a matrix from a dense grid, one row per item and one column per
    /// annotator; `None` marks a missing cell. Items and annotators get ids
    /// `i{row}` and `a{col}`.
    ///
    /// Panics if a value is not a valid label.
    pub fn from_grid<R: AsRef<[Option<u8>]>>(grid: &[R]) -> Self {
        let mut m = Self::new();
        for (r, row) in grid.iter().enumerate() {
            for (c, cell) in row.as_ref().iter().enumerate() {
                if let Some(v) = cell {
                    let label = Label::new(*v as i64).expect("grid value is not a label");
                    m.insert(&format!("i{r}"), &format!("a{c}"), label);
                }
            }
        }
        m
    }

    /// Sets a cell, returning the label it replaced.
    pub fn insert(&mut self, item: &str, annotator: &str, label: Label) -> Option<Label> {
        let i = match self.item_index.get(item) {
            Some(&i) => i,
            None => {
                self.items.push(item.to_string());
                self.rows.push(Vec::new());
                self.item_index.insert(item.to_string(), self.items.len() - 1);
                self.items.len() - 1
            }
        };
        let a = match self.annotator_index.get(annotator) {
            Some(&a) => a,
            None => {
                self.annotators.push(annotator.to_string());
                self.annotator_index
                    .insert(annotator.to_string(), self.annotators.len() - 1);
                self.annotators.len() - 1
            }
        };
        let row = &mut self.rows[i];
        match row.binary_search_by_key(&a, |&(x, _)| x) {
            Ok(pos) => Some(core::mem::replace(&mut row[pos].1, label)),
            Err(pos) => {
                row.insert(pos, (a, label));
                None
            }
        }
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn get(&self, item: &str, annotator: &str) -> Option<Label> {
        let i = *self.item_index.get(item)?;
        let a = *self.annotator_index.get(annotator)?;
        self.rows[i]
            .binary_search_by_key(&a, |&(x, _)| x)
            .ok()
            .map(|pos| self.rows[i][pos].1)
    }

    /// Labels of one item, in annotator order.
    pub fn item_labels(&self, item: &str) -> Option<Vec<Label>> {
        let i = *self.item_index.get(item)?;
        Some(self.rows[i].iter().map(|&(_, l)| l).collect())
    }

    pub fn n_annotations(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    fn rows(&self) -> impl Iterator<Item = &[(usize, Label)]> {
        self.rows.iter().map(Vec::as_slice)
    }
}

/// Number of annotations and of unordered annotation pairs on shared items.
pub fn count_pairs(matrix: &AnnotationMatrix) -> (usize, usize) {
    let pairs = matrix.rows().map(|r| r.len() * r.len().saturating_sub(1) / 2).sum();
    (matrix.n_annotations(), pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub proportions: [f64; NUM_CLASSES],
    pub total: usize,
}

impl LabelDistribution {
    /// Share of annotations with any severity (labels 1 to 4).
    pub fn positive_share(&self) -> f64 {
        self.proportions[1..].iter().sum()
    }
}

pub fn label_distribution(matrix: &AnnotationMatrix) -> Result<LabelDistribution, AgreementError> {
    let mut counts = [0usize; NUM_CLASSES];
    for row in matrix.rows() {
        for &(_, l) in row {
            counts[l.index()] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(AgreementError::Empty);
    }
    let mut proportions = [0.0; NUM_CLASSES];
    for (p, c) in proportions.iter_mut().zip(counts) {
        *p = c as f64 / total as f64;
    }
    Ok(LabelDistribution { proportions, total })
}

/// Symmetric table of label pairings on co-annotated items.
///
/// `weights[a * classes + b]` holds the mass for the pair `(a, b)`; every
/// unordered pair of annotations contributes one unit split evenly over the
/// two mirrored cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTable {
    pub classes: usize,
    pub weights: Vec<f64>,
    /// Number of unordered annotation pairs, or 0 when the table was loaded
    /// from relative frequencies.
    pub n_pairs: usize,
}

impl PairTable {
    pub fn zeros(classes: usize) -> Self {
        PairTable {
            classes,
            weights: vec![0.0; classes * classes],
            n_pairs: 0,
        }
    }

    /// Loads an already normalized table of relative pairing frequencies.
    pub fn from_relative<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let classes = rows.len();
        let mut weights = Vec::with_capacity(classes * classes);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), classes, "pair table must be square");
            weights.extend_from_slice(row);
        }
        PairTable {
            classes,
            weights,
            n_pairs: 0,
        }
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.weights[a * self.classes + b]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.classes).all(|a| (0..a).all(|b| self.get(a, b) == self.get(b, a)))
    }

    /// The table scaled to sum to one.
    pub fn relative(&self) -> PairTable {
        let total = self.total();
        PairTable {
            classes: self.classes,
            weights: self.weights.iter().map(|w| w / total).collect(),
            n_pairs: self.n_pairs,
        }
    }

    pub fn relative_rows(&self) -> Vec<Vec<f64>> {
        let rel = self.relative();
        rel.weights.chunks(self.classes).map(<[f64]>::to_vec).collect()
    }

    /// Row sums of the relative table.
    pub fn marginals(&self) -> Vec<f64> {
        let total = self.total();
        (0..self.classes)
            .map(|a| (0..self.classes).map(|b| self.get(a, b)).sum::<f64>() / total)
            .collect()
    }

    /// Collapses a five-class table onto absence versus presence.
    pub fn binarized(&self) -> PairTable {
        assert_eq!(self.classes, NUM_CLASSES, "only five-class tables can be binarized");
        let mut out = PairTable::zeros(2);
        out.n_pairs = self.n_pairs;
        for a in 0..self.classes {
            for b in 0..self.classes {
                let (x, y) = (usize::from(a > 0), usize::from(b > 0));
                out.weights[x * 2 + y] += self.get(a, b);
            }
        }
        out
    }

    /// Fraction of agreeing pairs (trace of the relative table).
    pub fn micro_agreement(&self) -> f64 {
        (0..self.classes).map(|c| self.get(c, c)).sum::<f64>() / self.total()
    }

    /// Per-class F1 for classes that occur; precision and recall coincide
    /// because the table is symmetric.
    pub fn f1_per_class(&self) -> Vec<Option<f64>> {
        let total = self.total();
        self.marginals()
            .into_iter()
            .enumerate()
            .map(|(c, p)| (p > 0.0).then(|| self.get(c, c) / total / p))
            .collect()
    }

    pub fn f1_macro(&self) -> f64 {
        let present: Vec<f64> = self.f1_per_class().into_iter().flatten().collect();
        present.iter().sum::<f64>() / present.len() as f64
    }
}

pub fn pair_confusion(matrix: &AnnotationMatrix, scale: Scale) -> Result<PairTable, AgreementError> {
    let mut table = PairTable::zeros(scale.num_classes());
    let k = table.classes;
    for row in matrix.rows() {
        for (i, &(_, a)) in row.iter().enumerate() {
            for &(_, b) in &row[i + 1..] {
                let (x, y) = (scale.class_of(a), scale.class_of(b));
                table.weights[x * k + y] += 0.5;
                table.weights[y * k + x] += 0.5;
                table.n_pairs += 1;
            }
        }
    }
    if table.n_pairs == 0 {
        return Err(AgreementError::NoPairs);
    }
    Ok(table)
}

pub fn percent_agreement_micro(matrix: &AnnotationMatrix, scale: Scale) -> Result<f64, AgreementError> {
    Ok(pair_confusion(matrix, scale)?.micro_agreement())
}

/// Pooled pairwise F1, macro-averaged over classes present in the pair table.
pub fn pairwise_f1_macro(matrix: &AnnotationMatrix, scale: Scale) -> Result<f64, AgreementError> {
    Ok(pair_confusion(matrix, scale)?.f1_macro())
}

/// Joint label counts for every annotator pair that shares an item, keyed by
/// `(lower index, higher index)`; rows belong to the first annotator.
fn annotator_pair_tables(matrix: &AnnotationMatrix, scale: Scale) -> BTreeMap<(usize, usize), Vec<u64>> {
    let k = scale.num_classes();
    let mut pairs: BTreeMap<(usize, usize), Vec<u64>> = BTreeMap::new();
    for row in matrix.rows() {
        for (i, &(a, la)) in row.iter().enumerate() {
            for &(b, lb) in &row[i + 1..] {
                let joint = pairs.entry((a, b)).or_insert_with(|| vec![0; k * k]);
                joint[scale.class_of(la) * k + scale.class_of(lb)] += 1;
            }
        }
    }
    pairs
}

/// Mean over annotator pairs (those sharing at least one item) of each pair's
/// agreement rate.
pub fn percent_agreement_macro(matrix: &AnnotationMatrix, scale: Scale) -> Result<f64, AgreementError> {
    let k = scale.num_classes();
    let rates: Vec<f64> = annotator_pair_tables(matrix, scale)
        .values()
        .map(|joint| {
            let n: u64 = joint.iter().sum();
            let agree: u64 = (0..k).map(|c| joint[c * k + c]).sum();
            agree as f64 / n as f64
        })
        .collect();
    if rates.is_empty() {
        return Err(AgreementError::NoAnnotatorPairs);
    }
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

/// Kappa from a joint count table; `None` when expected agreement is 1.
fn kappa_from_joint(joint: &[u64], k: usize) -> Option<f64> {
    let n = joint.iter().sum::<u64>() as f64;
    let observed = (0..k).map(|c| joint[c * k + c]).sum::<u64>() as f64 / n;
    let expected: f64 = (0..k)
        .map(|c| {
            let row: u64 = (0..k).map(|j| joint[c * k + j]).sum();
            let col: u64 = (0..k).map(|i| joint[i * k + c]).sum();
            (row as f64 / n) * (col as f64 / n)
        })
        .sum();
    if expected >= 1.0 {
        None
    } else {
        Some((observed - expected) / (1.0 - expected))
    }
}

/// Cohen's kappa for two annotators over the items they both labeled.
pub fn cohen_kappa(
    matrix: &AnnotationMatrix,
    annotator_a: &str,
    annotator_b: &str,
    scale: Scale,
) -> Result<f64, AgreementError> {
    for id in [annotator_a, annotator_b] {
        if !matrix.annotator_index.contains_key(id) {
            return Err(AgreementError::UnknownAnnotator(id.to_string()));
        }
    }
    let k = scale.num_classes();
    let mut joint = vec![0u64; k * k];
    for item in matrix.items() {
        if let (Some(a), Some(b)) = (matrix.get(item, annotator_a), matrix.get(item, annotator_b)) {
            joint[scale.class_of(a) * k + scale.class_of(b)] += 1;
        }
    }
    if joint.iter().all(|&c| c == 0) {
        return Err(AgreementError::NoSharedItems(annotator_a.to_string(), annotator_b.to_string()));
    }
    kappa_from_joint(&joint, k)
        .ok_or_else(|| AgreementError::DegenerateMarginals(annotator_a.to_string(), annotator_b.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaMacro {
    pub value: f64,
    pub pairs_used: usize,
    /// Pairs skipped because their expected agreement was 1.
    pub pairs_skipped: usize,
}

/// Unweighted mean of Cohen's kappa over all annotator pairs that share items.
pub fn kappa_macro(matrix: &AnnotationMatrix, scale: Scale) -> Result<KappaMacro, AgreementError> {
    let k = scale.num_classes();
    let pairs = annotator_pair_tables(matrix, scale);
    if pairs.is_empty() {
        return Err(AgreementError::NoAnnotatorPairs);
    }
    let mut kappas = Vec::new();
    let mut skipped = 0;
    for joint in pairs.values() {
        match kappa_from_joint(joint, k) {
            Some(kappa) => kappas.push(kappa),
            None => skipped += 1,
        }
    }
    if kappas.is_empty() {
        return Err(AgreementError::NoValidKappaPair);
    }
    Ok(KappaMacro {
        value: kappas.iter().sum::<f64>() / kappas.len() as f64,
        pairs_used: kappas.len(),
        pairs_skipped: skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMetric {
    Nominal,
    Ordinal,
}

/// Coincidence matrix: each ordered pair of values within an item with `m`
/// pairable values adds `1 / (m - 1)`. Items with a single value are not
/// pairable and contribute nothing.
pub fn coincidence_matrix(matrix: &AnnotationMatrix, scale: Scale) -> Vec<f64> {
    let k = scale.num_classes();
    let mut o = vec![0.0; k * k];
    for row in matrix.rows() {
        let m = row.len();
        if m < 2 {
            continue;
        }
        let w = 1.0 / (m - 1) as f64;
        for (i, &(_, a)) in row.iter().enumerate() {
            for (j, &(_, b)) in row.iter().enumerate() {
                if i != j {
                    o[scale.class_of(a) * k + scale.class_of(b)] += w;
                }
            }
        }
    }
    o
}

/// Squared difference metric for Krippendorff's alpha over marginals `n`.
fn alpha_delta(metric: AlphaMetric, n: &[f64], c: usize, k: usize) -> f64 {
    if c == k {
        return 0.0;
    }
    match metric {
        AlphaMetric::Nominal => 1.0,
        AlphaMetric::Ordinal => {
            let (lo, hi) = if c < k { (c, k) } else { (k, c) };
            let span: f64 = n[lo..=hi].iter().sum();
            let d = span - (n[c] + n[k]) / 2.0;
            d * d
        }
    }
}

/// Observed and expected disagreement behind Krippendorff's alpha.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaComponents {
    /// `D_o = sum(o_ck * delta_ck) / n`.
    pub observed: f64,
    /// `D_e = sum(n_c * n_k * delta_ck) / (n * (n - 1))`.
    pub expected: f64,
    /// Number of pairable values.
    pub n: f64,
}

impl AlphaComponents {
    pub fn alpha(&self) -> f64 {
        1.0 - self.observed / self.expected
    }
}

pub fn alpha_components(
    matrix: &AnnotationMatrix,
    metric: AlphaMetric,
    scale: Scale,
) -> Result<AlphaComponents, AgreementError> {
    let k = scale.num_classes();
    let o = coincidence_matrix(matrix, scale);
    let marginals: Vec<f64> = (0..k).map(|c| (0..k).map(|j| o[c * k + j]).sum()).collect();
    let n: f64 = marginals.iter().sum();
    if n == 0.0 {
        return Err(AgreementError::NoPairs);
    }
    if marginals.iter().filter(|&&m| m > 0.0).count() < 2 {
        return Err(AgreementError::SingleValue);
    }
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for j in 0..k {
            let delta = alpha_delta(metric, &marginals, c, j);
            observed += o[c * k + j] * delta;
            expected += marginals[c] * marginals[j] * delta;
        }
    }
    Ok(AlphaComponents {
        observed: observed / n,
        expected: expected / (n * (n - 1.0)),
        n,
    })
}

/// Krippendorff's alpha, `1 - D_o / D_e`, from the coincidence matrix.
///
/// On the binary scale both metrics reduce to the same value.
pub fn krippendorff_alpha(
    matrix: &AnnotationMatrix,
    metric: AlphaMetric,
    scale: Scale,
) -> Result<f64, AgreementError> {
    alpha_components(matrix, metric, scale).map(|c| c.alpha())
}

/// A statistic that may be undefined for the given data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undefined: Option<String>,
}

impl Measure {
    pub fn defined(value: f64) -> Self {
        Measure {
            value: Some(value),
            undefined: None,
        }
    }
}

impl From<Result<f64, AgreementError>> for Measure {
    fn from(r: Result<f64, AgreementError>) -> Self {
        match r {
            Ok(v) => Measure::defined(v),
            Err(e) => Measure {
                value: None,
                undefined: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub alpha_nominal: Measure,
    pub alpha_ordinal: Measure,
    pub alpha_binary: Measure,
    pub pct_micro: Measure,
    pub pct_macro: Measure,
    pub pct_micro_binary: Measure,
    pub pct_macro_binary: Measure,
    pub kappa_macro: Measure,
    pub kappa_macro_binary: Measure,
    pub kappa_pairs_skipped: usize,
    pub kappa_pairs_skipped_binary: usize,
    pub f1_macro_pairs: Measure,
    pub f1_macro_pairs_binary: Measure,
    pub n_annotations: usize,
    pub n_pairs: usize,
    pub label_distribution: Option<LabelDistribution>,
    /// Relative five-class pair table, row by row.
    pub pair_table: Option<Vec<Vec<f64>>>,
}

/// Every agreement statistic for one matrix; undefined statistics are
/// reported with their reason instead of failing the whole report.
pub fn agreement_report(matrix: &AnnotationMatrix) -> AgreementReport {
    let (n_annotations, n_pairs) = count_pairs(matrix);
    let kappa = |scale| {
        let r = kappa_macro(matrix, scale);
        let skipped = r.as_ref().map(|k| k.pairs_skipped).unwrap_or(0);
        (Measure::from(r.map(|k| k.value)), skipped)
    };
    let (kappa_full, skipped_full) = kappa(Scale::Full);
    let (kappa_bin, skipped_bin) = kappa(Scale::Binary);
    AgreementReport {
        alpha_nominal: krippendorff_alpha(matrix, AlphaMetric::Nominal, Scale::Full).into(),
        alpha_ordinal: krippendorff_alpha(matrix, AlphaMetric::Ordinal, Scale::Full).into(),
        alpha_binary: krippendorff_alpha(matrix, AlphaMetric::Nominal, Scale::Binary).into(),
        pct_micro: percent_agreement_micro(matrix, Scale::Full).into(),
        pct_macro: percent_agreement_macro(matrix, Scale::Full).into(),
        pct_micro_binary: percent_agreement_micro(matrix, Scale::Binary).into(),
        pct_macro_binary: percent_agreement_macro(matrix, Scale::Binary).into(),
        kappa_macro: kappa_full,
        kappa_macro_binary: kappa_bin,
        kappa_pairs_skipped: skipped_full,
        kappa_pairs_skipped_binary: skipped_bin,
        f1_macro_pairs: pairwise_f1_macro(matrix, Scale::Full).into(),
        f1_macro_pairs_binary: pairwise_f1_macro(matrix, Scale::Binary).into(),
        n_annotations,
        n_pairs,
        label_distribution: label_distribution(matrix).ok(),
        pair_table: pair_confusion(matrix, Scale::Full).ok().map(|t| t.relative_rows()),
    }
}
