use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::loss::{
    binary_decode, binary_loss, coral_decode, coral_loss, coral_loss_grad, multiclass_decode, multiclass_loss,
    multiclass_loss_grad, sigmoid, CORAL_THRESHOLDS,
};
use crate::label::{Label, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("feature dimension {got} does not match model input dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("model has no {0:?} head")]
    MissingHead(HeadKind),
}

/// One labeled feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub features: Vec<f64>,
    pub label: Label,
    /// Target of the binary head; usually `binarize(label)` but gold
    /// resolution may pick it independently.
    pub binary: u8,
}

impl Example {
    pub fn new(id: impl Into<String>, features: Vec<f64>, label: Label) -> Self {
        Example {
            id: id.into(),
            features,
            binary: label.binarize(),
            label,
        }
    }

    pub fn with_binary(mut self, binary: u8) -> Self {
        self.binary = binary;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Binary,
    Multiclass,
    Coral,
}

impl HeadKind {
    /// Width of the output layer.
    pub fn outputs(self) -> usize {
        match self {
            HeadKind::Multiclass => NUM_CLASSES,
            HeadKind::Binary | HeadKind::Coral => 1,
        }
    }

    pub fn thresholds(self) -> usize {
        match self {
            HeadKind::Coral => CORAL_THRESHOLDS,
            _ => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Binary => "bin",
            HeadKind::Multiclass => "multi",
            HeadKind::Coral => "coral",
        }
    }
}

/// Hidden ReLU layer plus output layer.
///
/// Weight matrices are row-major: `hidden_weights` is `hidden_dim x
/// input_dim`, `output_weights` is `outputs x hidden_dim`. Only a CORAL head
/// carries `thresholds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub kind: HeadKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: Vec<f64>,
    pub thresholds: Vec<f64>,
}

pub(crate) struct HeadCache {
    pre: Vec<f64>,
    act: Vec<f64>,
    pub(crate) logits: Vec<f64>,
}

impl Head {
    pub fn zeros(kind: HeadKind, input_dim: usize, hidden_dim: usize) -> Self {
        let outputs = kind.outputs();
        Head {
            kind,
            input_dim,
            hidden_dim,
            hidden_weights: vec![0.0; hidden_dim * input_dim],
            hidden_bias: vec![0.0; hidden_dim],
            output_weights: vec![0.0; outputs * hidden_dim],
            output_bias: vec![0.0; outputs],
            thresholds: vec![0.0; kind.thresholds()],
        }
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization for both
    /// layers; thresholds start at zero.
    pub fn random<R: Rng>(kind: HeadKind, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut head = Head::zeros(kind, input_dim, hidden_dim);
        let fill = |values: &mut [f64], fan_in: usize, rng: &mut R| {
            let bound = 1.0 / libm::sqrt(fan_in.max(1) as f64);
            for v in values {
                *v = rng.random_range(-bound..bound);
            }
        };
        fill(&mut head.hidden_weights, input_dim, rng);
        fill(&mut head.hidden_bias, input_dim, rng);
        fill(&mut head.output_weights, hidden_dim, rng);
        fill(&mut head.output_bias, hidden_dim, rng);
        head
    }

    pub fn param_count(&self) -> usize {
        self.param_groups().iter().map(|(p, _)| p.len()).sum()
    }

    /// Parameter slices in a fixed order, each flagged with whether weight
    /// decay applies (weight matrices only).
    pub fn param_groups(&self) -> [(&[f64], bool); 5] {
        [
            (&self.hidden_weights, true),
            (&self.hidden_bias, false),
            (&self.output_weights, true),
            (&self.output_bias, false),
            (&self.thresholds, false),
        ]
    }

    pub fn param_groups_mut(&mut self) -> [(&mut [f64], bool); 5] {
        [
            (&mut self.hidden_weights, true),
            (&mut self.hidden_bias, false),
            (&mut self.output_weights, true),
            (&mut self.output_bias, false),
            (&mut self.thresholds, false),
        ]
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Result<HeadCache, ModelError> {
        if x.len() != self.input_dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let d = self.input_dim;
        let pre: Vec<f64> = (0..self.hidden_dim)
            .map(|j| {
                let row = &self.hidden_weights[j * d..(j + 1) * d];
                self.hidden_bias[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        let act: Vec<f64> = pre.iter().map(|&a| a.max(0.0)).collect();
        let h = self.hidden_dim;
        let out: Vec<f64> = (0..self.kind.outputs())
            .map(|o| {
                let row = &self.output_weights[o * h..(o + 1) * h];
                self.output_bias[o] + row.iter().zip(&act).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        let logits = match self.kind {
            HeadKind::Coral => self.thresholds.iter().map(|b| out[0] + b).collect(),
            _ => out,
        };
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(ModelError::NonFinite("head logits"));
        }
        Ok(HeadCache { pre, act, logits })
    }

    /// Accumulates the gradient for one example into `grad`, given the
    /// derivative of the loss with respect to this head's logits.
    pub(crate) fn backward(&self, x: &[f64], cache: &HeadCache, dlogits: &[f64], grad: &mut Head) {
        let dout: Vec<f64> = match self.kind {
            HeadKind::Coral => {
                for (g, d) in grad.thresholds.iter_mut().zip(dlogits) {
                    *g += d;
                }
                vec![dlogits.iter().sum()]
            }
            _ => dlogits.to_vec(),
        };
        let h = self.hidden_dim;
        let d = self.input_dim;
        let mut dact = vec![0.0; h];
        for (o, &g) in dout.iter().enumerate() {
            grad.output_bias[o] += g;
            let w_row = &self.output_weights[o * h..(o + 1) * h];
            let g_row = &mut grad.output_weights[o * h..(o + 1) * h];
            for ((gw, d), (w, a)) in g_row.iter_mut().zip(dact.iter_mut()).zip(w_row.iter().zip(&cache.act)) {
                *gw += g * a;
                *d += g * w;
            }
        }
        for (j, (&pre, &g)) in cache.pre.iter().zip(&dact).enumerate().take(h) {
            if pre <= 0.0 {
                continue;
            }
            grad.hidden_bias[j] += g;
            for (gw, v) in grad.hidden_weights[j * d..(j + 1) * d].iter_mut().zip(x) {
                *gw += g * v;
            }
        }
    }
}

/// Cumulative logits and probabilities of a CORAL head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoralOutput {
    pub logits: [f64; CORAL_THRESHOLDS],
    pub probabilities: [f64; CORAL_THRESHOLDS],
}

impl CoralOutput {
    pub fn label(&self) -> Label {
        coral_decode(&self.probabilities)
    }
}

pub fn coral_forward(x: &[f64], head: &Head) -> Result<CoralOutput, ModelError> {
    if head.kind != HeadKind::Coral {
        return Err(ModelError::MissingHead(HeadKind::Coral));
    }
    let cache = head.forward(x)?;
    let mut out = CoralOutput {
        logits: [0.0; CORAL_THRESHOLDS],
        probabilities: [0.0; CORAL_THRESHOLDS],
    };
    for k in 0..CORAL_THRESHOLDS {
        out.logits[k] = cache.logits[k];
        out.probabilities[k] = sigmoid(cache.logits[k]);
    }
    Ok(out)
}

/// The five model variants: single binary, multiclass or CORAL heads, and
/// the two dual-head combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Bin,
    Multi,
    Coral,
    BinMulti,
    BinCoral,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Bin,
        ModelKind::Multi,
        ModelKind::Coral,
        ModelKind::BinMulti,
        ModelKind::BinCoral,
    ];

    pub fn has_binary(self) -> bool {
        matches!(self, ModelKind::Bin | ModelKind::BinMulti | ModelKind::BinCoral)
    }

    pub fn ordinal_head(self) -> Option<HeadKind> {
        match self {
            ModelKind::Multi | ModelKind::BinMulti => Some(HeadKind::Multiclass),
            ModelKind::Coral | ModelKind::BinCoral => Some(HeadKind::Coral),
            ModelKind::Bin => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Bin => "Bin",
            ModelKind::Multi => "Multi",
            ModelKind::Coral => "Coral",
            ModelKind::BinMulti => "BinMulti",
            ModelKind::BinCoral => "BinCoral",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s) || s.eq_ignore_ascii_case(k.snake_name()))
    }

    fn snake_name(self) -> &'static str {
        match self {
            ModelKind::Bin => "bin",
            ModelKind::Multi => "multi",
            ModelKind::Coral => "coral",
            ModelKind::BinMulti => "bin_multi",
            ModelKind::BinCoral => "bin_coral",
        }
    }
}

/// Binary head, ordinal head, or both, sharing the same input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: ModelKind,
    pub binary: Option<Head>,
    pub ordinal: Option<Head>,
    pub lambda_bin: f64,
    pub lambda_ordinal: f64,
}

// seeds for the per-head initialization streams
const BINARY_STREAM: u64 = 0x6269_6e61_7279;
const ORDINAL_STREAM: u64 = 0x6f72_6469_6e61;

impl Model {
    pub fn zeros(kind: ModelKind, input_dim: usize, hidden_dim: usize) -> Self {
        Model {
            kind,
            binary: kind.has_binary().then(|| Head::zeros(HeadKind::Binary, input_dim, hidden_dim)),
            ordinal: kind.ordinal_head().map(|h| Head::zeros(h, input_dim, hidden_dim)),
            lambda_bin: 1.0,
            lambda_ordinal: 1.0,
        }
    }

    /// Randomly initialized model. Each head draws from its own seeded
    /// stream, so a head starts identical whether or not the other is present.
    pub fn random(kind: ModelKind, input_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut bin_rng = ChaCha8Rng::seed_from_u64(seed ^ BINARY_STREAM);
        let mut ord_rng = ChaCha8Rng::seed_from_u64(seed ^ ORDINAL_STREAM);
        Model {
            kind,
            binary: kind
                .has_binary()
                .then(|| Head::random(HeadKind::Binary, input_dim, hidden_dim, &mut bin_rng)),
            ordinal: kind
                .ordinal_head()
                .map(|h| Head::random(h, input_dim, hidden_dim, &mut ord_rng)),
            lambda_bin: 1.0,
            lambda_ordinal: 1.0,
        }
    }

    pub fn with_loss_weights(mut self, lambda_bin: f64, lambda_ordinal: f64) -> Self {
        self.lambda_bin = lambda_bin;
        self.lambda_ordinal = lambda_ordinal;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.heads().next().map_or(0, |h| h.input_dim)
    }

    /// Heads in reporting order: binary first, then ordinal.
    pub fn heads(&self) -> impl Iterator<Item = &Head> {
        self.binary.iter().chain(self.ordinal.iter())
    }

    fn heads_mut(&mut self) -> impl Iterator<Item = &mut Head> {
        self.binary.iter_mut().chain(self.ordinal.iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.heads().map(Head::param_count).sum()
    }

    /// Same shape, all parameters zero.
    pub fn zeros_like(&self) -> Model {
        let mut m = self.clone();
        m.visit_params_mut(|p, _| *p = 0.0);
        m
    }

    pub fn visit_params(&self, mut f: impl FnMut(f64, bool)) {
        for head in self.heads() {
            for (group, decay) in head.param_groups() {
                for &p in group {
                    f(p, decay);
                }
            }
        }
    }

    pub fn visit_params_mut(&mut self, mut f: impl FnMut(&mut f64, bool)) {
        for head in self.heads_mut() {
            for (group, decay) in head.param_groups_mut() {
                for p in group {
                    f(p, decay);
                }
            }
        }
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit_params(|p, _| out.push(p));
        out
    }

    fn weights(&self) -> (f64, f64) {
        match self.kind {
            ModelKind::BinMulti | ModelKind::BinCoral => (self.lambda_bin, self.lambda_ordinal),
            _ => (1.0, 1.0),
        }
    }

    /// Total weighted loss on one example.
    pub fn loss(&self, example: &Example) -> Result<f64, ModelError> {
        let (wb, wo) = self.weights();
        let mut total = 0.0;
        if let Some(head) = &self.binary {
            let cache = head.forward(&example.features)?;
            total += wb * binary_loss(cache.logits[0], example.binary);
        }
        if let Some(head) = &self.ordinal {
            let cache = head.forward(&example.features)?;
            total += wo
                * match head.kind {
                    HeadKind::Coral => coral_loss(&cache.logits, example.label),
                    _ => multiclass_loss(&cache.logits, example.label),
                };
        }
        Ok(total)
    }

    /// Loss on one example, adding its gradient into `grad`.
    pub fn loss_and_grad(&self, example: &Example, grad: &mut Model) -> Result<f64, ModelError> {
        let (wb, wo) = self.weights();
        let x = &example.features;
        let mut total = 0.0;
        if let (Some(head), Some(g)) = (&self.binary, grad.binary.as_mut()) {
            let cache = head.forward(x)?;
            let z = cache.logits[0];
            total += wb * binary_loss(z, example.binary);
            let d = wb * (sigmoid(z) - f64::from(example.binary));
            head.backward(x, &cache, &[d], g);
        }
        if let (Some(head), Some(g)) = (&self.ordinal, grad.ordinal.as_mut()) {
            let cache = head.forward(x)?;
            let (loss, mut d) = match head.kind {
                HeadKind::Coral => (
                    coral_loss(&cache.logits, example.label),
                    coral_loss_grad(&cache.logits, example.label),
                ),
                _ => (
                    multiclass_loss(&cache.logits, example.label),
                    multiclass_loss_grad(&cache.logits, example.label),
                ),
            };
            total += wo * loss;
            d.iter_mut().for_each(|v| *v *= wo);
            head.backward(x, &cache, &d, g);
        }
        Ok(total)
    }

    /// Decoded prediction of the binary head, if present.
    pub fn predict_binary(&self, x: &[f64]) -> Result<Option<u8>, ModelError> {
        match &self.binary {
            Some(head) => Ok(Some(binary_decode(head.forward(x)?.logits[0]))),
            None => Ok(None),
        }
    }

    /// Probability of the positive class from the binary head.
    pub fn binary_probability(&self, x: &[f64]) -> Result<f64, ModelError> {
        let head = self.binary.as_ref().ok_or(ModelError::MissingHead(HeadKind::Binary))?;
        Ok(sigmoid(head.forward(x)?.logits[0]))
    }

    /// Decoded five-class prediction of the ordinal head, if present.
    pub fn predict_label(&self, x: &[f64]) -> Result<Option<Label>, ModelError> {
        match &self.ordinal {
            Some(head) => {
                let cache = head.forward(x)?;
                Ok(Some(match head.kind {
                    HeadKind::Coral => {
                        let probs: Vec<f64> = cache.logits.iter().map(|&z| sigmoid(z)).collect();
                        coral_decode(&probs)
                    }
                    _ => multiclass_decode(&cache.logits),
                }))
            }
            None => Ok(None),
        }
    }
}

/// `lambda_bin * binary_loss + lambda_ordinal * ordinal_loss` of a dual model
/// on one input, the binary target being `binarize(y)`.
pub fn dual_loss(model: &Model, x: &[f64], y: Label) -> Result<f64, ModelError> {
    if model.binary.is_none() {
        return Err(ModelError::MissingHead(HeadKind::Binary));
    }
    if model.ordinal.is_none() {
        return Err(ModelError::MissingHead(HeadKind::Coral));
    }
    model.loss(&Example::new("", x.to_vec(), y))
}
