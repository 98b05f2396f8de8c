//! Classification heads over pluggable feature vectors.
//!
//! A head is a hidden affine layer with ReLU followed by an output layer. The
//! binary head emits one sigmoid logit, the multiclass head five softmax
//! logits, and the CORAL head a single score `g(x)` shared by four ordered
//! thresholds, giving cumulative logits `z_k = g(x) + b_k` for `P(y >= k)`.
//! Dual models put a binary head and an ordinal head side by side on the same
//! input and train on a weighted sum of their losses.

mod eval;
mod head;
mod loss;
mod synth;
mod train;

pub use eval::{
    accuracy, cross_validate, evaluate, f1_macro, run_fold, summarize, CvError, CvReport, EvalResult, FoldResult,
    HeadScore,
};
pub use head::{coral_forward, dual_loss, CoralOutput, Example, Head, HeadKind, Model, ModelError, ModelKind};
pub use loss::{
    binary_decode, binary_loss, coral_decode, coral_loss, log_sigmoid, multiclass_decode, multiclass_loss, sigmoid,
    softplus, CORAL_THRESHOLDS,
};
pub use synth::{synthetic_binary, synthetic_ordinal};
pub use train::{grad_check, learning_rate_at, train, AdamW, GradCheck, TrainConfig, TrainError, Trained, Trainer};
