use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::head::{Example, Model, ModelError, ModelKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Linear warm-up length in optimizer steps; clipped to the total.
    pub warmup_steps: usize,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden_dim: usize,
    pub lambda_bin: f64,
    pub lambda_ordinal: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 8,
            warmup_steps: 200,
            weight_decay: 0.01,
            epochs: 20,
            seed: 0,
            hidden_dim: 768,
            lambda_bin: 1.0,
            lambda_ordinal: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    /// Settings used when fine-tuning heads together with a pretrained
    /// transformer encoder; far too slow for heads trained on fixed features.
    pub fn encoder_fine_tuning() -> Self {
        TrainConfig {
            learning_rate: 7.5e-6,
            ..TrainConfig::default()
        }
    }

    fn validate(&self) -> Result<(), TrainError> {
        let bad = |what: &str| Err(TrainError::InvalidConfig(String::from(what)));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive");
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad("weight_decay must be non-negative");
        }
        if !(self.lambda_bin >= 0.0 && self.lambda_ordinal >= 0.0) {
            return bad("loss weights must be non-negative");
        }
        Ok(())
    }
}

/// Learning rate for optimizer step `step` (1-based): rises linearly as
/// `learning_rate * step / warmup` while `step < warmup`, then stays flat.
/// `warmup` is `warmup_steps` clipped to `total_steps`.
pub fn learning_rate_at(config: &TrainConfig, step: usize, total_steps: usize) -> f64 {
    let warmup = config.warmup_steps.min(total_steps);
    if step < warmup {
        config.learning_rate * step as f64 / warmup as f64
    } else {
        config.learning_rate
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("example {id}: {source}")]
    Example { id: String, source: ModelError },
    #[error("non-finite loss at step {step}, batch {batch} of epoch {epoch}")]
    NonFiniteLoss { epoch: usize, step: usize, batch: usize },
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    pub fn new(params: usize, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        AdamW {
            beta1,
            beta2,
            eps,
            weight_decay,
            m: vec![0.0; params],
            v: vec![0.0; params],
            t: 0,
        }
    }

    /// One update of `model` from `grad` (same shape). Decay is applied only
    /// to parameters flagged for it.
    pub fn step(&mut self, model: &mut Model, grad: &Model, lr: f64) {
        self.t += 1;
        let grads = grad.flat_params();
        let bc1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        let mut i = 0;
        model.visit_params_mut(|p, decay| {
            let g = grads[i];
            if decay {
                *p -= lr * self.weight_decay * *p;
            }
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            *p -= lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            i += 1;
        });
    }
}

/// Mini-batch trainer that can be driven one epoch at a time.
pub struct Trainer {
    model: Model,
    config: TrainConfig,
    optimizer: AdamW,
    rng: ChaCha8Rng,
    step: usize,
    total_steps: usize,
    epoch: usize,
}

// seed offset for the batch-order stream
const SHUFFLE_STREAM: u64 = 0x7368_7566_666c;

impl Trainer {
    /// Starts from a freshly initialized model of `kind` sized for `data`.
    pub fn new(kind: ModelKind, config: TrainConfig, data: &[Example]) -> Result<Self, TrainError> {
        config.validate()?;
        let dim = check_dataset(data)?;
        let model = Model::random(kind, dim, config.hidden_dim, config.seed)
            .with_loss_weights(config.lambda_bin, config.lambda_ordinal);
        Ok(Self::from_model(model, config, data.len()))
    }

    /// Continues from an existing model; `n_examples` sizes the warm-up.
    pub fn from_model(model: Model, config: TrainConfig, n_examples: usize) -> Self {
        let steps_per_epoch = n_examples.div_ceil(config.batch_size.max(1));
        Trainer {
            optimizer: AdamW::new(
                model.param_count(),
                config.beta1,
                config.beta2,
                config.eps,
                config.weight_decay,
            ),
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM),
            step: 0,
            total_steps: steps_per_epoch * config.epochs,
            epoch: 0,
            model,
            config,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// One pass over `data` in a seeded random order; returns the mean
    /// per-example loss seen during the pass.
    pub fn run_epoch(&mut self, data: &[Example]) -> Result<f64, TrainError> {
        if data.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut grad = self.model.zeros_like();
        let mut epoch_loss = 0.0;
        for (batch, chunk) in order.chunks(self.config.batch_size).enumerate() {
            self.step += 1;
            let non_finite = TrainError::NonFiniteLoss {
                epoch: self.epoch,
                step: self.step,
                batch,
            };
            grad.visit_params_mut(|g, _| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in chunk {
                let ex = &data[i];
                batch_loss += match self.model.loss_and_grad(ex, &mut grad) {
                    Ok(loss) => loss,
                    Err(ModelError::NonFinite(_)) => return Err(non_finite),
                    Err(source) => {
                        return Err(TrainError::Example {
                            id: ex.id.clone(),
                            source,
                        })
                    }
                };
            }
            if !batch_loss.is_finite() {
                return Err(non_finite);
            }
            epoch_loss += batch_loss;
            let scale = 1.0 / chunk.len() as f64;
            grad.visit_params_mut(|g, _| *g *= scale);
            let lr = learning_rate_at(&self.config, self.step, self.total_steps);
            self.optimizer.step(&mut self.model, &grad, lr);
        }
        self.epoch += 1;
        Ok(epoch_loss / data.len() as f64)
    }
}

fn check_dataset(data: &[Example]) -> Result<usize, TrainError> {
    let first = data.first().ok_or(TrainError::EmptyDataset)?;
    let dim = first.features.len();
    for ex in data {
        let err = |source| TrainError::Example {
            id: ex.id.clone(),
            source,
        };
        if ex.features.len() != dim {
            return Err(err(ModelError::DimensionMismatch {
                expected: dim,
                got: ex.features.len(),
            }));
        }
        if ex.features.iter().any(|v| !v.is_finite()) {
            return Err(err(ModelError::NonFinite("features")));
        }
    }
    Ok(dim)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trained {
    pub model: Model,
    /// Mean training loss of every epoch.
    pub history: Vec<f64>,
}

pub fn train(data: &[Example], kind: ModelKind, config: &TrainConfig) -> Result<Trained, TrainError> {
    let mut trainer = Trainer::new(kind, config.clone(), data)?;
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        history.push(trainer.run_epoch(data)?);
    }
    Ok(Trained {
        model: trainer.into_model(),
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub max_abs_error: f64,
    /// `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    pub params_checked: usize,
}

impl GradCheck {
    /// Denominator floor of the relative error; below it the comparison is
    /// effectively absolute.
    pub const FLOOR: f64 = 1e-4;
}

/// Compares the analytic gradient of the summed loss over `sample` with
/// central finite differences of step `h`, for every parameter.
pub fn grad_check(model: &Model, sample: &[Example], h: f64) -> Result<GradCheck, ModelError> {
    let total_loss = |m: &Model| -> Result<f64, ModelError> {
        let mut sum = 0.0;
        for ex in sample {
            sum += m.loss(ex)?;
        }
        Ok(sum)
    };
    let mut grad = model.zeros_like();
    for ex in sample {
        model.loss_and_grad(ex, &mut grad)?;
    }
    let analytic = grad.flat_params();
    let base = model.flat_params();
    let mut probe = model.clone();
    let mut result = GradCheck {
        max_abs_error: 0.0,
        max_rel_error: 0.0,
        params_checked: analytic.len(),
    };
    for (idx, &a) in analytic.iter().enumerate() {
        let original = base[idx];
        set_param(&mut probe, idx, original + h);
        let plus = total_loss(&probe)?;
        set_param(&mut probe, idx, original - h);
        let minus = total_loss(&probe)?;
        set_param(&mut probe, idx, original);
        let numeric = (plus - minus) / (2.0 * h);
        let abs = (a - numeric).abs();
        let rel = abs / a.abs().max(numeric.abs()).max(GradCheck::FLOOR);
        result.max_abs_error = result.max_abs_error.max(abs);
        result.max_rel_error = result.max_rel_error.max(rel);
    }
    Ok(result)
}

fn set_param(model: &mut Model, index: usize, value: f64) {
    let mut i = 0;
    model.visit_params_mut(|p, _| {
        if i == index {
            *p = value;
        }
        i += 1;
    });
}
