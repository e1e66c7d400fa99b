//! Offline mini-batch training with early stopping.
//!
//! Each epoch shuffles the samples (seeded), walks them in batches, sums
//! per-sample gradients from backpropagation through time, and takes one
//! optimizer step per batch. Validation runs after every epoch with
//! dropout off; the best-validation parameters are what training returns.

use std::path::Path;

use thiserror::Error;

use crate::data::SlidingWindowSample;
use crate::loss::{batch_grads, batch_loss, LossConfig, LossError};
use crate::model::{backward, forward, predict, Mode, ModelError, ModelParams};
use crate::optimizer::{
    adam_step, clip_gradients, sgd_step, OptimizerError, OptimizerState, DEFAULT_CLIP_NORM,
    DEFAULT_ETA,
};
use crate::rng::SeededRng;

/// Abort the epoch when a batch loss exceeds this, in normalized units.
pub const DIVERGENCE_CEILING: f64 = 1e6;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}, batch {batch}; best finite parameters kept")]
    Diverged {
        epoch: usize,
        batch: usize,
        best: Box<ModelParams<f64>>,
        history: Vec<EpochStats>,
    },
    #[error("failed to write {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerChoice {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerChoice,
    pub eta: f64,
    pub clip_norm: Option<f64>,
    pub loss: LossConfig,
    /// Consecutive epochs without improvement tolerated before stopping.
    pub patience_epochs: usize,
    /// An epoch counts as an improvement when it beats the best validation
    /// loss by more than this.
    pub min_delta: f64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            seed: 0,
            optimizer: OptimizerChoice::Adam,
            eta: DEFAULT_ETA,
            clip_norm: Some(DEFAULT_CLIP_NORM),
            loss: LossConfig::default(),
            patience_epochs: 10,
            min_delta: 0.0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if !self.eta.is_finite() || self.eta <= 0.0 {
            return Err(TrainError::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if !self.min_delta.is_finite() || self.min_delta < 0.0 {
            return Err(TrainError::Config(format!(
                "min_delta must be non-negative, got {}",
                self.min_delta
            )));
        }
        if let Some(n) = self.clip_norm {
            if !n.is_finite() || n <= 0.0 {
                return Err(TrainError::Config(format!("clip_norm must be positive, got {n}")));
            }
        }
        Ok(())
    }
}

/// Losses recorded after one epoch. `train_loss` is the running mean over
/// the epoch's batches, so it reflects parameters that moved mid-epoch;
/// `val_loss` is evaluated once with the end-of-epoch parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

fn targets_of(samples: &[SlidingWindowSample]) -> Vec<Vec<f64>> {
    samples.iter().map(|s| s.target.y.clone()).collect()
}

/// Composite loss of `params` on `samples`, dropout off.
pub fn evaluate(
    params: &ModelParams<f64>,
    samples: &[SlidingWindowSample],
    loss_cfg: &LossConfig,
) -> Result<f64, TrainError> {
    let mut preds = Vec::with_capacity(samples.len());
    for s in samples {
        preds.push(predict(params, &s.input_tensors())?);
    }
    Ok(batch_loss(&preds, &targets_of(samples), loss_cfg)?)
}

/// Summed per-sample parameter gradients of the batch objective, traces
/// taken in `mode`. The per-day weights of the batch objective are already
/// folded in by [`batch_grads`], so plain summation yields the gradient of
/// the batch loss.
pub fn batch_gradient(
    params: &ModelParams<f64>,
    samples: &[SlidingWindowSample],
    loss_cfg: &LossConfig,
    mut mode: Mode,
) -> Result<(f64, ModelParams<f64>), TrainError> {
    let mut traces = Vec::with_capacity(samples.len());
    let mut preds = Vec::with_capacity(samples.len());
    for s in samples {
        let trace = match &mut mode {
            Mode::Train(rng) => forward(params, &s.input_tensors(), Mode::Train(rng))?,
            Mode::Infer => forward(params, &s.input_tensors(), Mode::Infer)?,
        };
        preds.push(trace.prediction.clone());
        traces.push(trace);
    }
    let targets = targets_of(samples);
    let loss = batch_loss(&preds, &targets, loss_cfg)?;
    let d_preds = batch_grads(&preds, &targets, loss_cfg)?;
    let mut acc = vec![0.0; params.param_count()];
    for (trace, dp) in traces.iter().zip(&d_preds) {
        let g = backward(params, trace, dp)?;
        for (a, v) in acc.iter_mut().zip(g.flatten()) {
            *a += v;
        }
    }
    let mut grads = params.zeros_like();
    grads.load_flat(&acc).expect("same shape");
    Ok((loss, grads))
}

/// Train from `model0`, returning the best-validation parameters and the
/// per-epoch history. Fully deterministic for a given config and data.
pub fn train(
    model0: &ModelParams<f64>,
    samples: &[SlidingWindowSample],
    val_samples: &[SlidingWindowSample],
    cfg: &TrainConfig,
) -> Result<(ModelParams<f64>, Vec<EpochStats>), TrainError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(TrainError::Config("no training samples".into()));
    }
    if val_samples.is_empty() {
        return Err(TrainError::Config("no validation samples".into()));
    }
    let train_dates: std::collections::BTreeSet<_> =
        samples.iter().map(|s| s.target.date).collect();
    if let Some(v) = val_samples.iter().find(|v| train_dates.contains(&v.target.date)) {
        return Err(TrainError::Config(format!(
            "validation day {} also appears in the training set",
            v.target.date
        )));
    }

    let mut rng = SeededRng::new(cfg.seed);
    let mut params = model0.clone();
    let mut opt = match cfg.optimizer {
        OptimizerChoice::Sgd => None,
        OptimizerChoice::Adam => Some(OptimizerState::adam(cfg.eta, &params)),
    };

    let mut best_params = model0.clone();
    let mut best_val = f64::INFINITY;
    let mut epochs_since_best = 0usize;
    let mut history: Vec<EpochStats> = Vec::new();

    // An exploded model shows up either as a loss past the ceiling or as a
    // numeric failure inside the loss (NaN, or softmax underflowing to a
    // zero probability). Both are divergence, not caller mistakes.
    let is_numeric_blowup = |e: &TrainError| {
        matches!(e, TrainError::Loss(LossError::NonFinite(_) | LossError::BadProbability(_)))
    };

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        if cfg.shuffle {
            rng.shuffle(&mut order);
        }
        let mut loss_sum = 0.0;
        let mut day_count = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<SlidingWindowSample> =
                chunk.iter().map(|&i| samples[i].clone()).collect();
            let diverged = |best: ModelParams<f64>, history: Vec<EpochStats>| {
                TrainError::Diverged {
                    epoch,
                    batch: batch_idx + 1,
                    best: Box::new(best),
                    history,
                }
            };
            let (loss, grads) =
                match batch_gradient(&params, &batch, &cfg.loss, Mode::Train(&mut rng)) {
                    Ok(v) => v,
                    Err(e) if is_numeric_blowup(&e) => {
                        return Err(diverged(best_params, history))
                    }
                    Err(e) => return Err(e),
                };
            if !loss.is_finite() || loss > DIVERGENCE_CEILING {
                return Err(diverged(best_params, history));
            }
            loss_sum += loss * batch.len() as f64;
            day_count += batch.len();
            let grads = match cfg.clip_norm {
                Some(n) => clip_gradients(grads, n),
                None => grads,
            };
            params = match opt.take() {
                None => sgd_step(&params, &grads, cfg.eta)?,
                Some(state) => {
                    let (next, state) = adam_step(state, &params, &grads)?;
                    opt = Some(state);
                    next
                }
            };
        }
        let train_loss = loss_sum / day_count as f64;
        let n_batches = samples.len().div_ceil(cfg.batch_size);
        let val_loss = match evaluate(&params, val_samples, &cfg.loss) {
            Ok(v) => v,
            // Blame the epoch's last step: that is where the parameters
            // the validation pass choked on came from.
            Err(e) if is_numeric_blowup(&e) => {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: n_batches,
                    best: Box::new(best_params),
                    history,
                })
            }
            Err(e) => return Err(e),
        };
        history.push(EpochStats { epoch, train_loss, val_loss });
        if best_val - val_loss > cfg.min_delta {
            best_val = val_loss;
            best_params = params.clone();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= cfg.patience_epochs {
                log::info!(
                    "early stop after epoch {epoch}: no improvement in {} epochs",
                    epochs_since_best
                );
                break;
            }
        }
    }
    Ok((best_params, history))
}

/// Write the epoch history as CSV: epoch, train_loss, val_loss.
pub fn write_history_csv(path: &Path, history: &[EpochStats]) -> Result<(), TrainError> {
    let io_err = |source: std::io::Error| TrainError::Io {
        file: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => io_err(io),
        other => TrainError::Config(format!("cannot write {}: {other:?}", path.display())),
    })?;
    let rows = std::iter::once(["epoch".to_string(), "train_loss".to_string(), "val_loss".to_string()])
        .chain(history.iter().map(|e| {
            [e.epoch.to_string(), format!("{}", e.train_loss), format!("{}", e.val_loss)]
        }));
    for row in rows {
        w.write_record(&row)
            .map_err(|e| TrainError::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    w.flush().map_err(io_err)
}
