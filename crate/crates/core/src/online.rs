//! Validation-gated online updates, plus the static and dynamic regimes
//! they are compared against.
//!
//! The online step proposes one plain gradient step on each incoming
//! batch (dropout off, frozen layers' gradients zeroed) and keeps it only
//! when it improves the validation loss by strictly more than the margin
//! delta; otherwise the batch is discarded and the parameters stand.
//! Every step leaves an audit record from which the accept decision can
//! be recomputed.

use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

use crate::data::SlidingWindowSample;
use crate::loss::{LossConfig, LossError};
use crate::model::{
    init_params, predict, LayerId, Mode, ModelError, ModelParams, ModelSpec,
};
use crate::optimizer::{sgd_step, OptimizerError};
use crate::rng::SeededRng;
use crate::trainer::{batch_gradient, evaluate, train, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum OnlineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("invalid online configuration: {0}")]
    Config(String),
    #[error("failed to write {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

/// Which parameter blocks stay untouched during online updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreezeMask {
    pub layer1: bool,
    pub layer2: bool,
    pub dense: bool,
}

impl Default for FreezeMask {
    fn default() -> Self {
        Self { layer1: true, layer2: false, dense: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValidationPolicy {
    /// The validation set stays as supplied.
    Fixed,
    /// After each batch, the validation set becomes the most recent
    /// `window_days` labeled days.
    Rolling { window_days: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineConfig {
    pub eta: f64,
    /// Required validation improvement; a candidate is kept only when
    /// val_before - val_after exceeds this strictly. +infinity shuts the
    /// gate entirely.
    pub delta: f64,
    pub freeze: FreezeMask,
    pub validation_policy: ValidationPolicy,
    /// Days per update batch.
    pub batch_granularity: usize,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            eta: 1e-2,
            delta: 0.0,
            freeze: FreezeMask::default(),
            validation_policy: ValidationPolicy::Fixed,
            batch_granularity: 1,
        }
    }
}

impl OnlineConfig {
    fn validate(&self) -> Result<(), OnlineError> {
        if !self.eta.is_finite() || self.eta < 0.0 {
            return Err(OnlineError::Config(format!(
                "eta must be finite and non-negative, got {}",
                self.eta
            )));
        }
        if self.delta.is_nan() || self.delta < 0.0 {
            return Err(OnlineError::Config(format!(
                "delta must be non-negative, got {}",
                self.delta
            )));
        }
        if self.freeze.layer1 && self.freeze.layer2 && self.freeze.dense {
            return Err(OnlineError::Config("every layer is frozen; nothing can update".into()));
        }
        if self.batch_granularity == 0 {
            return Err(OnlineError::Config("batch_granularity must be at least 1".into()));
        }
        if let ValidationPolicy::Rolling { window_days } = self.validation_policy {
            if window_days == 0 {
                return Err(OnlineError::Config(
                    "rolling validation needs window_days of at least 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Chronological split: past labeled days to train on, a validation set
/// after them, and the stream of future days arriving in order. Windows
/// are built before the split, so every sample here is self-contained.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<SlidingWindowSample>,
    pub validation: Vec<SlidingWindowSample>,
    pub stream: Vec<SlidingWindowSample>,
}

impl DatasetSplit {
    /// Enforce strict date order: train before validation before stream,
    /// stream strictly ascending. Shared days would let a label leak into
    /// the gate before that day is predicted.
    pub fn validate(&self) -> Result<(), OnlineError> {
        let max_date = |s: &[SlidingWindowSample]| s.iter().map(|x| x.target.date).max();
        let min_date = |s: &[SlidingWindowSample]| s.iter().map(|x| x.target.date).min();
        if let (Some(t), Some(v)) = (max_date(&self.train), min_date(&self.validation)) {
            if t >= v {
                return Err(OnlineError::Config(format!(
                    "training runs to {t} but validation starts at {v}"
                )));
            }
        }
        let before_stream = max_date(&self.validation).or_else(|| max_date(&self.train));
        if let (Some(b), Some(s)) = (before_stream, min_date(&self.stream)) {
            if b >= s {
                return Err(OnlineError::Config(format!(
                    "labeled data runs to {b} but the stream starts at {s}"
                )));
            }
        }
        for pair in self.stream.windows(2) {
            if pair[0].target.date >= pair[1].target.date {
                return Err(OnlineError::Config(format!(
                    "stream is not strictly chronological at {}",
                    pair[1].target.date
                )));
            }
        }
        Ok(())
    }
}

/// One row of the update audit. `date` is the latest target date in the
/// batch; `param_delta_norm` is the L2 size of the proposed step, applied
/// only when `accepted`. A skipped row (step error) carries NaN losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineAuditRecord {
    pub date: NaiveDate,
    pub batch_loss: f64,
    pub val_before: f64,
    pub val_after: f64,
    pub accepted: bool,
    pub delta: f64,
    pub eta: f64,
    pub param_delta_norm: f64,
    pub skipped: bool,
}

impl OnlineAuditRecord {
    fn skipped(date: NaiveDate, cfg: &OnlineConfig) -> Self {
        Self {
            date,
            batch_loss: f64::NAN,
            val_before: f64::NAN,
            val_after: f64::NAN,
            accepted: false,
            delta: cfg.delta,
            eta: cfg.eta,
            param_delta_norm: f64::NAN,
            skipped: true,
        }
    }
}

/// A day's 24-hour forecast, in the (normalized) units the model works in.
#[derive(Debug, Clone, PartialEq)]
pub struct DayForecast {
    pub date: NaiveDate,
    pub predicted: Vec<f64>,
}

fn is_numeric_blowup(e: &TrainError) -> bool {
    matches!(e, TrainError::Loss(LossError::NonFinite(_) | LossError::BadProbability(_)))
}

/// One gated update. Proposes theta' = theta* - eta * grad (frozen blocks
/// zeroed, dropout off), accepts it only when the validation loss drops
/// by strictly more than delta, and always returns an audit record.
pub fn online_step(
    theta_star: &ModelParams<f64>,
    batch: &[SlidingWindowSample],
    val: &[SlidingWindowSample],
    cfg: &OnlineConfig,
    loss_cfg: &LossConfig,
) -> Result<(ModelParams<f64>, OnlineAuditRecord), OnlineError> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(OnlineError::Config("online batch is empty".into()));
    }
    if val.is_empty() {
        return Err(OnlineError::Config("validation set is empty".into()));
    }
    let date = batch.iter().map(|s| s.target.date).max().expect("non-empty");

    let (batch_loss, mut grads) = batch_gradient(theta_star, batch, loss_cfg, Mode::Infer)?;
    if cfg.freeze.layer1 {
        grads.zero_layer(LayerId::Lstm1);
    }
    if cfg.freeze.layer2 {
        grads.zero_layer(LayerId::Lstm2);
    }
    if cfg.freeze.dense {
        grads.zero_layer(LayerId::Head);
    }
    let candidate = sgd_step(theta_star, &grads, cfg.eta)?;
    let param_delta_norm = candidate
        .flatten()
        .iter()
        .zip(theta_star.flatten())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();

    let val_before = evaluate(theta_star, val, loss_cfg)?;
    // A numerically broken candidate cannot be "significantly better";
    // treat its validation loss as infinite so the gate rejects it.
    let val_after = match evaluate(&candidate, val, loss_cfg) {
        Ok(v) => v,
        Err(e) if is_numeric_blowup(&e) => {
            log::warn!("candidate at {date} is numerically broken: {e}");
            f64::INFINITY
        }
        Err(e) => return Err(e.into()),
    };

    let accepted = val_before - val_after > cfg.delta;
    let next = if accepted { candidate } else { theta_star.clone() };
    let record = OnlineAuditRecord {
        date,
        batch_loss,
        val_before,
        val_after,
        accepted,
        delta: cfg.delta,
        eta: cfg.eta,
        param_delta_norm,
        skipped: false,
    };
    Ok((next, record))
}

/// Everything a gated online run produces.
#[derive(Debug, Clone)]
pub struct OnlineRun {
    pub params: ModelParams<f64>,
    pub audit: Vec<OnlineAuditRecord>,
    pub forecasts: Vec<DayForecast>,
}

/// Walk the stream in `batch_granularity`-day batches. Each day is
/// forecast with the parameters held BEFORE its labels are used for
/// anything, then the batch feeds one gated update. Step errors are
/// logged, audited as skipped, and the run continues unchanged.
pub fn run_online(
    model0: &ModelParams<f64>,
    split: &DatasetSplit,
    cfg: &OnlineConfig,
    loss_cfg: &LossConfig,
) -> Result<OnlineRun, OnlineError> {
    cfg.validate()?;
    split.validate()?;
    if !split.stream.is_empty() && split.validation.is_empty() {
        return Err(OnlineError::Config("online run needs a validation set".into()));
    }
    let mut params = model0.clone();
    let mut val = split.validation.clone();
    let mut audit = Vec::new();
    let mut forecasts = Vec::with_capacity(split.stream.len());
    for batch in split.stream.chunks(cfg.batch_granularity) {
        for s in batch {
            forecasts.push(DayForecast {
                date: s.target.date,
                predicted: predict(&params, &s.input_tensors())?,
            });
        }
        match online_step(&params, batch, &val, cfg, loss_cfg) {
            Ok((next, record)) => {
                params = next;
                audit.push(record);
            }
            Err(e) => {
                let date = batch.iter().map(|s| s.target.date).max().expect("non-empty");
                log::warn!("skipping online step at {date}: {e}");
                audit.push(OnlineAuditRecord::skipped(date, cfg));
            }
        }
        if let ValidationPolicy::Rolling { window_days } = cfg.validation_policy {
            val.extend(batch.iter().cloned());
            let excess = val.len().saturating_sub(window_days);
            val.drain(..excess);
        }
    }
    Ok(OnlineRun { params, audit, forecasts })
}

/// Forecast every stream day with the fixed model.
pub fn run_static(
    model0: &ModelParams<f64>,
    split: &DatasetSplit,
) -> Result<Vec<DayForecast>, OnlineError> {
    split.validate()?;
    let mut forecasts = Vec::with_capacity(split.stream.len());
    for s in &split.stream {
        forecasts.push(DayForecast {
            date: s.target.date,
            predicted: predict(model0, &s.input_tensors())?,
        });
    }
    Ok(forecasts)
}

/// Before each stream day, re-initialize from a day-indexed seed and
/// retrain on everything labeled so far (the split's validation set keeps
/// its early-stopping role), then forecast that day. `epochs: 0` disables
/// retraining and forecasts with each day's fresh initialization.
pub fn run_dynamic(
    spec: &ModelSpec,
    split: &DatasetSplit,
    trainer_cfg: &TrainConfig,
) -> Result<Vec<DayForecast>, OnlineError> {
    split.validate()?;
    let mut forecasts = Vec::with_capacity(split.stream.len());
    let mut history = split.train.clone();
    for (day_index, s) in split.stream.iter().enumerate() {
        let mut rng = SeededRng::derive(trainer_cfg.seed, &[day_index as u64]);
        let model0 = init_params(spec, &mut rng);
        let params = if trainer_cfg.epochs == 0 {
            model0
        } else {
            match train(&model0, &history, &split.validation, trainer_cfg) {
                Ok((best, _)) => best,
                Err(TrainError::Diverged { best, epoch, batch, .. }) => {
                    log::warn!(
                        "dynamic retrain for {} diverged at epoch {epoch} batch {batch}; \
                         using last finite parameters",
                        s.target.date
                    );
                    *best
                }
                Err(e) => return Err(e.into()),
            }
        };
        forecasts.push(DayForecast {
            date: s.target.date,
            predicted: predict(&params, &s.input_tensors())?,
        });
        history.push(s.clone());
    }
    Ok(forecasts)
}

/// Write the audit as CSV: date, batch_loss, val_before, val_after,
/// accepted, delta, eta, param_delta_norm.
pub fn write_audit_csv(path: &Path, audit: &[OnlineAuditRecord]) -> Result<(), OnlineError> {
    let io_err = |source: std::io::Error| OnlineError::Io {
        file: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => io_err(io),
        other => OnlineError::Config(format!("cannot write {}: {other:?}", path.display())),
    })?;
    let header = [
        "date",
        "batch_loss",
        "val_before",
        "val_after",
        "accepted",
        "delta",
        "eta",
        "param_delta_norm",
    ];
    w.write_record(header)
        .map_err(|e| OnlineError::Config(format!("cannot write {}: {e}", path.display())))?;
    for r in audit {
        let row = [
            r.date.to_string(),
            format!("{}", r.batch_loss),
            format!("{}", r.val_before),
            format!("{}", r.val_after),
            r.accepted.to_string(),
            format!("{}", r.delta),
            format!("{}", r.eta),
            format!("{}", r.param_delta_norm),
        ];
        w.write_record(&row)
            .map_err(|e| OnlineError::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{
        apply_normalize, build_windows, fit_normalize, normalize_prices, synth_market,
        SynthConfig, WindowConfig,
    };
    use crate::model::OUTPUT_HOURS;
    use crate::trainer::OptimizerChoice;

    /// Normalized samples from a quiet synthetic market, split
    /// train/validation/stream by date.
    fn make_split(seed: u64, train: usize, val: usize, stream: usize) -> DatasetSplit {
        let cfg = SynthConfig { days: 90, seed, noise_sd: 0.5, ..Default::default() };
        let (days, prices) = synth_market(&cfg).unwrap();
        let stats = fit_normalize(&days[..50], &prices[..50]).unwrap();
        let days = apply_normalize(&days, &stats).unwrap();
        let prices = normalize_prices(&prices, &stats);
        let samples =
            build_windows(&days, &prices, WindowConfig { lookback: 3, ..Default::default() })
                .unwrap();
        assert!(samples.len() >= train + val + stream);
        DatasetSplit {
            train: samples[..train].to_vec(),
            validation: samples[train..train + val].to_vec(),
            stream: samples[train + val..train + val + stream].to_vec(),
        }
    }

    fn model_for(split: &DatasetSplit, seed: u64) -> ModelParams<f64> {
        let spec = ModelSpec {
            feature_count: split.train[0].window[0].features.rows(),
            hidden_size: 6,
            dropout_rate: 0.0,
        };
        init_params(&spec, &mut SeededRng::new(seed))
    }

    #[test]
    fn zero_eta_changes_nothing_and_is_rejected() {
        let split = make_split(1, 10, 4, 2);
        let model = model_for(&split, 5);
        let cfg = OnlineConfig { eta: 0.0, ..Default::default() };
        let (next, record) = online_step(
            &model,
            &split.stream[..1],
            &split.validation,
            &cfg,
            &LossConfig::default(),
        )
        .unwrap();
        assert!(!record.accepted);
        assert_eq!(record.val_before.to_bits(), record.val_after.to_bits());
        assert_eq!(record.param_delta_norm, 0.0);
        for (a, b) in next.flatten().iter().zip(model.flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn infinite_delta_run_equals_the_static_run() {
        let split = make_split(2, 10, 4, 6);
        let model = model_for(&split, 6);
        let cfg = OnlineConfig { delta: f64::INFINITY, eta: 0.05, ..Default::default() };
        let run = run_online(&model, &split, &cfg, &LossConfig::default()).unwrap();
        assert!(run.audit.iter().all(|r| !r.accepted && !r.skipped));
        for (a, b) in run.params.flatten().iter().zip(model.flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let static_run = run_static(&model, &split).unwrap();
        assert_eq!(run.forecasts.len(), static_run.len());
        for (a, b) in run.forecasts.iter().zip(&static_run) {
            assert_eq!(a.date, b.date);
            for (x, y) in a.predicted.iter().zip(&b.predicted) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn accepted_step_keeps_frozen_layer_bit_identical() {
        let split = make_split(3, 10, 4, 1);
        let model = model_for(&split, 7);
        // Validating on the batch itself guarantees a small step helps.
        let batch = &split.stream[..1];
        let cfg = OnlineConfig { eta: 1e-3, ..Default::default() };
        let (next, record) =
            online_step(&model, batch, batch, &cfg, &LossConfig::default()).unwrap();
        assert!(record.accepted, "descent step on the validation batch must pass the gate");
        let r1 = model.layer_range(LayerId::Lstm1);
        let before = model.flatten();
        let after = next.flatten();
        for i in r1.clone() {
            assert_eq!(before[i].to_bits(), after[i].to_bits());
        }
        assert!(
            (r1.end..before.len()).any(|i| before[i].to_bits() != after[i].to_bits()),
            "unfrozen blocks should move"
        );
    }

    #[test]
    fn freezing_all_but_the_head_touches_only_the_head() {
        let split = make_split(4, 10, 4, 1);
        let model = model_for(&split, 8);
        let batch = &split.stream[..1];
        let cfg = OnlineConfig {
            eta: 1e-3,
            freeze: FreezeMask { layer1: true, layer2: true, dense: false },
            ..Default::default()
        };
        let (next, record) =
            online_step(&model, batch, batch, &cfg, &LossConfig::default()).unwrap();
        assert!(record.accepted);
        let head = model.layer_range(LayerId::Head);
        let before = model.flatten();
        let after = next.flatten();
        for i in 0..head.start {
            assert_eq!(before[i].to_bits(), after[i].to_bits());
        }
        assert!(head.clone().any(|i| before[i].to_bits() != after[i].to_bits()));
    }

    #[test]
    fn audit_chains_and_gate_soundness_hold_on_a_seeded_run() {
        let split = make_split(5, 12, 5, 10);
        let model = model_for(&split, 9);
        let cfg = OnlineConfig { eta: 0.02, delta: 1e-3, ..Default::default() };
        let run = run_online(&model, &split, &cfg, &LossConfig::default()).unwrap();
        assert_eq!(run.audit.len(), 10);
        let accepted: Vec<bool> = run.audit.iter().map(|r| r.accepted).collect();
        assert!(accepted.iter().any(|&a| a), "want at least one accept in this seed");
        assert!(accepted.iter().any(|&a| !a), "want at least one reject in this seed");
        for r in &run.audit {
            assert!(!r.skipped);
            assert_eq!(r.accepted, r.val_before - r.val_after > r.delta);
        }
        // Fixed validation set: the next step's val_before must equal the
        // accepted candidate's val_after, or the unchanged val_before.
        for pair in run.audit.windows(2) {
            let expect =
                if pair[0].accepted { pair[0].val_after } else { pair[0].val_before };
            assert_eq!(pair[1].val_before.to_bits(), expect.to_bits());
        }
    }

    #[test]
    fn rejected_candidate_leaves_predictions_bit_identical() {
        let split = make_split(6, 10, 4, 1);
        let model = model_for(&split, 10);
        let cfg = OnlineConfig { eta: 0.02, delta: 1e9, ..Default::default() };
        let (next, record) = online_step(
            &model,
            &split.stream[..1],
            &split.validation,
            &cfg,
            &LossConfig::default(),
        )
        .unwrap();
        assert!(!record.accepted);
        let probe = split.stream[0].input_tensors();
        let a = predict(&model, &probe).unwrap();
        let b = predict(&next, &probe).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn rolling_validation_matches_a_manual_replay() {
        let split = make_split(7, 10, 3, 6);
        let model = model_for(&split, 11);
        let cfg = OnlineConfig {
            eta: 0.02,
            validation_policy: ValidationPolicy::Rolling { window_days: 4 },
            ..Default::default()
        };
        let loss_cfg = LossConfig::default();
        let run = run_online(&model, &split, &cfg, &loss_cfg).unwrap();

        let mut params = model.clone();
        let mut val = split.validation.clone();
        let mut manual = Vec::new();
        for batch in split.stream.chunks(1) {
            let (next, record) =
                online_step(&params, batch, &val, &cfg, &loss_cfg).unwrap();
            params = next;
            manual.push(record);
            val.extend(batch.iter().cloned());
            let excess = val.len().saturating_sub(4);
            val.drain(..excess);
        }
        assert_eq!(run.audit.len(), manual.len());
        for (a, b) in run.audit.iter().zip(&manual) {
            assert_eq!(a.date, b.date);
            assert_eq!(a.val_before.to_bits(), b.val_before.to_bits());
            assert_eq!(a.val_after.to_bits(), b.val_after.to_bits());
            assert_eq!(a.accepted, b.accepted);
        }
        // The rolling set actually moved: a fixed-policy run must diverge
        // from this one somewhere in the audit.
        let fixed = run_online(
            &model,
            &split,
            &OnlineConfig { validation_policy: ValidationPolicy::Fixed, ..cfg },
            &loss_cfg,
        )
        .unwrap();
        assert!(run
            .audit
            .iter()
            .zip(&fixed.audit)
            .any(|(r, f)| r.val_before.to_bits() != f.val_before.to_bits()));
    }

    #[test]
    fn empty_stream_returns_the_model_untouched() {
        let mut split = make_split(8, 10, 4, 2);
        split.stream.clear();
        let model = model_for(&split, 12);
        let run =
            run_online(&model, &split, &OnlineConfig::default(), &LossConfig::default())
                .unwrap();
        assert!(run.audit.is_empty());
        assert!(run.forecasts.is_empty());
        for (a, b) in run.params.flatten().iter().zip(model.flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn overlapping_split_dates_are_rejected() {
        let mut split = make_split(9, 10, 4, 2);
        split.stream.insert(0, split.validation.last().unwrap().clone());
        assert!(matches!(split.validate(), Err(OnlineError::Config(_))));
        let mut split2 = make_split(9, 10, 4, 2);
        split2.validation.push(split2.stream[0].clone());
        assert!(matches!(split2.validate(), Err(OnlineError::Config(_))));
    }

    #[test]
    fn fully_frozen_config_is_rejected() {
        let cfg = OnlineConfig {
            freeze: FreezeMask { layer1: true, layer2: true, dense: true },
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(OnlineError::Config(_))));
    }

    #[test]
    fn audit_csv_writes_the_documented_columns() {
        let split = make_split(10, 10, 4, 3);
        let model = model_for(&split, 13);
        let cfg = OnlineConfig { eta: 0.02, ..Default::default() };
        let run = run_online(&model, &split, &cfg, &LossConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.csv");
        write_audit_csv(&path, &run.audit).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("date,batch_loss,val_before,val_after,accepted,delta,eta,param_delta_norm")
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), run.audit.len());
        for (line, r) in rows.iter().zip(&run.audit) {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells[0], r.date.to_string());
            assert_eq!(cells[1].parse::<f64>().unwrap().to_bits(), r.batch_loss.to_bits());
            assert_eq!(cells[4], r.accepted.to_string());
            assert_eq!(
                cells[7].parse::<f64>().unwrap().to_bits(),
                r.param_delta_norm.to_bits()
            );
        }
    }

    #[test]
    fn zero_epoch_dynamic_forecasts_with_each_days_fresh_init() {
        let split = make_split(11, 10, 4, 3);
        let spec = ModelSpec {
            feature_count: split.train[0].window[0].features.rows(),
            hidden_size: 6,
            dropout_rate: 0.0,
        };
        let cfg = TrainConfig { epochs: 0, seed: 77, ..Default::default() };
        let forecasts = run_dynamic(&spec, &split, &cfg).unwrap();
        assert_eq!(forecasts.len(), 3);
        for (i, f) in forecasts.iter().enumerate() {
            let mut rng = SeededRng::derive(77, &[i as u64]);
            let fresh: ModelParams<f64> = init_params(&spec, &mut rng);
            let want = predict(&fresh, &split.stream[i].input_tensors()).unwrap();
            for (a, b) in f.predicted.iter().zip(&want) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    fn make_split_cfg(
        seed: u64,
        days: usize,
        noise_sd: f64,
        train: usize,
        val: usize,
        stream: usize,
    ) -> DatasetSplit {
        let cfg = SynthConfig { days, seed, noise_sd, ..Default::default() };
        let (feature_days, prices) = synth_market(&cfg).unwrap();
        let fit_len = train + 4;
        let stats = fit_normalize(&feature_days[..fit_len], &prices[..fit_len]).unwrap();
        let feature_days = apply_normalize(&feature_days, &stats).unwrap();
        let prices = normalize_prices(&prices, &stats);
        let samples = build_windows(
            &feature_days,
            &prices,
            WindowConfig { lookback: 3, ..Default::default() },
        )
        .unwrap();
        assert!(samples.len() >= train + val + stream);
        DatasetSplit {
            train: samples[..train].to_vec(),
            validation: samples[train..train + val].to_vec(),
            stream: samples[train + val..train + val + stream].to_vec(),
        }
    }

    // With a long stable history and a stream right behind it there is
    // nothing for per-day retraining to adapt to, so the two regimes
    // should land close together. A short stream keeps the comparison
    // inside the quasi-stationary stretch of the generator.
    #[test]
    fn dynamic_tracks_static_on_drift_free_data() {
        let split = make_split_cfg(12, 120, 0.5, 100, 6, 6);
        let spec = ModelSpec {
            feature_count: split.train[0].window[0].features.rows(),
            hidden_size: 8,
            dropout_rate: 0.0,
        };
        let trainer_cfg = TrainConfig {
            epochs: 200,
            batch_size: 8,
            eta: 1e-2,
            seed: 7,
            optimizer: OptimizerChoice::Adam,
            patience_epochs: 10,
            ..Default::default()
        };
        let model0 = init_params(&spec, &mut SeededRng::new(7));
        let (static_params, _) =
            train(&model0, &split.train, &split.validation, &trainer_cfg).unwrap();
        let static_forecasts = run_static(&static_params, &split).unwrap();
        let dynamic_forecasts = run_dynamic(&spec, &split, &trainer_cfg).unwrap();

        let mse = |forecasts: &[DayForecast]| {
            let mut acc = 0.0;
            let mut n = 0;
            for (f, s) in forecasts.iter().zip(&split.stream) {
                assert_eq!(f.date, s.target.date);
                for (p, y) in f.predicted.iter().zip(&s.target.y) {
                    acc += (p - y) * (p - y);
                    n += 1;
                }
            }
            acc / n as f64
        };
        let static_mse = mse(&static_forecasts);
        let dynamic_mse = mse(&dynamic_forecasts);
        let rel = (dynamic_mse - static_mse).abs() / static_mse;
        assert!(
            rel < 0.2,
            "dynamic {dynamic_mse} vs static {static_mse}: {rel:.3} relative gap"
        );
        assert_eq!(forecast_hours(&dynamic_forecasts), 6 * OUTPUT_HOURS);
    }

    fn forecast_hours(f: &[DayForecast]) -> usize {
        f.iter().map(|d| d.predicted.len()).sum()
    }
}
