//! Run configuration: defaults, TOML file, then flag overrides, merged
//! in that order and persisted next to the artifacts they produced.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use voltcast_core::data::{PeakProfile, SynthConfig, WindowConfig};
use voltcast_core::experiment::PipelineConfig;
use voltcast_core::loss::{BaseLoss, LossConfig};
use voltcast_core::model::ModelSpec;
use voltcast_core::online::{FreezeMask, OnlineConfig, ValidationPolicy};
use voltcast_core::trainer::{OptimizerChoice, TrainConfig};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub synth: SynthSection,
    pub model: ModelSection,
    pub loss: LossSection,
    pub train: TrainSection,
    pub online: OnlineSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub out_dir: PathBuf,
    pub prices: PathBuf,
    pub weather: Option<PathBuf>,
    pub fuel: Option<PathBuf>,
    /// Prior days per input window.
    pub lookback: usize,
    pub include_prediction_day: bool,
    pub train_days: usize,
    pub val_days: usize,
    pub withhold: Vec<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            out_dir: "runs/latest".into(),
            prices: "data/prices.csv".into(),
            weather: Some("data/weather.csv".into()),
            fuel: Some("data/fuel.csv".into()),
            lookback: 7,
            include_prediction_day: true,
            train_days: 60,
            val_days: 10,
            withhold: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub days: usize,
    pub seed: u64,
    pub noise_sd: f64,
    pub drift_day: Option<usize>,
    pub morning_hour: f64,
    pub evening_hour: f64,
    pub morning_height: f64,
    pub evening_height: f64,
    pub peak_width: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let p = PeakProfile::default();
        let c = SynthConfig::default();
        Self {
            days: c.days,
            seed: c.seed,
            noise_sd: c.noise_sd,
            drift_day: c.drift_day,
            morning_hour: p.morning_hour,
            evening_hour: p.evening_hour,
            morning_height: p.morning_height,
            evening_height: p.evening_height,
            peak_width: p.width,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { hidden: 24, dropout: 0.2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    /// "mae" or "mse".
    pub base: String,
    pub alpha: f64,
    pub beta: f64,
    pub sum_aggregation: bool,
}

impl Default for LossSection {
    fn default() -> Self {
        let c = LossConfig::default();
        Self {
            base: "mae".into(),
            alpha: c.alpha,
            beta: c.beta,
            sum_aggregation: c.sum_aggregation,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub eta: f64,
    /// "adam" or "sgd".
    pub optimizer: String,
    /// 0 disables gradient clipping.
    pub clip_norm: f64,
    pub patience: usize,
    pub min_delta: f64,
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let c = TrainConfig::default();
        Self {
            epochs: c.epochs,
            batch_size: c.batch_size,
            eta: c.eta,
            optimizer: "adam".into(),
            clip_norm: c.clip_norm.unwrap_or(0.0),
            patience: c.patience_epochs,
            min_delta: c.min_delta,
            shuffle: c.shuffle,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineSection {
    pub eta: f64,
    /// Required validation improvement; inf closes the gate.
    pub delta: f64,
    pub freeze_layer1: bool,
    pub freeze_layer2: bool,
    pub freeze_dense: bool,
    /// "fixed" or "rolling".
    pub validation: String,
    pub rolling_days: usize,
    pub granularity: usize,
}

impl Default for OnlineSection {
    fn default() -> Self {
        let c = OnlineConfig::default();
        Self {
            eta: c.eta,
            delta: c.delta,
            freeze_layer1: c.freeze.layer1,
            freeze_layer2: c.freeze.layer2,
            freeze_dense: c.freeze.dense,
            validation: "fixed".into(),
            rolling_days: 14,
            granularity: c.batch_granularity,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }

    /// Write the fully resolved configuration next to the artifacts it
    /// will produce.
    pub fn persist(&self, out_dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(out_dir).map_err(|e| {
            CliError::Config(format!("cannot create {}: {e}", out_dir.display()))
        })?;
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))?;
        let path = out_dir.join("config.toml");
        std::fs::write(&path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            days: self.synth.days,
            seed: self.synth.seed,
            noise_sd: self.synth.noise_sd,
            drift_day: self.synth.drift_day,
            peak_profile: PeakProfile {
                morning_hour: self.synth.morning_hour,
                evening_hour: self.synth.evening_hour,
                morning_height: self.synth.morning_height,
                evening_height: self.synth.evening_height,
                width: self.synth.peak_width,
            },
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            window: WindowConfig {
                lookback: self.data.lookback,
                include_prediction_day: self.data.include_prediction_day,
            },
            train_days: self.data.train_days,
            val_days: self.data.val_days,
            withhold: self.data.withhold.clone(),
        }
    }

    pub fn loss_config(&self) -> Result<LossConfig, CliError> {
        let base = match self.loss.base.as_str() {
            "mae" => BaseLoss::Mae,
            "mse" => BaseLoss::Mse,
            other => {
                return Err(CliError::Config(format!(
                    "loss.base must be \"mae\" or \"mse\", got {other:?}"
                )))
            }
        };
        Ok(LossConfig {
            base,
            alpha: self.loss.alpha,
            beta: self.loss.beta,
            sum_aggregation: self.loss.sum_aggregation,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let optimizer = match self.train.optimizer.as_str() {
            "adam" => OptimizerChoice::Adam,
            "sgd" => OptimizerChoice::Sgd,
            other => {
                return Err(CliError::Config(format!(
                    "train.optimizer must be \"adam\" or \"sgd\", got {other:?}"
                )))
            }
        };
        Ok(TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            seed: self.train.seed,
            optimizer,
            eta: self.train.eta,
            clip_norm: if self.train.clip_norm == 0.0 {
                None
            } else {
                Some(self.train.clip_norm)
            },
            loss: self.loss_config()?,
            patience_epochs: self.train.patience,
            min_delta: self.train.min_delta,
            shuffle: self.train.shuffle,
        })
    }

    pub fn online_config(&self) -> Result<OnlineConfig, CliError> {
        let validation_policy = match self.online.validation.as_str() {
            "fixed" => ValidationPolicy::Fixed,
            "rolling" => ValidationPolicy::Rolling { window_days: self.online.rolling_days },
            other => {
                return Err(CliError::Config(format!(
                    "online.validation must be \"fixed\" or \"rolling\", got {other:?}"
                )))
            }
        };
        Ok(OnlineConfig {
            eta: self.online.eta,
            delta: self.online.delta,
            freeze: FreezeMask {
                layer1: self.online.freeze_layer1,
                layer2: self.online.freeze_layer2,
                dense: self.online.freeze_dense,
            },
            validation_policy,
            batch_granularity: self.online.granularity,
        })
    }

    pub fn model_spec(&self, feature_count: usize) -> ModelSpec {
        ModelSpec {
            feature_count,
            hidden_size: self.model.hidden,
            dropout_rate: self.model.dropout,
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.data.out_dir.join("model.ckpt")
    }
}
