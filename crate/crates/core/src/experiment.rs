//! Dataset assembly shared by the command-line tool and the experiment
//! suites: normalize on the training slice only, window the whole
//! series, and split it chronologically into train, validation, and
//! stream segments.

use crate::data::{
    apply_normalize, build_windows, denormalize_day, fit_normalize, normalize_prices,
    DataError, FeatureDay, NormStats, PriceDay, WindowConfig,
};
use crate::online::{DatasetSplit, DayForecast};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub window: WindowConfig,
    /// Leading days used for fitting and training.
    pub train_days: usize,
    /// Days right after the training slice, reserved for validation.
    pub val_days: usize,
    /// Feature rows to remove before anything else sees them.
    pub withhold: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: WindowConfig::default(),
            train_days: 60,
            val_days: 10,
            withhold: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub split: DatasetSplit,
    pub stats: NormStats,
    /// Feature rows per day after withholding, temporal rows included.
    pub feature_count: usize,
}

/// Remove the named feature rows from every day.
pub fn drop_features(
    days: &[FeatureDay],
    withhold: &[String],
) -> Result<Vec<FeatureDay>, DataError> {
    if withhold.is_empty() {
        return Ok(days.to_vec());
    }
    if let Some(first) = days.first() {
        for name in withhold {
            if !first.names.contains(name) {
                return Err(DataError::Config(format!(
                    "cannot withhold unknown feature {name:?}"
                )));
            }
        }
    }
    Ok(days
        .iter()
        .map(|day| {
            let keep: Vec<usize> = (0..day.names.len())
                .filter(|&i| !withhold.contains(&day.names[i]))
                .collect();
            let mut t = crate::Tensor::zeros(keep.len(), day.features.cols());
            for (new_row, &old_row) in keep.iter().enumerate() {
                for c in 0..day.features.cols() {
                    t.set(new_row, c, day.features.get(old_row, c));
                }
            }
            FeatureDay {
                date: day.date,
                features: t,
                names: keep.iter().map(|&i| day.names[i].clone()).collect(),
            }
        })
        .collect())
}

/// Full preprocessing on an assembled day series: withhold, fit
/// statistics on the training slice, normalize everything, window, and
/// split by target date.
pub fn prepare_dataset(
    days: &[FeatureDay],
    prices: &[PriceDay],
    cfg: &PipelineConfig,
) -> Result<PreparedData, DataError> {
    if cfg.val_days == 0 {
        return Err(DataError::Config("val_days must be at least 1".into()));
    }
    if cfg.train_days <= cfg.window.lookback {
        return Err(DataError::Config(format!(
            "train_days {} leaves no complete window with lookback {}",
            cfg.train_days, cfg.window.lookback
        )));
    }
    if cfg.train_days + cfg.val_days > days.len() {
        return Err(DataError::Config(format!(
            "train_days {} + val_days {} exceeds the {} available days",
            cfg.train_days,
            cfg.val_days,
            days.len()
        )));
    }
    let days = drop_features(days, &cfg.withhold)?;
    let stats = fit_normalize(&days[..cfg.train_days], &prices[..cfg.train_days])?;
    let days = apply_normalize(&days, &stats)?;
    let prices = normalize_prices(prices, &stats);
    let samples = build_windows(&days, &prices, cfg.window)?;

    let start = days[0].date;
    let train_end = start + chrono::Days::new(cfg.train_days as u64);
    let val_end = train_end + chrono::Days::new(cfg.val_days as u64);
    let mut split = DatasetSplit { train: Vec::new(), validation: Vec::new(), stream: Vec::new() };
    for s in samples {
        if s.target.date < train_end {
            split.train.push(s);
        } else if s.target.date < val_end {
            split.validation.push(s);
        } else {
            split.stream.push(s);
        }
    }
    let feature_count = stats.feature_names.len();
    Ok(PreparedData { split, stats, feature_count })
}

/// Forecasts back in price units.
pub fn denormalize_forecasts(forecasts: &[DayForecast], stats: &NormStats) -> Vec<PriceDay> {
    forecasts
        .iter()
        .map(|f| PriceDay {
            date: f.date,
            y: denormalize_day(&f.predicted, stats),
            normalized: false,
        })
        .collect()
}

/// Normalized sample targets back in price units.
pub fn denormalized_actuals(
    samples: &[crate::data::SlidingWindowSample],
    stats: &NormStats,
) -> Vec<PriceDay> {
    samples
        .iter()
        .map(|s| PriceDay {
            date: s.target.date,
            y: denormalize_day(&s.target.y, stats),
            normalized: false,
        })
        .collect()
}
