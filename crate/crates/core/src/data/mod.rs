//! Data pipeline: CSV ingestion, hour cleaning, feature engineering,
//! normalization, sliding-window assembly, and a synthetic market
//! generator that exercises the whole pipeline end to end.
//!
//! Everything here works at f64; the record stream flows
//! ingest -> clean -> assemble -> normalize -> windows.

pub mod clean;
pub mod features;
pub mod ingest;
pub mod normalize;
pub mod synth;
pub mod windows;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use thiserror::Error;

use crate::Tensor;

pub use clean::clean_hours;
pub use features::{assemble_days, engineer_temporal, temporal_feature_names};
pub use ingest::{ingest_csv, CsvSchema, SourcePaths};
pub use normalize::{
    apply_normalize, denormalize_day, fit_normalize, normalize_prices, NormStats,
};
pub use synth::{synth_market, synth_records, write_synth_csvs, PeakProfile, SynthConfig};
pub use windows::{build_windows, WindowConfig};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: u64, msg: String },
    #[error("{file}:{line}: hour_ending {hour} outside 1..=25")]
    BadHour { file: String, line: u64, hour: i64 },
    #[error("{file}: duplicate entry for {date} hour {hour}")]
    DuplicateKey { file: String, date: NaiveDate, hour: u8 },
    #[error("{file}: duplicate entry for {date}")]
    DuplicateDate { file: String, date: NaiveDate },
    #[error("{file}: missing required column {column}")]
    MissingColumn { file: String, column: String },
    #[error("failed to read {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("day {date} is incomplete after cleaning: column {column} hour {hour}")]
    IncompleteDay { date: NaiveDate, column: String, hour: u8 },
    #[error("date gap: {missing} is absent")]
    DateGap { missing: NaiveDate },
    #[error("feature/price day lists disagree at {0}")]
    Misaligned(NaiveDate),
    #[error("price series has zero variance; cannot normalize")]
    DegeneratePrices,
    #[error("feature {0} is not present in the normalization statistics")]
    UnknownFeature(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// One hourly observation as ingested: price plus whatever named feature
/// cells were present. Missing cells are simply absent from the map.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub date: NaiveDate,
    pub hour_ending: u8,
    pub price: Option<f64>,
    pub features: BTreeMap<String, f64>,
}

/// One day of model input: M named feature rows by 24 hourly columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDay {
    pub date: NaiveDate,
    /// M x 24.
    pub features: Tensor,
    /// Row names, in row order; identical across a dataset.
    pub names: Vec<String>,
}

/// One day of prices, raw or normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceDay {
    pub date: NaiveDate,
    pub y: Vec<f64>,
    pub normalized: bool,
}

/// One training sample: a window of consecutive feature days and the price
/// day it predicts. With prediction-day features included the window ends
/// on the target's own date.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingWindowSample {
    pub window: Vec<FeatureDay>,
    pub target: PriceDay,
}

impl SlidingWindowSample {
    /// Window features in forward-pass order, one tensor per day.
    pub fn input_tensors(&self) -> Vec<Tensor> {
        self.window.iter().map(|d| d.features.clone()).collect()
    }
}
