//! Deterministic synthetic market generator.
//!
//! Prices combine a double-peak daily profile, a weekend discount, a
//! lagged temperature influence, a renewable-share term that suppresses
//! price, a gas-price term, and AR(1) hourly noise. At `drift_day` the
//! price-formation coefficients step to a second regime, so adaptive
//! models have something real to chase. Every stochastic amplitude
//! scales with `noise_sd`; at zero noise and no drift each price depends
//! only on (weekday, hour), so the series repeats weekly bit for bit.
//!
//! Each random component draws from its own derived substream, so adding
//! draws to one component never perturbs another.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};

use super::features::assemble_days;
use super::ingest::SourcePaths;
use super::{DataError, FeatureDay, PriceDay, RawRecord};
use crate::rng::SeededRng;

const HOURS: usize = 24;
const MIN_DAYS: usize = 60;

const WEEKEND_DISCOUNT: f64 = 8.0;
const TEMP_BASE: f64 = 12.0;
const TEMP_SWING: f64 = 6.0;
const TEMP_PEAK_HOUR: f64 = 9.0;
const TEMP_LAG_HOURS: usize = 3;
const TEMP_ANOMALY_SCALE: f64 = 3.0;
const CLOUD_BASE: f64 = 0.45;
const CLOUD_SWING: f64 = 0.3;
const SOLAR_PEAK_HOUR: f64 = 13.0;
const SOLAR_WIDTH: f64 = 3.5;
const GAS_BASE: f64 = 4.2;
const GAS_WALK_SCALE: f64 = 0.4;
const COEF_GAS: f64 = 2.0;
const LOAD_BASE: f64 = 32.0;
const LOAD_SWING: f64 = 6.0;
const LOAD_WEEKEND_DROP: f64 = 4.0;
const LOAD_NOISE_SCALE: f64 = 0.5;
const NOISE_RHO: f64 = 0.85;
const NOISE_SCALE: f64 = 1.2;
const PRESSURE_BASE: f64 = 1013.0;
const PRESSURE_SD: f64 = 5.0;

// Substream tags for SeededRng::derive.
const STREAM_TEMP: u64 = 1;
const STREAM_CLOUD: u64 = 2;
const STREAM_GAS: u64 = 3;
const STREAM_LOAD: u64 = 4;
const STREAM_NOISE: u64 = 5;
const STREAM_DISTRACTORS: u64 = 6;
const STREAM_PRESSURE: u64 = 7;

/// Feature column split used when emitting CSV files.
pub const PRICE_FILE_FEATURES: [&str; 2] = ["load", "gas_price"];
pub const WEATHER_FILE_FEATURES: [&str; 3] = ["temp_mean", "cloud_cover", "pressure"];
pub const FUEL_FILE_FEATURES: [&str; 3] = ["renewable_share", "distractor_1", "distractor_2"];

/// The fuel-mix column that actually drives prices.
pub const RENEWABLE_FEATURE: &str = "renewable_share";

/// Shape of the two intraday price peaks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakProfile {
    pub morning_hour: f64,
    pub evening_hour: f64,
    pub morning_height: f64,
    pub evening_height: f64,
    pub width: f64,
}

impl Default for PeakProfile {
    fn default() -> Self {
        Self {
            morning_hour: 8.0,
            evening_hour: 19.0,
            morning_height: 12.0,
            evening_height: 16.0,
            width: 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub days: usize,
    pub seed: u64,
    /// First day index of the second regime; `None` disables drift.
    pub drift_day: Option<usize>,
    pub noise_sd: f64,
    pub peak_profile: PeakProfile,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            days: 90,
            seed: 0,
            drift_day: None,
            noise_sd: 1.0,
            peak_profile: PeakProfile::default(),
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), DataError> {
        if self.days < MIN_DAYS {
            return Err(DataError::Config(format!(
                "synthetic market needs at least {MIN_DAYS} days, got {}",
                self.days
            )));
        }
        if !self.noise_sd.is_finite() || self.noise_sd < 0.0 {
            return Err(DataError::Config(format!(
                "noise_sd must be finite and non-negative, got {}",
                self.noise_sd
            )));
        }
        if let Some(d) = self.drift_day {
            if d == 0 || d >= self.days {
                return Err(DataError::Config(format!(
                    "drift_day {d} must fall inside 1..{}",
                    self.days
                )));
            }
        }
        let p = &self.peak_profile;
        let fields =
            [p.morning_hour, p.evening_hour, p.morning_height, p.evening_height, p.width];
        if fields.iter().any(|v| !v.is_finite()) || p.width <= 0.0 {
            return Err(DataError::Config("peak profile must be finite with width > 0".into()));
        }
        Ok(())
    }
}

/// Price-formation coefficients for one regime.
struct Regime {
    base: f64,
    evening_height: f64,
    coef_temp: f64,
    coef_renew: f64,
}

impl Regime {
    fn pre(profile: &PeakProfile) -> Self {
        Self {
            base: 38.0,
            evening_height: profile.evening_height,
            coef_temp: 0.9,
            coef_renew: -22.0,
        }
    }

    fn post(profile: &PeakProfile) -> Self {
        Self {
            base: 54.0,
            evening_height: profile.evening_height + 8.0,
            coef_temp: 1.4,
            coef_renew: -6.0,
        }
    }
}

fn gauss_bump(h: f64, center: f64, width: f64) -> f64 {
    let d = h - center;
    (-d * d / (2.0 * width * width)).exp()
}

/// AR(1) series with unit stationary variance.
fn ar1_series(rng: &mut SeededRng, len: usize, rho: f64) -> Vec<f64> {
    let innovation = (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(len);
    let mut prev = rng.next_normal();
    out.push(prev);
    for _ in 1..len {
        prev = rho * prev + innovation * rng.next_normal();
        out.push(prev);
    }
    out
}

fn start_date() -> NaiveDate {
    // A Monday, so day index modulo 7 is also the weekday index.
    NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date")
}

/// Generate the hourly record stream in the same shape `ingest_csv`
/// produces, one record per (day, hour_ending 1..=24).
pub fn synth_records(cfg: &SynthConfig) -> Result<Vec<RawRecord>, DataError> {
    cfg.validate()?;
    let days = cfg.days;
    let profile = &cfg.peak_profile;
    let pre = Regime::pre(profile);
    let post = Regime::post(profile);

    let mut temp_rng = SeededRng::derive(cfg.seed, &[STREAM_TEMP]);
    let mut cloud_rng = SeededRng::derive(cfg.seed, &[STREAM_CLOUD]);
    let mut gas_rng = SeededRng::derive(cfg.seed, &[STREAM_GAS]);
    let mut load_rng = SeededRng::derive(cfg.seed, &[STREAM_LOAD]);
    let mut noise_rng = SeededRng::derive(cfg.seed, &[STREAM_NOISE]);
    let mut distractor_rng = SeededRng::derive(cfg.seed, &[STREAM_DISTRACTORS]);
    let mut pressure_rng = SeededRng::derive(cfg.seed, &[STREAM_PRESSURE]);

    let temp_anomaly: Vec<f64> = ar1_series(&mut temp_rng, days, 0.7)
        .into_iter()
        .map(|a| TEMP_ANOMALY_SCALE * cfg.noise_sd * a)
        .collect();
    let cloud: Vec<f64> = ar1_series(&mut cloud_rng, days, 0.6)
        .into_iter()
        .map(|a| (CLOUD_BASE + CLOUD_SWING * cfg.noise_sd * a).clamp(0.0, 1.0))
        .collect();
    let gas: Vec<f64> = {
        let mut walk = 0.0;
        (0..days)
            .map(|_| {
                walk += gas_rng.next_normal();
                GAS_BASE + GAS_WALK_SCALE * cfg.noise_sd * walk
            })
            .collect()
    };
    let pressure: Vec<f64> =
        (0..days).map(|_| pressure_rng.normal(PRESSURE_BASE, PRESSURE_SD)).collect();
    let price_noise: Vec<f64> = ar1_series(&mut noise_rng, days * HOURS, NOISE_RHO)
        .into_iter()
        .map(|a| NOISE_SCALE * cfg.noise_sd * a)
        .collect();

    let start = start_date();
    let mut records = Vec::with_capacity(days * HOURS);
    for d in 0..days {
        let date = start + chrono::Days::new(d as u64);
        let weekend = date.weekday().num_days_from_monday() >= 5;
        let regime = match cfg.drift_day {
            Some(cut) if d >= cut => &post,
            _ => &pre,
        };
        for h in 0..HOURS {
            // Temperature three hours earlier, wrapped within the day so
            // zero-noise prices stay strictly weekly periodic.
            let lag_h = (h + HOURS - TEMP_LAG_HOURS) % HOURS;
            let temp_dev = |hour: usize| {
                TEMP_SWING
                    * (std::f64::consts::TAU * (hour as f64 - TEMP_PEAK_HOUR) / HOURS as f64)
                        .sin()
                    + temp_anomaly[d]
            };
            let renewable = gauss_bump(h as f64, SOLAR_PEAK_HOUR, SOLAR_WIDTH) * (1.0 - cloud[d]);

            let mut price = regime.base
                + profile.morning_height * gauss_bump(h as f64, profile.morning_hour, profile.width)
                + regime.evening_height * gauss_bump(h as f64, profile.evening_hour, profile.width)
                + regime.coef_temp * temp_dev(lag_h)
                + regime.coef_renew * renewable
                + COEF_GAS * (gas[d] - GAS_BASE)
                + price_noise[d * HOURS + h];
            if weekend {
                price -= WEEKEND_DISCOUNT;
            }

            let load_shape =
                gauss_bump(h as f64, 8.5, 3.0) + gauss_bump(h as f64, 18.5, 3.0);
            let mut load = LOAD_BASE
                + LOAD_SWING * load_shape
                + LOAD_NOISE_SCALE * cfg.noise_sd * load_rng.next_normal();
            if weekend {
                load -= LOAD_WEEKEND_DROP;
            }

            let mut features = BTreeMap::new();
            features.insert("load".to_string(), load);
            features.insert("gas_price".to_string(), gas[d]);
            features.insert("renewable_share".to_string(), renewable);
            features.insert("distractor_1".to_string(), distractor_rng.next_normal());
            features.insert("distractor_2".to_string(), distractor_rng.next_normal());
            // Daily weather, broadcast to every hour like a daily CSV join.
            features.insert("temp_mean".to_string(), TEMP_BASE + temp_anomaly[d]);
            features.insert("cloud_cover".to_string(), cloud[d]);
            features.insert("pressure".to_string(), pressure[d]);

            records.push(RawRecord {
                date,
                hour_ending: (h + 1) as u8,
                price: Some(price),
                features,
            });
        }
    }
    Ok(records)
}

/// Generate and assemble the market into model-ready day streams.
pub fn synth_market(cfg: &SynthConfig) -> Result<(Vec<FeatureDay>, Vec<PriceDay>), DataError> {
    let records = synth_records(cfg)?;
    assemble_days(&records)
}

fn io_err(file: &Path, source: std::io::Error) -> DataError {
    DataError::Io { file: file.display().to_string(), source }
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => io_err(path, io),
        other => DataError::Config(format!("cannot write {}: {other:?}", path.display())),
    })?;
    let write = |w: &mut csv::Writer<std::fs::File>, row: &[String]| {
        w.write_record(row).map_err(|e| DataError::Config(format!(
            "cannot write {}: {e}",
            path.display()
        )))
    };
    write(&mut w, &header.iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
    for row in rows {
        write(&mut w, &row)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Emit the generated market as the three-file CSV layout the ingest
/// stage reads: hourly prices (with load and gas), daily weather, and
/// hourly fuel mix. Float cells use the shortest round-trip decimal
/// form, so reading them back reproduces every bit.
pub fn write_synth_csvs(cfg: &SynthConfig, dir: &Path) -> Result<SourcePaths, DataError> {
    let records = synth_records(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let feature = |r: &RawRecord, name: &str| -> String {
        format!("{}", r.features[name])
    };

    let prices_path: PathBuf = dir.join("prices.csv");
    write_csv(
        &prices_path,
        &["date", "hour_ending", "price", "load", "gas_price"],
        records.iter().map(|r| {
            vec![
                r.date.to_string(),
                r.hour_ending.to_string(),
                format!("{}", r.price.expect("synthetic prices are always present")),
                feature(r, "load"),
                feature(r, "gas_price"),
            ]
        }),
    )?;

    let weather_path = dir.join("weather.csv");
    write_csv(
        &weather_path,
        &["date", "temp_mean", "cloud_cover", "pressure"],
        records.iter().filter(|r| r.hour_ending == 1).map(|r| {
            vec![
                r.date.to_string(),
                feature(r, "temp_mean"),
                feature(r, "cloud_cover"),
                feature(r, "pressure"),
            ]
        }),
    )?;

    let fuel_path = dir.join("fuel.csv");
    write_csv(
        &fuel_path,
        &["date", "hour_ending", "renewable_share", "distractor_1", "distractor_2"],
        records.iter().map(|r| {
            vec![
                r.date.to_string(),
                r.hour_ending.to_string(),
                feature(r, "renewable_share"),
                feature(r, "distractor_1"),
                feature(r, "distractor_2"),
            ]
        }),
    )?;

    Ok(SourcePaths { prices: prices_path, weather: Some(weather_path), fuel: Some(fuel_path) })
}
