//! Feature-day assembly: data columns become matrix rows, followed by
//! seven engineered temporal rows. Realized prices never enter the feature
//! matrix; they come out separately as price days.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDate};

use super::{DataError, FeatureDay, PriceDay, RawRecord};
use crate::Tensor;

const HOURS: usize = 24;

/// Names of the engineered rows, in row order.
pub fn temporal_feature_names() -> [&'static str; 7] {
    ["hour_sin", "hour_cos", "dow_sin", "dow_cos", "month_sin", "month_cos", "is_weekend"]
}

/// Seven temporal rows for one date: sin/cos of the hour of day, sin/cos of
/// the day of week (Monday = 0), sin/cos of the month (1..=12), and a
/// weekend indicator. The last five are constant across the day's hours.
pub fn engineer_temporal(date: NaiveDate) -> Tensor {
    let dow = date.weekday().num_days_from_monday() as f64;
    let month = date.month() as f64;
    let weekend = if dow >= 5.0 { 1.0 } else { 0.0 };
    let mut out = Tensor::zeros(7, HOURS);
    for t in 0..HOURS {
        let hour_angle = TAU * t as f64 / 24.0;
        out.set(0, t, hour_angle.sin());
        out.set(1, t, hour_angle.cos());
        out.set(2, t, (TAU * dow / 7.0).sin());
        out.set(3, t, (TAU * dow / 7.0).cos());
        out.set(4, t, (TAU * month / 12.0).sin());
        out.set(5, t, (TAU * month / 12.0).cos());
        out.set(6, t, weekend);
    }
    out
}

/// Turn a cleaned record stream into aligned feature and price days.
///
/// Feature row order: data columns sorted by name, then the temporal rows.
/// Every (day, column, hour) cell must be present; cleaning guarantees
/// this, and a hole here is a contract violation.
pub fn assemble_days(
    records: &[RawRecord],
) -> Result<(Vec<FeatureDay>, Vec<PriceDay>), DataError> {
    let mut by_date: BTreeMap<NaiveDate, Vec<&RawRecord>> = BTreeMap::new();
    for r in records {
        by_date.entry(r.date).or_default().push(r);
    }
    let columns: Vec<String> = records
        .iter()
        .flat_map(|r| r.features.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut names = columns.clone();
    names.extend(temporal_feature_names().iter().map(|s| s.to_string()));

    let mut feature_days = Vec::with_capacity(by_date.len());
    let mut price_days = Vec::with_capacity(by_date.len());
    for (date, day_records) in by_date {
        let mut x = Tensor::zeros(names.len(), HOURS);
        let mut y = vec![f64::NAN; HOURS];
        for record in day_records {
            let col = record.hour_ending as usize - 1;
            for (row, name) in columns.iter().enumerate() {
                match record.features.get(name) {
                    Some(&v) => x.set(row, col, v),
                    None => {
                        return Err(DataError::IncompleteDay {
                            date,
                            column: name.clone(),
                            hour: record.hour_ending,
                        })
                    }
                }
            }
            y[col] = record.price.ok_or(DataError::IncompleteDay {
                date,
                column: "price".into(),
                hour: record.hour_ending,
            })?;
        }
        if let Some(h) = y.iter().position(|v| v.is_nan()) {
            return Err(DataError::IncompleteDay {
                date,
                column: "price".into(),
                hour: h as u8 + 1,
            });
        }
        let temporal = engineer_temporal(date);
        for r in 0..7 {
            for t in 0..HOURS {
                x.set(columns.len() + r, t, temporal.get(r, t));
            }
        }
        feature_days.push(FeatureDay { date, features: x, names: names.clone() });
        price_days.push(PriceDay { date, y, normalized: false });
    }
    Ok((feature_days, price_days))
}
