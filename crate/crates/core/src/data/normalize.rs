//! Z-score normalization fitted on training data only.
//!
//! Means and standard deviations are computed over all training cells of
//! each feature row (population std). Features whose std falls below
//! 1e-12 carry no information and are dropped with a warning; applying the
//! statistics removes those rows everywhere, so train and test stay
//! aligned.

use super::{DataError, FeatureDay, PriceDay};
use crate::Tensor;

const STD_FLOOR: f64 = 1e-12;

/// Per-feature and price statistics from the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    /// Retained features, in application order.
    pub feature_names: Vec<String>,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub price_mean: f64,
    pub price_std: f64,
    /// Zero-variance features that were dropped at fit time.
    pub dropped: Vec<String>,
}

fn mean_and_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values.clone() {
        n += 1;
        sum += v;
    }
    let mean = sum / n as f64;
    let mut sq = 0.0;
    for v in values {
        let d = v - mean;
        sq += d * d;
    }
    (mean, (sq / n as f64).sqrt())
}

/// Fit statistics on training days and prices only.
pub fn fit_normalize(
    train_days: &[FeatureDay],
    train_prices: &[PriceDay],
) -> Result<NormStats, DataError> {
    if train_days.is_empty() || train_prices.is_empty() {
        return Err(DataError::Config("cannot fit normalization on empty training data".into()));
    }
    let names = &train_days[0].names;
    let mut feature_names = Vec::new();
    let mut feature_mean = Vec::new();
    let mut feature_std = Vec::new();
    let mut dropped = Vec::new();
    for (row, name) in names.iter().enumerate() {
        let cells = train_days
            .iter()
            .flat_map(move |d| (0..d.features.cols()).map(move |h| d.features.get(row, h)));
        let (mean, std) = mean_and_std(cells);
        if std < STD_FLOOR {
            log::warn!("dropping zero-variance feature {name:?} (std {std:.3e})");
            dropped.push(name.clone());
        } else {
            feature_names.push(name.clone());
            feature_mean.push(mean);
            feature_std.push(std);
        }
    }
    let (price_mean, price_std) =
        mean_and_std(train_prices.iter().flat_map(|p| p.y.iter().copied()));
    if price_std < STD_FLOOR {
        return Err(DataError::DegeneratePrices);
    }
    Ok(NormStats { feature_names, feature_mean, feature_std, price_mean, price_std, dropped })
}

/// Z-score feature days with training statistics, keeping only retained
/// rows, in statistics order.
pub fn apply_normalize(
    days: &[FeatureDay],
    stats: &NormStats,
) -> Result<Vec<FeatureDay>, DataError> {
    let mut out = Vec::with_capacity(days.len());
    for day in days {
        let mut x = Tensor::zeros(stats.feature_names.len(), day.features.cols());
        for (new_row, name) in stats.feature_names.iter().enumerate() {
            let src_row = day
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| DataError::UnknownFeature(name.clone()))?;
            for h in 0..day.features.cols() {
                let z = (day.features.get(src_row, h) - stats.feature_mean[new_row])
                    / stats.feature_std[new_row];
                x.set(new_row, h, z);
            }
        }
        out.push(FeatureDay {
            date: day.date,
            features: x,
            names: stats.feature_names.clone(),
        });
    }
    Ok(out)
}

/// Z-score price days with the training price statistics.
pub fn normalize_prices(prices: &[PriceDay], stats: &NormStats) -> Vec<PriceDay> {
    prices
        .iter()
        .map(|p| PriceDay {
            date: p.date,
            y: p.y.iter().map(|v| (v - stats.price_mean) / stats.price_std).collect(),
            normalized: true,
        })
        .collect()
}

/// Map a normalized 24-vector back to currency units.
pub fn denormalize_day(y: &[f64], stats: &NormStats) -> Vec<f64> {
    y.iter().map(|v| v * stats.price_std + stats.price_mean).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use chrono::NaiveDate;

    fn make_days(
        names: &[&str],
        values: impl Fn(usize, usize, usize) -> f64,
        count: usize,
    ) -> Vec<FeatureDay> {
        (0..count)
            .map(|d| {
                let mut x = Tensor::zeros(names.len(), 24);
                for r in 0..names.len() {
                    for h in 0..24 {
                        x.set(r, h, values(d, r, h));
                    }
                }
                FeatureDay {
                    date: NaiveDate::from_ymd_opt(2024, 1, 1 + d as u32).unwrap(),
                    features: x,
                    names: names.iter().map(|s| s.to_string()).collect(),
                }
            })
            .collect()
    }

    fn make_prices(count: usize, f: impl Fn(usize, usize) -> f64) -> Vec<PriceDay> {
        (0..count)
            .map(|d| PriceDay {
                date: NaiveDate::from_ymd_opt(2024, 1, 1 + d as u32).unwrap(),
                y: (0..24).map(|h| f(d, h)).collect(),
                normalized: false,
            })
            .collect()
    }

    #[test]
    fn round_trip_is_identity_within_1e10() {
        let mut rng = SeededRng::new(3);
        let mut raw: Vec<f64> = Vec::new();
        for _ in 0..5 * 24 {
            raw.push(rng.uniform(10.0, 80.0));
        }
        let prices = make_prices(5, |d, h| raw[d * 24 + h]);
        let days = make_days(&["a"], |d, _, h| (d * 24 + h) as f64, 5);
        let stats = fit_normalize(&days, &prices).unwrap();
        let normalized = normalize_prices(&prices, &stats);
        for (orig, norm) in prices.iter().zip(&normalized) {
            let back = denormalize_day(&norm.y, &stats);
            for (o, b) in orig.y.iter().zip(&back) {
                assert!((o - b).abs() / o.abs().max(1.0) < 1e-10);
            }
        }
    }

    #[test]
    fn constant_feature_is_dropped() {
        let days = make_days(
            &["flat", "varies"],
            |d, r, h| if r == 0 { 7.0 } else { (d * 24 + h) as f64 },
            4,
        );
        let prices = make_prices(4, |d, h| (d + h) as f64);
        let stats = fit_normalize(&days, &prices).unwrap();
        assert_eq!(stats.feature_names, vec!["varies".to_string()]);
        assert_eq!(stats.dropped, vec!["flat".to_string()]);
        let applied = apply_normalize(&days, &stats).unwrap();
        assert_eq!(applied[0].features.rows(), 1);
        assert_eq!(applied[0].names, vec!["varies".to_string()]);
    }

    #[test]
    fn training_statistics_are_applied_to_test_rows() {
        // Train cells are 0..96, test cells sit far outside; the z-scores
        // of the test rows must come from the train mean/std.
        let train = make_days(&["x"], |d, _, h| (d * 24 + h) as f64, 4);
        let train_prices = make_prices(4, |d, h| (d * 24 + h) as f64);
        let stats = fit_normalize(&train, &train_prices).unwrap();

        let test = make_days(&["x"], |_, _, _| 1000.0, 1);
        let applied = apply_normalize(&test, &stats).unwrap();
        let want = (1000.0 - stats.feature_mean[0]) / stats.feature_std[0];
        assert_eq!(applied[0].features.get(0, 0), want);
        assert!(applied[0].features.get(0, 0) > 10.0);
    }

    #[test]
    fn normalized_training_features_have_zero_mean_unit_std() {
        let mut rng = SeededRng::new(9);
        let vals: Vec<f64> = (0..6 * 24).map(|_| rng.uniform(-5.0, 20.0)).collect();
        let days = make_days(&["x"], |d, _, h| vals[d * 24 + h], 6);
        let prices = make_prices(6, |d, h| (d + h) as f64 + 1.0);
        let stats = fit_normalize(&days, &prices).unwrap();
        let applied = apply_normalize(&days, &stats).unwrap();
        let cells: Vec<f64> = applied
            .iter()
            .flat_map(|d| (0..24).map(move |h| d.features.get(0, h)))
            .collect();
        let mean = cells.iter().sum::<f64>() / cells.len() as f64;
        let var = cells.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / cells.len() as f64;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_prices_are_rejected() {
        let days = make_days(&["x"], |d, _, h| (d + h) as f64, 3);
        let prices = make_prices(3, |_, _| 42.0);
        assert!(matches!(fit_normalize(&days, &prices), Err(DataError::DegeneratePrices)));
    }
}
