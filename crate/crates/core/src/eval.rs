//! Accuracy metrics, two reference predictors, and report plumbing.
//!
//! Metrics are pointwise over every hour of every day, reported in
//! whatever units the supplied prices carry (de-normalize first to get
//! price-scale numbers). The baselines are deliberately simple: repeat
//! the most recent same weekday, or a ridge-regularized linear map from
//! the flattened feature window to the 24 hourly prices.

use std::path::Path;

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use crate::data::{FeatureDay, PriceDay, SlidingWindowSample};
use crate::model::OUTPUT_HOURS;

pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction and actual streams have different lengths ({pred} vs {actual})")]
    LengthMismatch { pred: usize, actual: usize },
    #[error("prediction for {pred} is paired with actual {actual}")]
    DateMismatch { pred: NaiveDate, actual: NaiveDate },
    #[error("duplicate day {0} in the evaluation stream")]
    DuplicateDate(NaiveDate),
    #[error("empty evaluation stream")]
    Empty,
    #[error("day {date} has {got} hourly values, expected {want}")]
    BadDayLength { date: NaiveDate, got: usize, want: usize },
    #[error("no earlier {weekday} in history to predict {horizon} from")]
    NoPriorWeekday { weekday: String, horizon: NaiveDate },
    #[error("reports cover different day sets: {0}")]
    DaySetMismatch(String),
    #[error("invalid ridge setup: {0}")]
    BadRidge(String),
    #[error("normal equations are numerically singular (pivot {pivot:.3e} at column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("failed to write {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayMetrics {
    pub date: NaiveDate,
    pub mse: f64,
    pub mae: f64,
}

/// Pointwise error summary for one labeled forecast stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub label: String,
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
    /// Per-day breakdown, sorted by date.
    pub per_day: Vec<DayMetrics>,
}

/// Pair up the two streams by position, checking dates as we go, then
/// hand back the pairs in date order so totals do not depend on the
/// order the days arrived in.
fn aligned_pairs<'a>(
    pred: &'a [PriceDay],
    actual: &'a [PriceDay],
) -> Result<Vec<(&'a PriceDay, &'a PriceDay)>, EvalError> {
    if pred.len() != actual.len() {
        return Err(EvalError::LengthMismatch { pred: pred.len(), actual: actual.len() });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut pairs = Vec::with_capacity(pred.len());
    for (p, a) in pred.iter().zip(actual) {
        if p.date != a.date {
            return Err(EvalError::DateMismatch { pred: p.date, actual: a.date });
        }
        for day in [p, a] {
            if day.y.len() != OUTPUT_HOURS {
                return Err(EvalError::BadDayLength {
                    date: day.date,
                    got: day.y.len(),
                    want: OUTPUT_HOURS,
                });
            }
        }
        pairs.push((p, a));
    }
    pairs.sort_by_key(|(p, _)| p.date);
    for w in pairs.windows(2) {
        if w[0].0.date == w[1].0.date {
            return Err(EvalError::DuplicateDate(w[0].0.date));
        }
    }
    Ok(pairs)
}

/// MSE, MAE, and RMSE over every hourly point of the paired streams.
pub fn metrics(label: &str, pred: &[PriceDay], actual: &[PriceDay]) -> Result<MetricsReport, EvalError> {
    let pairs = aligned_pairs(pred, actual)?;
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut per_day = Vec::with_capacity(pairs.len());
    for (p, a) in &pairs {
        let mut day_sq = 0.0;
        let mut day_abs = 0.0;
        for (yp, ya) in p.y.iter().zip(&a.y) {
            let e = ya - yp;
            day_sq += e * e;
            day_abs += e.abs();
        }
        sq += day_sq;
        abs += day_abs;
        per_day.push(DayMetrics {
            date: p.date,
            mse: day_sq / OUTPUT_HOURS as f64,
            mae: day_abs / OUTPUT_HOURS as f64,
        });
    }
    let n = (pairs.len() * OUTPUT_HOURS) as f64;
    let mse = sq / n;
    Ok(MetricsReport { label: label.to_string(), mse, mae: abs / n, rmse: mse.sqrt(), per_day })
}

/// Predict `horizon` by repeating the most recent earlier day that falls
/// on the same weekday.
pub fn baseline_persistence(
    history: &[PriceDay],
    horizon: NaiveDate,
) -> Result<PriceDay, EvalError> {
    let source = history
        .iter()
        .filter(|d| d.date < horizon && d.date.weekday() == horizon.weekday())
        .max_by_key(|d| d.date)
        .ok_or_else(|| EvalError::NoPriorWeekday {
            weekday: horizon.weekday().to_string(),
            horizon,
        })?;
    Ok(PriceDay { date: horizon, y: source.y.clone(), normalized: source.normalized })
}

/// Ridge-regularized linear map from the flattened feature window to the
/// 24 hourly prices. The intercept is left unpenalized so huge lambda
/// collapses predictions to the training mean rather than to zero.
#[derive(Debug, Clone)]
pub struct LinearBaseline {
    /// (dim + 1) x 24 column-major blocks: weights[j] is the coefficient
    /// vector for hour j, intercept last.
    weights: Vec<Vec<f64>>,
    dim: usize,
    normalized: bool,
}

fn flatten_window(window: &[FeatureDay]) -> Vec<f64> {
    let mut x = Vec::new();
    for day in window {
        x.extend_from_slice(day.features.data());
    }
    x
}

/// Solve A x = b for symmetric positive definite A via Cholesky.
/// A is dim x dim row-major and is consumed as scratch.
fn cholesky_solve(a: &mut [f64], dim: usize, rhs: &mut [Vec<f64>]) -> Result<(), EvalError> {
    for j in 0..dim {
        let mut d = a[j * dim + j];
        for k in 0..j {
            d -= a[j * dim + k] * a[j * dim + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(EvalError::Singular { col: j, pivot: d });
        }
        let d = d.sqrt();
        a[j * dim + j] = d;
        for i in j + 1..dim {
            let mut v = a[i * dim + j];
            for k in 0..j {
                v -= a[i * dim + k] * a[j * dim + k];
            }
            a[i * dim + j] = v / d;
        }
    }
    for b in rhs.iter_mut() {
        // L y = b
        for i in 0..dim {
            let mut v = b[i];
            for k in 0..i {
                v -= a[i * dim + k] * b[k];
            }
            b[i] = v / a[i * dim + i];
        }
        // L^T x = y
        for i in (0..dim).rev() {
            let mut v = b[i];
            for k in i + 1..dim {
                v -= a[k * dim + i] * b[k];
            }
            b[i] = v / a[i * dim + i];
        }
    }
    Ok(())
}

/// Fit the ridge map on labeled window samples.
pub fn fit_linear_baseline(
    history: &[SlidingWindowSample],
    lambda: f64,
) -> Result<LinearBaseline, EvalError> {
    if history.is_empty() {
        return Err(EvalError::BadRidge("no training samples".into()));
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(EvalError::BadRidge(format!("lambda must be positive, got {lambda}")));
    }
    let first = flatten_window(&history[0].window);
    let dim = first.len();
    if dim == 0 {
        return Err(EvalError::BadRidge("empty feature window".into()));
    }
    if history.len() < 5 * dim {
        log::warn!(
            "ridge baseline has {} samples for {} coefficients per hour; \
             leaning on the regularizer",
            history.len(),
            dim
        );
    }
    let aug = dim + 1;
    let mut xs = Vec::with_capacity(history.len());
    for s in history {
        let x = flatten_window(&s.window);
        if x.len() != dim {
            return Err(EvalError::BadRidge(format!(
                "window for {} flattens to {} values, expected {dim}",
                s.target.date,
                x.len()
            )));
        }
        if s.target.y.len() != OUTPUT_HOURS {
            return Err(EvalError::BadDayLength {
                date: s.target.date,
                got: s.target.y.len(),
                want: OUTPUT_HOURS,
            });
        }
        xs.push(x);
    }

    // Normal equations on the intercept-augmented design matrix.
    let mut g = vec![0.0f64; aug * aug];
    for x in &xs {
        for i in 0..dim {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for j in i..dim {
                g[i * aug + j] += xi * x[j];
            }
            g[i * aug + dim] += xi;
        }
        g[dim * aug + dim] += 1.0;
    }
    for i in 0..aug {
        for j in 0..i {
            g[i * aug + j] = g[j * aug + i];
        }
    }
    for i in 0..dim {
        g[i * aug + i] += lambda;
    }

    let mut rhs: Vec<Vec<f64>> = vec![vec![0.0; aug]; OUTPUT_HOURS];
    for (x, s) in xs.iter().zip(history) {
        for (h, &y) in s.target.y.iter().enumerate() {
            let r = &mut rhs[h];
            for i in 0..dim {
                r[i] += x[i] * y;
            }
            r[dim] += y;
        }
    }

    cholesky_solve(&mut g, aug, &mut rhs)?;
    Ok(LinearBaseline { weights: rhs, dim, normalized: history[0].target.normalized })
}

impl LinearBaseline {
    pub fn predict(&self, window: &[FeatureDay], horizon: NaiveDate) -> Result<PriceDay, EvalError> {
        let x = flatten_window(window);
        if x.len() != self.dim {
            return Err(EvalError::BadRidge(format!(
                "window flattens to {} values, model was fit on {}",
                x.len(),
                self.dim
            )));
        }
        let mut y = Vec::with_capacity(OUTPUT_HOURS);
        for w in &self.weights {
            let mut v = w[self.dim];
            for (wi, xi) in w[..self.dim].iter().zip(&x) {
                v += wi * xi;
            }
            y.push(v);
        }
        Ok(PriceDay { date: horizon, y, normalized: self.normalized })
    }
}

/// One-shot convenience: fit on history, predict one horizon window.
pub fn baseline_linear(
    history: &[SlidingWindowSample],
    window: &[FeatureDay],
    horizon: NaiveDate,
    lambda: f64,
) -> Result<PriceDay, EvalError> {
    fit_linear_baseline(history, lambda)?.predict(window, horizon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
}

/// Tabulate reports side by side. They must cover the same days, or the
/// numbers would not be comparable.
pub fn compare_report(reports: &[MetricsReport]) -> Result<Vec<ComparisonRow>, EvalError> {
    if let Some(first) = reports.first() {
        let base: Vec<NaiveDate> = first.per_day.iter().map(|d| d.date).collect();
        for r in &reports[1..] {
            let days: Vec<NaiveDate> = r.per_day.iter().map(|d| d.date).collect();
            if days != base {
                let detail = base
                    .iter()
                    .zip(&days)
                    .find(|(a, b)| a != b)
                    .map(|(a, b)| format!("'{}' has {} where '{}' has {}", r.label, b, first.label, a))
                    .unwrap_or_else(|| {
                        format!(
                            "'{}' covers {} days, '{}' covers {}",
                            r.label,
                            days.len(),
                            first.label,
                            base.len()
                        )
                    });
                return Err(EvalError::DaySetMismatch(detail));
            }
        }
    }
    Ok(reports
        .iter()
        .map(|r| ComparisonRow { label: r.label.clone(), mse: r.mse, mae: r.mae, rmse: r.rmse })
        .collect())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, EvalError> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => EvalError::Io { file: path.display().to_string(), source: io },
        other => EvalError::BadRidge(format!("cannot open {}: {other:?}", path.display())),
    })
}

fn csv_io(path: &Path, e: csv::Error) -> EvalError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => EvalError::Io { file: path.display().to_string(), source: io },
        other => EvalError::BadRidge(format!("cannot write {}: {other:?}", path.display())),
    }
}

/// Comparison table as CSV: config, mse, mae, rmse.
pub fn write_comparison_csv(path: &Path, rows: &[ComparisonRow]) -> Result<(), EvalError> {
    let mut w = csv_writer(path)?;
    w.write_record(["config", "mse", "mae", "rmse"]).map_err(|e| csv_io(path, e))?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            format!("{}", r.mse),
            format!("{}", r.mae),
            format!("{}", r.rmse),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| EvalError::Io { file: path.display().to_string(), source: e })
}

/// Hour-level residuals (actual minus predicted) for external plotting:
/// date, hour, actual, predicted, residual. Hours use the 1..=24
/// hour-ending convention the rest of the pipeline speaks.
pub fn write_residuals_csv(
    path: &Path,
    pred: &[PriceDay],
    actual: &[PriceDay],
) -> Result<(), EvalError> {
    let pairs = aligned_pairs(pred, actual)?;
    let mut w = csv_writer(path)?;
    w.write_record(["date", "hour", "actual", "predicted", "residual"])
        .map_err(|e| csv_io(path, e))?;
    for (p, a) in pairs {
        for h in 0..OUTPUT_HOURS {
            w.write_record([
                p.date.to_string(),
                (h + 1).to_string(),
                format!("{}", a.y[h]),
                format!("{}", p.y[h]),
                format!("{}", a.y[h] - p.y[h]),
            ])
            .map_err(|e| csv_io(path, e))?;
        }
    }
    w.flush().map_err(|e| EvalError::Io { file: path.display().to_string(), source: e })
}
