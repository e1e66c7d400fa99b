//! Sliding-window sample construction.
//!
//! Each sample pairs a run of consecutive feature days with the price
//! vector of the final day in the run. With a lookback of N days the
//! window covers days d-N .. d (N+1 days, prediction day included); the
//! `include_prediction_day: false` variant drops day d from the inputs
//! and needs N >= 1 so the window is never empty.

use super::{DataError, FeatureDay, PriceDay, SlidingWindowSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    /// Days of history before the prediction day.
    pub lookback: usize,
    /// Whether the prediction day's own features enter the window.
    pub include_prediction_day: bool,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { lookback: 7, include_prediction_day: true }
    }
}

/// Build one sample per day that has a full lookback of history.
///
/// `days` and `prices` must be date-aligned and consecutive; a calendar
/// gap is an error naming the first missing date. With T days and
/// lookback N this yields T - N samples. Fewer than N + 1 days yields an
/// empty vector with a warning.
pub fn build_windows(
    days: &[FeatureDay],
    prices: &[PriceDay],
    cfg: WindowConfig,
) -> Result<Vec<SlidingWindowSample>, DataError> {
    let n = cfg.lookback;
    if !cfg.include_prediction_day && n == 0 {
        return Err(DataError::Config(
            "lookback 0 with the prediction day excluded leaves an empty window".into(),
        ));
    }
    if days.len() != prices.len() {
        return Err(DataError::Config(format!(
            "{} feature days but {} price days",
            days.len(),
            prices.len()
        )));
    }
    for (d, p) in days.iter().zip(prices) {
        if d.date != p.date {
            return Err(DataError::Misaligned(d.date));
        }
    }
    for pair in days.windows(2) {
        let expected = pair[0].date.succ_opt().expect("date overflow");
        if pair[1].date != expected {
            return Err(DataError::DateGap { missing: expected });
        }
    }
    if days.len() < n + 1 {
        log::warn!(
            "{} days is fewer than the {} needed for one window; no samples",
            days.len(),
            n + 1
        );
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(days.len() - n);
    for j in n..days.len() {
        let window = if cfg.include_prediction_day {
            days[j - n..=j].to_vec()
        } else {
            days[j - n..j].to_vec()
        };
        out.push(SlidingWindowSample { window, target: prices[j].clone() });
    }
    Ok(out)
}
