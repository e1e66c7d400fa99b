//! Hourly cleanup: drop the anomalous 25th hour, fill short gaps, drop
//! days that cannot be repaired.
//!
//! Gaps are measured per column on the hourly timeline of consecutive
//! calendar dates. A single missing hour is filled with the mean of its
//! two neighbors (crossing day boundaries when needed); two consecutive
//! missing hours are filled by linear interpolation between the flanking
//! values. Longer runs, and runs touching the edge of the data, drop every
//! day they cover.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

use super::RawRecord;

const HOURS: usize = 24;
/// Longest gap that gets interpolated instead of dropping the day.
const MAX_FILL_RUN: usize = 2;

/// Clean a chronological record stream. Returns complete retained days
/// only: every hour of every column present exactly once.
pub fn clean_hours(records: Vec<RawRecord>) -> Vec<RawRecord> {
    let mut records: Vec<RawRecord> =
        records.into_iter().filter(|r| r.hour_ending <= 24).collect();
    records.sort_by_key(|r| (r.date, r.hour_ending));
    if records.is_empty() {
        return records;
    }

    let columns: BTreeSet<String> =
        records.iter().flat_map(|r| r.features.keys().cloned()).collect();
    let dates: Vec<NaiveDate> = {
        let set: BTreeSet<NaiveDate> = records.iter().map(|r| r.date).collect();
        set.into_iter().collect()
    };
    let by_key: BTreeMap<(NaiveDate, u8), &RawRecord> =
        records.iter().map(|r| ((r.date, r.hour_ending), r)).collect();

    // Contiguous calendar segments; fills never bridge a missing date.
    let mut segments: Vec<Vec<NaiveDate>> = Vec::new();
    for &d in &dates {
        match segments.last_mut() {
            Some(seg) if seg.last().map(|p| p.succ_opt() == Some(d)) == Some(true) => {
                seg.push(d)
            }
            _ => segments.push(vec![d]),
        }
    }

    let mut out: Vec<RawRecord> = Vec::new();
    for seg in segments {
        clean_segment(&seg, &columns, &by_key, &mut out);
    }
    out
}

fn clean_segment(
    seg: &[NaiveDate],
    columns: &BTreeSet<String>,
    by_key: &BTreeMap<(NaiveDate, u8), &RawRecord>,
    out: &mut Vec<RawRecord>,
) {
    let slots = seg.len() * HOURS;
    let cell = |col: &str, slot: usize| -> Option<f64> {
        let date = seg[slot / HOURS];
        let hour = (slot % HOURS) as u8 + 1;
        let record = by_key.get(&(date, hour))?;
        if col == "price" {
            record.price
        } else {
            record.features.get(col).copied()
        }
    };

    let mut dropped: BTreeSet<usize> = BTreeSet::new(); // day indices in seg
    let mut filled: BTreeMap<(String, usize), f64> = BTreeMap::new();

    let mut all_columns: Vec<&str> = vec!["price"];
    all_columns.extend(columns.iter().map(String::as_str));
    for col in &all_columns {
        let mut slot = 0;
        while slot < slots {
            if cell(col, slot).is_some() {
                slot += 1;
                continue;
            }
            let start = slot;
            while slot < slots && cell(col, slot).is_none() {
                slot += 1;
            }
            let run = slot - start;
            let left = start.checked_sub(1).and_then(|s| cell(col, s));
            let right = if slot < slots { cell(col, slot) } else { None };
            match (left, right) {
                (Some(a), Some(b)) if run <= MAX_FILL_RUN => {
                    if run == 1 {
                        filled.insert((col.to_string(), start), (a + b) / 2.0);
                    } else {
                        let step = (b - a) / (run + 1) as f64;
                        for k in 0..run {
                            filled.insert(
                                (col.to_string(), start + k),
                                a + step * (k + 1) as f64,
                            );
                        }
                    }
                }
                _ => {
                    let first_day = start / HOURS;
                    let last_day = (slot - 1) / HOURS;
                    for day in first_day..=last_day {
                        if dropped.insert(day) {
                            log::warn!(
                                "dropping {}: column {col} missing {run} consecutive hour(s) from {} hour {}",
                                seg[day],
                                seg[start / HOURS],
                                start % HOURS + 1
                            );
                        }
                    }
                }
            }
        }
    }

    for (day_idx, &date) in seg.iter().enumerate() {
        if dropped.contains(&day_idx) {
            continue;
        }
        for hour in 1..=HOURS as u8 {
            let slot = day_idx * HOURS + (hour as usize - 1);
            let mut record = match by_key.get(&(date, hour)) {
                Some(r) => (*r).clone(),
                None => RawRecord {
                    date,
                    hour_ending: hour,
                    price: None,
                    features: BTreeMap::new(),
                },
            };
            if record.price.is_none() {
                record.price = Some(filled[&("price".to_string(), slot)]);
            }
            for col in columns {
                if !record.features.contains_key(col) {
                    record
                        .features
                        .insert(col.clone(), filled[&(col.clone(), slot)]);
                }
            }
            out.push(record);
        }
    }
}
