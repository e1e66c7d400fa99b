//! CSV ingestion and source joining.
//!
//! The hourly price file is the spine; fuel-mix columns join on
//! (date, hour_ending) and daily weather columns broadcast to all 24 hours
//! of their date. Numeric columns become named features. Non-numeric
//! columns are dropped with a warning, except in the weather file where
//! they are treated as categorical descriptors and one-hot encoded.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use csv::StringRecord;

use super::{DataError, RawRecord};

/// Column-name mapping for the hourly files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub date: String,
    pub hour: String,
    pub price: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            date: "date".into(),
            hour: "hour_ending".into(),
            price: "price".into(),
        }
    }
}

/// Input file set; the price file is required.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcePaths {
    pub prices: PathBuf,
    pub weather: Option<PathBuf>,
    pub fuel: Option<PathBuf>,
}

impl SourcePaths {
    pub fn prices_only(prices: impl Into<PathBuf>) -> Self {
        Self { prices: prices.into(), weather: None, fuel: None }
    }
}

struct Table {
    file: String,
    headers: Vec<String>,
    rows: Vec<(u64, StringRecord)>,
}

fn read_table(path: &Path) -> Result<Table, DataError> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => DataError::Io {
                file: file.clone(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => DataError::Parse { file: file.clone(), line: 1, msg: e.to_string() },
        })?;
    let headers: Vec<String> =
        reader
            .headers()
            .map_err(|e| DataError::Parse {
                file: file.clone(),
                line: 1,
                msg: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            DataError::Parse { file: file.clone(), line, msg: e.to_string() }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, record));
    }
    Ok(Table { file, headers, rows })
}

impl Table {
    fn column_index(&self, name: &str) -> Result<usize, DataError> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| {
            DataError::MissingColumn { file: self.file.clone(), column: name.to_string() }
        })
    }

    fn cell<'a>(&self, row: &'a StringRecord, idx: usize) -> &'a str {
        row.get(idx).unwrap_or("")
    }

    /// Indices of columns whose every non-empty cell parses as f64.
    fn numeric_columns(&self, skip: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut numeric = Vec::new();
        let mut other = Vec::new();
        for idx in 0..self.headers.len() {
            if skip.contains(&idx) {
                continue;
            }
            let ok = self
                .rows
                .iter()
                .all(|(_, r)| {
                    let cell = self.cell(r, idx);
                    cell.is_empty() || cell.parse::<f64>().is_ok()
                });
            if ok {
                numeric.push(idx);
            } else {
                other.push(idx);
            }
        }
        (numeric, other)
    }
}

fn parse_date(table: &Table, line: u64, s: &str) -> Result<NaiveDate, DataError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| DataError::Parse {
        file: table.file.clone(),
        line,
        msg: format!("bad date {s:?}: {e}"),
    })
}

fn parse_hour(table: &Table, line: u64, s: &str) -> Result<u8, DataError> {
    let value: i64 = s.parse().map_err(|_| DataError::Parse {
        file: table.file.clone(),
        line,
        msg: format!("bad hour_ending {s:?}"),
    })?;
    if !(1..=25).contains(&value) {
        return Err(DataError::BadHour { file: table.file.clone(), line, hour: value });
    }
    Ok(value as u8)
}

fn parse_float(table: &Table, line: u64, col: &str, s: &str) -> Result<f64, DataError> {
    s.parse().map_err(|_| DataError::Parse {
        file: table.file.clone(),
        line,
        msg: format!("column {col}: bad number {s:?}"),
    })
}

/// Read and join the source files into chronological hourly records.
pub fn ingest_csv(
    paths: &SourcePaths,
    schema: &CsvSchema,
) -> Result<Vec<RawRecord>, DataError> {
    let table = read_table(&paths.prices)?;
    let date_idx = table.column_index(&schema.date)?;
    let hour_idx = table.column_index(&schema.hour)?;
    let price_idx = table.column_index(&schema.price)?;
    let (numeric, ignored) = table.numeric_columns(&[date_idx, hour_idx, price_idx]);
    for idx in ignored {
        log::warn!(
            "{}: ignoring non-numeric column {:?}",
            table.file,
            table.headers[idx]
        );
    }

    let mut records: BTreeMap<(NaiveDate, u8), RawRecord> = BTreeMap::new();
    for (line, row) in &table.rows {
        let date = parse_date(&table, *line, table.cell(row, date_idx))?;
        let hour = parse_hour(&table, *line, table.cell(row, hour_idx))?;
        if records.contains_key(&(date, hour)) {
            return Err(DataError::DuplicateKey { file: table.file.clone(), date, hour });
        }
        let price_cell = table.cell(row, price_idx);
        let price = if price_cell.is_empty() {
            None
        } else {
            Some(parse_float(&table, *line, &schema.price, price_cell)?)
        };
        let mut features = BTreeMap::new();
        for &idx in &numeric {
            let cell = table.cell(row, idx);
            if !cell.is_empty() {
                features.insert(
                    table.headers[idx].clone(),
                    parse_float(&table, *line, &table.headers[idx], cell)?,
                );
            }
        }
        records.insert((date, hour), RawRecord { date, hour_ending: hour, price, features });
    }

    if let Some(fuel_path) = &paths.fuel {
        join_hourly(&mut records, fuel_path, schema)?;
    }
    if let Some(weather_path) = &paths.weather {
        join_daily(&mut records, weather_path, schema)?;
    }

    Ok(records.into_values().collect())
}

/// Attach an hourly side file's numeric columns onto matching spine records.
fn join_hourly(
    records: &mut BTreeMap<(NaiveDate, u8), RawRecord>,
    path: &Path,
    schema: &CsvSchema,
) -> Result<(), DataError> {
    let table = read_table(path)?;
    let date_idx = table.column_index(&schema.date)?;
    let hour_idx = table.column_index(&schema.hour)?;
    let (numeric, ignored) = table.numeric_columns(&[date_idx, hour_idx]);
    for idx in ignored {
        log::warn!(
            "{}: ignoring non-numeric column {:?}",
            table.file,
            table.headers[idx]
        );
    }
    let mut seen = BTreeSet::new();
    for (line, row) in &table.rows {
        let date = parse_date(&table, *line, table.cell(row, date_idx))?;
        let hour = parse_hour(&table, *line, table.cell(row, hour_idx))?;
        if !seen.insert((date, hour)) {
            return Err(DataError::DuplicateKey { file: table.file.clone(), date, hour });
        }
        let Some(record) = records.get_mut(&(date, hour)) else {
            log::debug!("{}: no price row for {date} hour {hour}; skipped", table.file);
            continue;
        };
        for &idx in &numeric {
            let cell = table.cell(row, idx);
            if !cell.is_empty() {
                record.features.insert(
                    table.headers[idx].clone(),
                    parse_float(&table, *line, &table.headers[idx], cell)?,
                );
            }
        }
    }
    Ok(())
}

/// Broadcast a daily file onto every hour of its date. Numeric columns join
/// as-is; non-numeric columns are categorical descriptors and one-hot
/// encode as "column=value" 0/1 features.
fn join_daily(
    records: &mut BTreeMap<(NaiveDate, u8), RawRecord>,
    path: &Path,
    schema: &CsvSchema,
) -> Result<(), DataError> {
    let table = read_table(path)?;
    let date_idx = table.column_index(&schema.date)?;
    let (numeric, categorical) = table.numeric_columns(&[date_idx]);

    // Distinct values per categorical column define the one-hot vocabulary.
    let mut vocab: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for &idx in &categorical {
        let values: BTreeSet<String> = table
            .rows
            .iter()
            .map(|(_, r)| table.cell(r, idx).to_string())
            .filter(|v| !v.is_empty())
            .collect();
        log::info!(
            "{}: one-hot encoding column {:?} ({} categories)",
            table.file,
            table.headers[idx],
            values.len()
        );
        vocab.insert(idx, values);
    }

    let mut seen = BTreeSet::new();
    for (line, row) in &table.rows {
        let date = parse_date(&table, *line, table.cell(row, date_idx))?;
        if !seen.insert(date) {
            return Err(DataError::DuplicateDate { file: table.file.clone(), date });
        }
        let mut day_features: BTreeMap<String, f64> = BTreeMap::new();
        for &idx in &numeric {
            let cell = table.cell(row, idx);
            if !cell.is_empty() {
                day_features.insert(
                    table.headers[idx].clone(),
                    parse_float(&table, *line, &table.headers[idx], cell)?,
                );
            }
        }
        for (&idx, values) in &vocab {
            let cell = table.cell(row, idx);
            if cell.is_empty() {
                continue;
            }
            for v in values {
                day_features.insert(
                    format!("{}={v}", table.headers[idx]),
                    if v == cell { 1.0 } else { 0.0 },
                );
            }
        }
        for hour in 1..=25u8 {
            if let Some(record) = records.get_mut(&(date, hour)) {
                for (k, v) in &day_features {
                    record.features.insert(k.clone(), *v);
                }
            }
        }
    }
    Ok(())
}
