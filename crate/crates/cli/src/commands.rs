//! The four subcommands: synthesize a market, train a model, run a
//! forecasting regime over the held-out stream, and score external
//! prediction files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use voltcast_core::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
use voltcast_core::data::{
    assemble_days, clean_hours, ingest_csv, write_synth_csvs, CsvSchema, DataError, PriceDay,
    SourcePaths,
};
use voltcast_core::eval::{
    compare_report, metrics, write_comparison_csv, write_residuals_csv, MetricsReport,
};
use voltcast_core::experiment::{
    denormalize_forecasts, denormalized_actuals, prepare_dataset, PreparedData,
};
use voltcast_core::model::init_params;
use voltcast_core::online::{run_dynamic, run_online, run_static, write_audit_csv, DayForecast};
use voltcast_core::rng::SeededRng;
use voltcast_core::trainer::{train, write_history_csv, TrainError};

use crate::config::RunConfig;
use crate::{CliError, Regime};

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Config(msg) => CliError::Config(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(msg) => CliError::Config(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<voltcast_core::online::OnlineError> for CliError {
    fn from(e: voltcast_core::online::OnlineError) -> Self {
        match e {
            voltcast_core::online::OnlineError::Config(msg) => CliError::Config(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<voltcast_core::eval::EvalError> for CliError {
    fn from(e: voltcast_core::eval::EvalError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Generate the synthetic market and leave the resolved config pointing
/// at the files it wrote.
pub fn cmd_synth(cfg: &mut RunConfig) -> Result<(), CliError> {
    let synth = cfg.synth_config();
    let data_dir = cfg.data.out_dir.join("data");
    std::fs::create_dir_all(&data_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", data_dir.display())))?;
    let paths = write_synth_csvs(&synth, &data_dir)?;
    cfg.data.prices = paths.prices.clone();
    cfg.data.weather = paths.weather.clone();
    cfg.data.fuel = paths.fuel.clone();
    cfg.persist(&cfg.data.out_dir.clone())?;
    println!(
        "wrote {} days ({} hourly rows) under {}",
        cfg.synth.days,
        cfg.synth.days * 24,
        data_dir.display()
    );
    Ok(())
}

fn require_file(path: &Path, role: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{role} file not found: {}", path.display())))
    }
}

/// Ingest, clean, assemble, and split per the resolved config.
fn load_dataset(cfg: &RunConfig) -> Result<PreparedData, CliError> {
    require_file(&cfg.data.prices, "price")?;
    for (p, role) in [(&cfg.data.weather, "weather"), (&cfg.data.fuel, "fuel")] {
        if let Some(p) = p {
            require_file(p, role)?;
        }
    }
    let paths = SourcePaths {
        prices: cfg.data.prices.clone(),
        weather: cfg.data.weather.clone(),
        fuel: cfg.data.fuel.clone(),
    };
    let records = ingest_csv(&paths, &CsvSchema::default())?;
    let records = clean_hours(records);
    let (days, prices) = assemble_days(&records)?;
    Ok(prepare_dataset(&days, &prices, &cfg.pipeline_config())?)
}

/// Preprocess, train with early stopping, and write checkpoint plus
/// per-epoch history.
pub fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let prep = load_dataset(cfg)?;
    let trainer_cfg = cfg.train_config()?;
    let spec = cfg.model_spec(prep.feature_count);
    let model0 = init_params(&spec, &mut SeededRng::new(trainer_cfg.seed));
    let (params, history) =
        train(&model0, &prep.split.train, &prep.split.validation, &trainer_cfg)?;

    cfg.persist(&cfg.data.out_dir)?;
    let ckpt_path = cfg.checkpoint_path();
    save_checkpoint(
        &params,
        &prep.stats,
        &cfg.pipeline_config().window,
        &trainer_cfg.loss,
        &ckpt_path,
    )?;
    let history_path = cfg.data.out_dir.join("history.csv");
    write_history_csv(&history_path, &history)?;
    let last = history.last().expect("at least one epoch");
    println!(
        "trained {} epochs on {} samples; val loss {}; checkpoint {}",
        history.len(),
        prep.split.train.len(),
        last.val_loss,
        ckpt_path.display()
    );
    Ok(())
}

fn load_matching_checkpoint(cfg: &RunConfig, prep: &PreparedData) -> Result<Checkpoint, CliError> {
    let path = cfg.checkpoint_path();
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "checkpoint not found: {} (run `voltcast train` first)",
            path.display()
        )));
    }
    let ckpt = load_checkpoint(&path)?;
    ckpt.expect_shape(prep.feature_count, cfg.model.hidden)
        .map_err(|e| CliError::Config(format!("checkpoint does not fit this config: {e}")))?;
    let window = cfg.pipeline_config().window;
    if ckpt.window != window {
        return Err(CliError::Config(format!(
            "checkpoint was trained with lookback {} (prediction day {}), \
             config asks for lookback {} (prediction day {})",
            ckpt.window.lookback,
            if ckpt.window.include_prediction_day { "included" } else { "excluded" },
            window.lookback,
            if window.include_prediction_day { "included" } else { "excluded" },
        )));
    }
    Ok(ckpt)
}

/// Run one regime over the stream segment and write its reports.
pub fn cmd_run(cfg: &RunConfig, regime: Regime) -> Result<(), CliError> {
    let prep = load_dataset(cfg)?;
    if prep.split.stream.is_empty() {
        return Err(CliError::Config(
            "no stream days left after train_days + val_days; nothing to run".into(),
        ));
    }
    let label = regime.to_string();
    let run_dir = cfg.data.out_dir.join(format!("run-{label}"));
    std::fs::create_dir_all(&run_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", run_dir.display())))?;

    let mut audit = None;
    let forecasts: Vec<DayForecast> = match regime {
        Regime::Static => {
            let ckpt = load_matching_checkpoint(cfg, &prep)?;
            run_static(&ckpt.params, &prep.split)?
        }
        Regime::Online => {
            let ckpt = load_matching_checkpoint(cfg, &prep)?;
            let run = run_online(&ckpt.params, &prep.split, &cfg.online_config()?, &ckpt.loss)?;
            audit = Some(run.audit);
            run.forecasts
        }
        Regime::Dynamic => {
            let spec = cfg.model_spec(prep.feature_count);
            run_dynamic(&spec, &prep.split, &cfg.train_config()?)?
        }
    };

    let pred = denormalize_forecasts(&forecasts, &prep.stats);
    let actual = denormalized_actuals(&prep.split.stream, &prep.stats);
    let report = metrics(&label, &pred, &actual)?;
    let rows = compare_report(std::slice::from_ref(&report))?;
    write_comparison_csv(&run_dir.join("metrics.csv"), &rows)?;
    write_residuals_csv(&run_dir.join("residuals.csv"), &pred, &actual)?;
    if let Some(audit) = audit {
        write_audit_csv(&run_dir.join("audit.csv"), &audit)?;
    }
    cfg.persist(&cfg.data.out_dir)?;
    println!(
        "regime={label} days={} mse={} mae={} rmse={}",
        report.per_day.len(),
        report.mse,
        report.mae,
        report.rmse
    );
    Ok(())
}

/// Read a price CSV (date, hour_ending, price columns) into full days.
fn read_price_csv(path: &Path) -> Result<Vec<PriceDay>, CliError> {
    require_file(path, "price")?;
    let file = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {file}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Runtime(format!("cannot read {file}: {e}")))?
        .clone();
    let schema = CsvSchema::default();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Config(format!("{file}: missing required column {name}"))
        })
    };
    let date_idx = col(&schema.date)?;
    let hour_idx = col(&schema.hour)?;
    let price_idx = col(&schema.price)?;

    let mut by_date: BTreeMap<NaiveDate, [Option<f64>; 24]> = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| CliError::Runtime(format!("{file}:{line}: {e}")))?;
        let cell = |idx: usize| row.get(idx).unwrap_or("").to_string();
        let date: NaiveDate = cell(date_idx)
            .parse()
            .map_err(|e| CliError::Runtime(format!("{file}:{line}: bad date: {e}")))?;
        let hour: usize = cell(hour_idx)
            .parse()
            .map_err(|e| CliError::Runtime(format!("{file}:{line}: bad hour: {e}")))?;
        if !(1..=24).contains(&hour) {
            return Err(CliError::Runtime(format!(
                "{file}:{line}: hour_ending {hour} outside 1..=24"
            )));
        }
        let price: f64 = cell(price_idx)
            .parse()
            .map_err(|e| CliError::Runtime(format!("{file}:{line}: bad price: {e}")))?;
        let slot = &mut by_date.entry(date).or_insert([None; 24])[hour - 1];
        if slot.is_some() {
            return Err(CliError::Runtime(format!(
                "{file}:{line}: duplicate entry for {date} hour {hour}"
            )));
        }
        *slot = Some(price);
    }
    let mut days = Vec::with_capacity(by_date.len());
    for (date, hours) in by_date {
        let mut y = Vec::with_capacity(24);
        for (h, v) in hours.iter().enumerate() {
            y.push(v.ok_or_else(|| {
                CliError::Runtime(format!("{file}: {date} is missing hour {}", h + 1))
            })?);
        }
        days.push(PriceDay { date, y, normalized: false });
    }
    if days.is_empty() {
        return Err(CliError::Runtime(format!("{file}: no data rows")));
    }
    Ok(days)
}

/// Score a prediction CSV against an actuals CSV.
pub fn cmd_eval(pred_path: &PathBuf, actual_path: &PathBuf) -> Result<MetricsReport, CliError> {
    let pred = read_price_csv(pred_path)?;
    let actual = read_price_csv(actual_path)?;
    for (days, other, path) in [(&pred, &actual, pred_path), (&actual, &pred, actual_path)] {
        for d in days.iter() {
            if !other.iter().any(|o| o.date == d.date) {
                return Err(CliError::Runtime(format!(
                    "{} is present only in {}",
                    d.date,
                    path.display()
                )));
            }
        }
    }
    let report = metrics("eval", &pred, &actual)?;
    println!("days {}", report.per_day.len());
    println!("mse  {}", report.mse);
    println!("mae  {}", report.mae);
    println!("rmse {}", report.rmse);
    Ok(report)
}
