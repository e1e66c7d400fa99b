//! Day-ahead electricity price forecasting toolkit.
//!
//! Single binary, four subcommands: `synth` generates a synthetic
//! market, `train` fits the forecaster, `run` executes one of the three
//! serving regimes over the held-out stream, `eval` scores prediction
//! CSVs. Configuration comes from a TOML file plus flag overrides; the
//! resolved config is persisted into the output directory so every
//! artifact is reproducible from its own provenance.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;

/// Exit code 2 for unusable configuration or inputs, 1 for failures
/// while doing the work.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Regime {
    Static,
    Dynamic,
    Online,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Static => "static",
            Regime::Dynamic => "dynamic",
            Regime::Online => "online",
        };
        f.write_str(s)
    }
}

#[derive(Parser)]
#[command(
    name = "voltcast",
    version,
    about = "Day-ahead electricity price forecasting with online-adaptive LSTMs"
)]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts and the resolved config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Seed for both data synthesis and training.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Synthetic market length in days.
    #[arg(long, global = true)]
    days: Option<usize>,

    /// Synthetic noise level.
    #[arg(long, global = true)]
    noise_sd: Option<f64>,

    /// Day index (1-based) where the synthetic regime shifts.
    #[arg(long, global = true)]
    drift_day: Option<usize>,

    /// Prior days per input window.
    #[arg(long, global = true)]
    lookback: Option<usize>,

    /// Drop the prediction day's own features from the window.
    #[arg(long, global = true)]
    exclude_prediction_day: bool,

    /// Leading days used for normalization and training.
    #[arg(long, global = true)]
    train_days: Option<usize>,

    /// Days reserved for validation right after the training slice.
    #[arg(long, global = true)]
    val_days: Option<usize>,

    /// Feature to withhold; repeatable. Replaces the config list.
    #[arg(long, global = true)]
    withhold: Vec<String>,

    /// Hidden units per recurrent layer.
    #[arg(long, global = true)]
    hidden: Option<usize>,

    /// Dropout rate after each recurrent layer.
    #[arg(long, global = true)]
    dropout: Option<f64>,

    /// Base loss: mae or mse.
    #[arg(long, global = true)]
    loss: Option<String>,

    /// Distribution-divergence weight in the composite loss.
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Smoothness weight in the composite loss.
    #[arg(long, global = true)]
    beta: Option<f64>,

    /// Training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,

    /// Training batch size in days.
    #[arg(long, global = true)]
    batch_size: Option<usize>,

    /// Offline learning rate.
    #[arg(long, global = true)]
    train_eta: Option<f64>,

    /// Early-stopping patience in epochs.
    #[arg(long, global = true)]
    patience: Option<usize>,

    /// Online step size.
    #[arg(long, global = true)]
    online_eta: Option<f64>,

    /// Online acceptance margin; inf closes the gate.
    #[arg(long, global = true)]
    delta: Option<f64>,

    /// Online validation policy: fixed or rolling.
    #[arg(long, global = true)]
    validation: Option<String>,

    /// Window size for the rolling validation policy.
    #[arg(long, global = true)]
    rolling_days: Option<usize>,

    /// Stream days per online update batch.
    #[arg(long, global = true)]
    granularity: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic market as price/weather/fuel CSVs.
    Synth,
    /// Preprocess the configured data and train a checkpoint.
    Train,
    /// Run a serving regime over the held-out stream.
    Run {
        /// Which regime to execute.
        #[arg(long, value_enum)]
        regime: Regime,
    },
    /// Score a prediction CSV against an actuals CSV.
    Eval {
        /// Predictions (date, hour_ending, price).
        #[arg(long)]
        pred: PathBuf,
        /// Actual prices (date, hour_ending, price).
        #[arg(long)]
        actual: PathBuf,
    },
}

impl Cli {
    /// Defaults, then the config file, then flags.
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.out_dir {
            cfg.data.out_dir = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.synth.seed = v;
            cfg.train.seed = v;
        }
        if let Some(v) = self.days {
            cfg.synth.days = v;
        }
        if let Some(v) = self.noise_sd {
            cfg.synth.noise_sd = v;
        }
        if let Some(v) = self.drift_day {
            cfg.synth.drift_day = Some(v);
        }
        if let Some(v) = self.lookback {
            cfg.data.lookback = v;
        }
        if self.exclude_prediction_day {
            cfg.data.include_prediction_day = false;
        }
        if let Some(v) = self.train_days {
            cfg.data.train_days = v;
        }
        if let Some(v) = self.val_days {
            cfg.data.val_days = v;
        }
        if !self.withhold.is_empty() {
            cfg.data.withhold = self.withhold.clone();
        }
        if let Some(v) = self.hidden {
            cfg.model.hidden = v;
        }
        if let Some(v) = self.dropout {
            cfg.model.dropout = v;
        }
        if let Some(v) = &self.loss {
            cfg.loss.base = v.clone();
        }
        if let Some(v) = self.alpha {
            cfg.loss.alpha = v;
        }
        if let Some(v) = self.beta {
            cfg.loss.beta = v;
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.train.batch_size = v;
        }
        if let Some(v) = self.train_eta {
            cfg.train.eta = v;
        }
        if let Some(v) = self.patience {
            cfg.train.patience = v;
        }
        if let Some(v) = self.online_eta {
            cfg.online.eta = v;
        }
        if let Some(v) = self.delta {
            cfg.online.delta = v;
        }
        if let Some(v) = &self.validation {
            cfg.online.validation = v.clone();
        }
        if let Some(v) = self.rolling_days {
            cfg.online.rolling_days = v;
        }
        if let Some(v) = self.granularity {
            cfg.online.granularity = v;
        }
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.cmd {
        Cmd::Synth => {
            let mut cfg = cli.resolve()?;
            commands::cmd_synth(&mut cfg)
        }
        Cmd::Train => {
            let cfg = cli.resolve()?;
            commands::cmd_train(&cfg)
        }
        Cmd::Run { regime } => {
            let cfg = cli.resolve()?;
            commands::cmd_run(&cfg, *regime)
        }
        Cmd::Eval { pred, actual } => commands::cmd_eval(pred, actual).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
