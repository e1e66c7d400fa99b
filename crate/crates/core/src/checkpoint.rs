//! Binary model checkpoints.
//!
//! Layout (all integers and f64 bit patterns little-endian): the magic
//! bytes `VCPT`, a u32 format version, the parameter tensors by name and
//! shape, the normalization statistics, and the window and loss settings
//! needed to run the model on fresh data. Every tensor is validated
//! against the header sizes at load, so a corrupt or truncated file fails
//! with a diagnosis instead of producing a half-built model.

use std::path::Path;

use thiserror::Error;

use crate::data::{NormStats, WindowConfig};
use crate::loss::{BaseLoss, LossConfig};
use crate::model::{LstmLayerParams, ModelParams};
use crate::Tensor;

const MAGIC: [u8; 4] = *b"VCPT";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("failed to access {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    NotACheckpoint,
    #[error("unsupported checkpoint version {found} (this build reads {VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("checkpoint truncated while reading {reading}")]
    Truncated { reading: String },
    #[error(
        "tensor {tensor} has shape {rows}x{cols}, expected {expected_rows}x{expected_cols}"
    )]
    ShapeMismatch {
        tensor: String,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

/// Everything needed to reload a trained model and predict.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f64>,
    pub stats: NormStats,
    pub window: WindowConfig,
    pub loss: LossConfig,
}

impl Checkpoint {
    /// Check the stored model against the sizes the caller expects.
    pub fn expect_shape(
        &self,
        feature_count: usize,
        hidden_size: usize,
    ) -> Result<(), CheckpointError> {
        let mut mismatched = Vec::new();
        for (name, rows, cols, _) in named_tensors(&self.params) {
            let (want_r, want_c) =
                expected_shape(&name, feature_count, hidden_size).expect("known tensor");
            if rows != want_r || cols != want_c {
                mismatched.push((name, want_r, want_c, rows, cols));
            }
        }
        match mismatched.into_iter().next() {
            None => Ok(()),
            Some((tensor, expected_rows, expected_cols, rows, cols)) => {
                Err(CheckpointError::ShapeMismatch {
                    tensor,
                    expected_rows,
                    expected_cols,
                    rows,
                    cols,
                })
            }
        }
    }
}

fn layer_tensors<'a>(
    prefix: &str,
    l: &'a LstmLayerParams<f64>,
) -> Vec<(String, usize, usize, Vec<f64>)> {
    let t = |name: &str, t: &Tensor| {
        (format!("{prefix}.{name}"), t.rows(), t.cols(), t.data().to_vec())
    };
    let b = |name: &str, v: &[f64]| (format!("{prefix}.{name}"), 1, v.len(), v.to_vec());
    vec![
        t("w_i", &l.w_i),
        t("w_f", &l.w_f),
        t("w_o", &l.w_o),
        t("w_g", &l.w_g),
        t("u_i", &l.u_i),
        t("u_f", &l.u_f),
        t("u_o", &l.u_o),
        t("u_g", &l.u_g),
        b("b_i", &l.b_i),
        b("b_f", &l.b_f),
        b("b_o", &l.b_o),
        b("b_g", &l.b_g),
    ]
}

fn named_tensors(p: &ModelParams<f64>) -> Vec<(String, usize, usize, Vec<f64>)> {
    let mut out = layer_tensors("layer1", &p.layer1);
    out.extend(layer_tensors("layer2", &p.layer2));
    out.push(("w_y".into(), p.w_y.rows(), p.w_y.cols(), p.w_y.data().to_vec()));
    out.push(("b_y".into(), 1, p.b_y.len(), p.b_y.clone()));
    out
}

/// Shape each named tensor must have for the given model sizes.
fn expected_shape(name: &str, features: usize, hidden: usize) -> Option<(usize, usize)> {
    let (layer, field) = name.split_once('.').unwrap_or(("", name));
    match (layer, field) {
        ("layer1", "w_i" | "w_f" | "w_o" | "w_g") => Some((hidden, features)),
        ("layer2", "w_i" | "w_f" | "w_o" | "w_g") => Some((hidden, hidden)),
        ("layer1" | "layer2", "u_i" | "u_f" | "u_o" | "u_g") => Some((hidden, hidden)),
        ("layer1" | "layer2", "b_i" | "b_f" | "b_o" | "b_g") => Some((1, hidden)),
        ("", "w_y") => Some((crate::model::OUTPUT_HOURS, hidden)),
        ("", "b_y") => Some((1, crate::model::OUTPUT_HOURS)),
        _ => None,
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fn name(&mut self, s: &str) {
        assert!(s.len() <= u16::MAX as usize);
        self.u16(s.len() as u16);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

pub fn save_checkpoint(
    params: &ModelParams<f64>,
    stats: &NormStats,
    window: &WindowConfig,
    loss: &LossConfig,
    path: &Path,
) -> Result<(), CheckpointError> {
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(&MAGIC);
    w.u32(VERSION);

    w.u64(params.feature_count() as u64);
    w.u64(params.hidden_size() as u64);
    w.f64(params.dropout_rate);
    let tensors = named_tensors(params);
    w.u64(tensors.len() as u64);
    for (name, rows, cols, data) in &tensors {
        w.name(name);
        w.u64(*rows as u64);
        w.u64(*cols as u64);
        for v in data {
            w.f64(*v);
        }
    }

    w.u64(stats.feature_names.len() as u64);
    for (i, name) in stats.feature_names.iter().enumerate() {
        w.name(name);
        w.f64(stats.feature_mean[i]);
        w.f64(stats.feature_std[i]);
    }
    w.f64(stats.price_mean);
    w.f64(stats.price_std);
    w.u64(stats.dropped.len() as u64);
    for name in &stats.dropped {
        w.name(name);
    }

    w.u64(window.lookback as u64);
    w.u8(window.include_prediction_day as u8);

    w.u8(match loss.base {
        BaseLoss::Mae => 0,
        BaseLoss::Mse => 1,
    });
    w.f64(loss.alpha);
    w.f64(loss.beta);
    w.u8(loss.sum_aggregation as u8);

    std::fs::write(path, &w.buf)
        .map_err(|source| CheckpointError::Io { file: path.display().to_string(), source })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, reading: &str) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Truncated { reading: reading.to_string() });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self, reading: &str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, reading)?[0])
    }
    fn u16(&mut self, reading: &str) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2, reading)?.try_into().unwrap()))
    }
    fn u32(&mut self, reading: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, reading)?.try_into().unwrap()))
    }
    fn u64_as_usize(&mut self, reading: &str) -> Result<usize, CheckpointError> {
        let v = u64::from_le_bytes(self.take(8, reading)?.try_into().unwrap());
        usize::try_from(v)
            .map_err(|_| CheckpointError::Malformed(format!("{reading}: {v} overflows usize")))
    }
    fn f64(&mut self, reading: &str) -> Result<f64, CheckpointError> {
        Ok(f64::from_bits(u64::from_le_bytes(self.take(8, reading)?.try_into().unwrap())))
    }
    fn name(&mut self, reading: &str) -> Result<String, CheckpointError> {
        let len = self.u16(reading)? as usize;
        let bytes = self.take(len, reading)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| CheckpointError::Malformed(format!("{reading}: name is not UTF-8")))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let buf = std::fs::read(path)
        .map_err(|source| CheckpointError::Io { file: path.display().to_string(), source })?;
    let mut r = Reader { buf: &buf, pos: 0 };

    if r.take(4, "magic")? != MAGIC {
        return Err(CheckpointError::NotACheckpoint);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion { found: version });
    }

    let features = r.u64_as_usize("feature_count")?;
    let hidden = r.u64_as_usize("hidden_size")?;
    if features == 0 || hidden == 0 {
        return Err(CheckpointError::Malformed(format!(
            "model sizes must be positive, found {features} features, hidden {hidden}"
        )));
    }
    let dropout_rate = r.f64("dropout_rate")?;
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(CheckpointError::Malformed(format!(
            "dropout rate {dropout_rate} outside [0, 1)"
        )));
    }
    let mut params = ModelParams::<f64>::zeros(features, hidden);
    params.dropout_rate = dropout_rate;

    let tensor_count = r.u64_as_usize("tensor count")?;
    let expected_count = named_tensors(&params).len();
    if tensor_count != expected_count {
        return Err(CheckpointError::Malformed(format!(
            "expected {expected_count} tensors, found {tensor_count}"
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..tensor_count {
        let name = r.name("tensor name")?;
        let rows = r.u64_as_usize(&format!("tensor {name} rows"))?;
        let cols = r.u64_as_usize(&format!("tensor {name} cols"))?;
        let (want_r, want_c) = expected_shape(&name, features, hidden)
            .ok_or_else(|| CheckpointError::Malformed(format!("unknown tensor {name}")))?;
        if rows != want_r || cols != want_c {
            return Err(CheckpointError::ShapeMismatch {
                tensor: name,
                expected_rows: want_r,
                expected_cols: want_c,
                rows,
                cols,
            });
        }
        if !seen.insert(name.clone()) {
            return Err(CheckpointError::Malformed(format!("tensor {name} appears twice")));
        }
        let reading = format!("tensor {name} data");
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(r.f64(&reading)?);
        }
        store_tensor(&mut params, &name, rows, cols, data);
    }

    let n_features = r.u64_as_usize("normalization feature count")?;
    let mut stats = NormStats {
        feature_names: Vec::with_capacity(n_features),
        feature_mean: Vec::with_capacity(n_features),
        feature_std: Vec::with_capacity(n_features),
        price_mean: 0.0,
        price_std: 1.0,
        dropped: Vec::new(),
    };
    for _ in 0..n_features {
        stats.feature_names.push(r.name("normalization feature name")?);
        stats.feature_mean.push(r.f64("feature mean")?);
        stats.feature_std.push(r.f64("feature std")?);
    }
    stats.price_mean = r.f64("price mean")?;
    stats.price_std = r.f64("price std")?;
    let n_dropped = r.u64_as_usize("dropped feature count")?;
    for _ in 0..n_dropped {
        stats.dropped.push(r.name("dropped feature name")?);
    }

    let lookback = r.u64_as_usize("window lookback")?;
    let include_prediction_day = match r.u8("window prediction-day flag")? {
        0 => false,
        1 => true,
        other => {
            return Err(CheckpointError::Malformed(format!(
                "prediction-day flag must be 0 or 1, found {other}"
            )))
        }
    };
    let base = match r.u8("loss base")? {
        0 => BaseLoss::Mae,
        1 => BaseLoss::Mse,
        other => {
            return Err(CheckpointError::Malformed(format!("unknown base loss tag {other}")))
        }
    };
    let alpha = r.f64("loss alpha")?;
    let beta = r.f64("loss beta")?;
    let sum_aggregation = match r.u8("loss aggregation flag")? {
        0 => false,
        1 => true,
        other => {
            return Err(CheckpointError::Malformed(format!(
                "aggregation flag must be 0 or 1, found {other}"
            )))
        }
    };
    if r.pos != buf.len() {
        return Err(CheckpointError::Malformed(format!(
            "{} trailing bytes after the checkpoint payload",
            buf.len() - r.pos
        )));
    }

    Ok(Checkpoint {
        params,
        stats,
        window: WindowConfig { lookback, include_prediction_day },
        loss: LossConfig { base, alpha, beta, sum_aggregation },
    })
}

fn store_tensor(params: &mut ModelParams<f64>, name: &str, rows: usize, cols: usize, data: Vec<f64>) {
    let tensor = Tensor::new(rows, cols, data.clone()).expect("validated shape");
    let (layer, field) = name.split_once('.').unwrap_or(("", name));
    let target = match layer {
        "layer1" => Some(&mut params.layer1),
        "layer2" => Some(&mut params.layer2),
        _ => None,
    };
    match (target, field) {
        (Some(l), "w_i") => l.w_i = tensor,
        (Some(l), "w_f") => l.w_f = tensor,
        (Some(l), "w_o") => l.w_o = tensor,
        (Some(l), "w_g") => l.w_g = tensor,
        (Some(l), "u_i") => l.u_i = tensor,
        (Some(l), "u_f") => l.u_f = tensor,
        (Some(l), "u_o") => l.u_o = tensor,
        (Some(l), "u_g") => l.u_g = tensor,
        (Some(l), "b_i") => l.b_i = data,
        (Some(l), "b_f") => l.b_f = data,
        (Some(l), "b_o") => l.b_o = data,
        (Some(l), "b_g") => l.b_g = data,
        (None, "w_y") => params.w_y = tensor,
        (None, "b_y") => params.b_y = data,
        _ => unreachable!("expected_shape admitted {name}"),
    }
}
