//! Stacked two-layer LSTM forecaster with a dense head.
//!
//! A sliding window of feature-day matrices (M features x 24 hours) is
//! unrolled hour by hour: each step feeds one M-vector through layer 1,
//! inverted dropout, layer 2, inverted dropout. The dense head maps the
//! final layer-2 hidden state to the 24 hourly prices of the next day.
//! `backward` implements full BPTT by hand; its gradients are verified
//! against [`crate::gradcheck`] in the tests.

use std::ops::Range;

use thiserror::Error;

use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::{sigmoid, Tensor2, TensorError};

/// Fixed forecast horizon: one value per hour of the target day.
pub const OUTPUT_HOURS: usize = 24;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("window must contain at least one day")]
    EmptyWindow,
    #[error("day {day} has {got} feature rows, expected {expected}")]
    FeatureCount { day: usize, expected: usize, got: usize },
    #[error("day {day} has {got} columns, expected {expected} hours")]
    HourCount { day: usize, expected: usize, got: usize },
    #[error("input length {got} does not match layer input size {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("state length {got} does not match hidden size {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("trace does not match params: {0}")]
    TraceMismatch(String),
    #[error("flat parameter vector has length {got}, expected {expected}")]
    FlatLength { expected: usize, got: usize },
}

/// One LSTM layer: four gates, each with input weights W (hidden x input),
/// recurrent weights U (hidden x hidden), and a bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams<T: Scalar> {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w_i: Tensor2<T>,
    pub w_f: Tensor2<T>,
    pub w_o: Tensor2<T>,
    pub w_g: Tensor2<T>,
    pub u_i: Tensor2<T>,
    pub u_f: Tensor2<T>,
    pub u_o: Tensor2<T>,
    pub u_g: Tensor2<T>,
    pub b_i: Vec<T>,
    pub b_f: Vec<T>,
    pub b_o: Vec<T>,
    pub b_g: Vec<T>,
}

impl<T: Scalar> LstmLayerParams<T> {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            input_size,
            hidden_size,
            w_i: Tensor2::zeros(hidden_size, input_size),
            w_f: Tensor2::zeros(hidden_size, input_size),
            w_o: Tensor2::zeros(hidden_size, input_size),
            w_g: Tensor2::zeros(hidden_size, input_size),
            u_i: Tensor2::zeros(hidden_size, hidden_size),
            u_f: Tensor2::zeros(hidden_size, hidden_size),
            u_o: Tensor2::zeros(hidden_size, hidden_size),
            u_g: Tensor2::zeros(hidden_size, hidden_size),
            b_i: vec![T::zero(); hidden_size],
            b_f: vec![T::zero(); hidden_size],
            b_o: vec![T::zero(); hidden_size],
            b_g: vec![T::zero(); hidden_size],
        }
    }

    /// Flat length of this layer in the canonical parameter order.
    pub fn param_count(&self) -> usize {
        4 * self.hidden_size * self.input_size
            + 4 * self.hidden_size * self.hidden_size
            + 4 * self.hidden_size
    }

    fn push_flat(&self, out: &mut Vec<T>) {
        for t in [
            &self.w_i, &self.w_f, &self.w_o, &self.w_g, &self.u_i, &self.u_f, &self.u_o,
            &self.u_g,
        ] {
            out.extend_from_slice(t.data());
        }
        for b in [&self.b_i, &self.b_f, &self.b_o, &self.b_g] {
            out.extend_from_slice(b);
        }
    }

    fn load_flat(&mut self, src: &[T]) {
        let mut pos = 0;
        for t in [
            &mut self.w_i, &mut self.w_f, &mut self.w_o, &mut self.w_g, &mut self.u_i,
            &mut self.u_f, &mut self.u_o, &mut self.u_g,
        ] {
            let n = t.rows() * t.cols();
            t.data_mut().copy_from_slice(&src[pos..pos + n]);
            pos += n;
        }
        for b in [&mut self.b_i, &mut self.b_f, &mut self.b_o, &mut self.b_g] {
            let n = b.len();
            b.copy_from_slice(&src[pos..pos + n]);
            pos += n;
        }
        debug_assert_eq!(pos, src.len());
    }

    fn zero_in_place(&mut self) {
        for t in [
            &mut self.w_i, &mut self.w_f, &mut self.w_o, &mut self.w_g, &mut self.u_i,
            &mut self.u_f, &mut self.u_o, &mut self.u_g,
        ] {
            t.data_mut().fill(T::zero());
        }
        for b in [&mut self.b_i, &mut self.b_f, &mut self.b_o, &mut self.b_g] {
            b.fill(T::zero());
        }
    }
}

/// The full forecaster: two stacked LSTM layers and a dense head.
///
/// Also used as the gradient container (`backward` returns one of these,
/// shaped like the parameters it differentiates); `dropout_rate` is inert
/// in that role.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T: Scalar> {
    pub layer1: LstmLayerParams<T>,
    pub layer2: LstmLayerParams<T>,
    /// Dense head weights, OUTPUT_HOURS x hidden_size.
    pub w_y: Tensor2<T>,
    pub b_y: Vec<T>,
    pub dropout_rate: f64,
}

/// Gradients share the parameter layout; see [`ModelParams`].
pub type ModelGrads<T> = ModelParams<T>;

/// Named parameter blocks, used for freezing during online updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerId {
    Lstm1,
    Lstm2,
    Head,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(feature_count: usize, hidden_size: usize) -> Self {
        Self {
            layer1: LstmLayerParams::zeros(feature_count, hidden_size),
            layer2: LstmLayerParams::zeros(hidden_size, hidden_size),
            w_y: Tensor2::zeros(OUTPUT_HOURS, hidden_size),
            b_y: vec![T::zero(); OUTPUT_HOURS],
            dropout_rate: 0.0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.layer1.input_size, self.layer1.hidden_size)
    }

    pub fn feature_count(&self) -> usize {
        self.layer1.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.layer1.hidden_size
    }

    pub fn param_count(&self) -> usize {
        self.layer1.param_count()
            + self.layer2.param_count()
            + OUTPUT_HOURS * self.layer2.hidden_size
            + OUTPUT_HOURS
    }

    /// Canonical flat order: layer1 (W_i W_f W_o W_g U_i U_f U_o U_g
    /// b_i b_f b_o b_g, each row-major), layer2 likewise, then W_y, b_y.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        self.layer1.push_flat(&mut out);
        self.layer2.push_flat(&mut out);
        out.extend_from_slice(self.w_y.data());
        out.extend_from_slice(&self.b_y);
        out
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn load_flat(&mut self, src: &[T]) -> Result<(), ModelError> {
        let expected = self.param_count();
        if src.len() != expected {
            return Err(ModelError::FlatLength { expected, got: src.len() });
        }
        let l1 = self.layer1.param_count();
        let l2 = self.layer2.param_count();
        self.layer1.load_flat(&src[..l1]);
        self.layer2.load_flat(&src[l1..l1 + l2]);
        let wy = self.w_y.rows() * self.w_y.cols();
        self.w_y.data_mut().copy_from_slice(&src[l1 + l2..l1 + l2 + wy]);
        self.b_y.copy_from_slice(&src[l1 + l2 + wy..]);
        Ok(())
    }

    /// Index ranges of each block within the flat vector.
    pub fn layer_range(&self, id: LayerId) -> Range<usize> {
        let l1 = self.layer1.param_count();
        let l2 = self.layer2.param_count();
        match id {
            LayerId::Lstm1 => 0..l1,
            LayerId::Lstm2 => l1..l1 + l2,
            LayerId::Head => l1 + l2..self.param_count(),
        }
    }

    /// Zero every tensor in one block; used to freeze a layer's gradients.
    pub fn zero_layer(&mut self, id: LayerId) {
        match id {
            LayerId::Lstm1 => self.layer1.zero_in_place(),
            LayerId::Lstm2 => self.layer2.zero_in_place(),
            LayerId::Head => {
                self.w_y.data_mut().fill(T::zero());
                self.b_y.fill(T::zero());
            }
        }
    }

    /// Euclidean norm over every parameter coordinate.
    pub fn l2_norm(&self) -> T {
        let mut acc = T::zero();
        for v in self.flatten() {
            acc += v * v;
        }
        acc.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

/// Hidden and cell state of one LSTM layer.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState<T: Scalar> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Scalar> HiddenState<T> {
    pub fn zeros(hidden_size: usize) -> Self {
        Self { h: vec![T::zero(); hidden_size], c: vec![T::zero(); hidden_size] }
    }
}

/// Everything one cell step produced; backward needs all of it.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStep<T: Scalar> {
    pub i: Vec<T>,
    pub f: Vec<T>,
    pub o: Vec<T>,
    pub g: Vec<T>,
    pub c: Vec<T>,
    pub h: Vec<T>,
}

/// Per-layer history: one step record per hour, plus the inverted-dropout
/// mask applied to that hour's output (all ones in infer mode or rate 0).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace<T: Scalar> {
    pub steps: Vec<LayerStep<T>>,
    pub masks: Vec<Vec<T>>,
}

/// Full forward record: inputs consumed, both layer histories, and the
/// prediction. Self-contained for an exact backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T: Scalar> {
    pub inputs: Vec<Vec<T>>,
    pub layer1: LayerTrace<T>,
    pub layer2: LayerTrace<T>,
    pub prediction: Vec<T>,
}

/// Forward-pass mode. Train mode draws dropout masks from the supplied rng;
/// infer mode is deterministic and applies no dropout.
pub enum Mode<'r> {
    Train(&'r mut SeededRng),
    Infer,
}

fn gate_preactivation<T: Scalar>(
    w: &Tensor2<T>,
    u: &Tensor2<T>,
    b: &[T],
    x: &[T],
    h: &[T],
) -> Result<Vec<T>, TensorError> {
    let mut a = w.matvec(x)?;
    let rec = u.matvec(h)?;
    for (ai, (r, bi)) in a.iter_mut().zip(rec.iter().zip(b.iter())) {
        *ai = *ai + *r + *bi;
    }
    Ok(a)
}

fn cell_step_full<T: Scalar>(
    params: &LstmLayerParams<T>,
    x: &[T],
    prev: &HiddenState<T>,
) -> Result<LayerStep<T>, ModelError> {
    if x.len() != params.input_size {
        return Err(ModelError::InputLength { expected: params.input_size, got: x.len() });
    }
    if prev.h.len() != params.hidden_size || prev.c.len() != params.hidden_size {
        return Err(ModelError::StateLength {
            expected: params.hidden_size,
            got: prev.h.len(),
        });
    }
    let mut i = gate_preactivation(&params.w_i, &params.u_i, &params.b_i, x, &prev.h)?;
    let mut f = gate_preactivation(&params.w_f, &params.u_f, &params.b_f, x, &prev.h)?;
    let mut o = gate_preactivation(&params.w_o, &params.u_o, &params.b_o, x, &prev.h)?;
    let mut g = gate_preactivation(&params.w_g, &params.u_g, &params.b_g, x, &prev.h)?;
    for v in i.iter_mut() {
        *v = sigmoid(*v);
    }
    for v in f.iter_mut() {
        *v = sigmoid(*v);
    }
    for v in o.iter_mut() {
        *v = sigmoid(*v);
    }
    for v in g.iter_mut() {
        *v = v.tanh();
    }
    let mut c = vec![T::zero(); params.hidden_size];
    let mut h = vec![T::zero(); params.hidden_size];
    for k in 0..params.hidden_size {
        c[k] = f[k] * prev.c[k] + i[k] * g[k];
        h[k] = o[k] * c[k].tanh();
    }
    Ok(LayerStep { i, f, o, g, c, h })
}

/// One LSTM cell update: i = sigma(W_i x + U_i h + b_i), likewise f and o,
/// g = tanh(W_g x + U_g h + b_g), c' = f*c + i*g, h' = o*tanh(c').
pub fn lstm_cell_step<T: Scalar>(
    params: &LstmLayerParams<T>,
    x: &[T],
    prev: &HiddenState<T>,
) -> Result<HiddenState<T>, ModelError> {
    let step = cell_step_full(params, x, prev)?;
    Ok(HiddenState { h: step.h, c: step.c })
}

fn draw_mask<T: Scalar>(rate: f64, size: usize, mode: &mut Mode) -> Vec<T> {
    match mode {
        Mode::Train(rng) if rate > 0.0 => {
            let scale = T::from_f64(1.0 / (1.0 - rate));
            (0..size)
                .map(|_| if rng.next_f64() < rate { T::zero() } else { scale })
                .collect()
        }
        _ => vec![T::one(); size],
    }
}

/// Run the full network over a window of M x 24 feature-day matrices,
/// oldest day first. Hours advance in chronological order within each day.
///
/// In train mode an inverted-dropout mask is drawn per step for each layer's
/// output (layer 1's mask before layer 2 consumes that hour); the recurrent
/// path always uses the pre-dropout hidden state. Mask draws consume
/// `hidden_size` uniforms per layer per step, unit index ascending, so a
/// given rng seed fixes the masks regardless of parameter values.
pub fn forward<T: Scalar>(
    params: &ModelParams<T>,
    window: &[Tensor2<T>],
    mut mode: Mode,
) -> Result<ForwardTrace<T>, ModelError> {
    if window.is_empty() {
        return Err(ModelError::EmptyWindow);
    }
    let m = params.layer1.input_size;
    let hidden = params.layer1.hidden_size;
    for (day, feats) in window.iter().enumerate() {
        if feats.rows() != m {
            return Err(ModelError::FeatureCount { day, expected: m, got: feats.rows() });
        }
        if feats.cols() != OUTPUT_HOURS {
            return Err(ModelError::HourCount { day, expected: OUTPUT_HOURS, got: feats.cols() });
        }
    }

    let steps = window.len() * OUTPUT_HOURS;
    let mut trace = ForwardTrace {
        inputs: Vec::with_capacity(steps),
        layer1: LayerTrace { steps: Vec::with_capacity(steps), masks: Vec::with_capacity(steps) },
        layer2: LayerTrace { steps: Vec::with_capacity(steps), masks: Vec::with_capacity(steps) },
        prediction: Vec::new(),
    };
    let mut state1 = HiddenState::zeros(hidden);
    let mut state2 = HiddenState::zeros(hidden);
    let rate = params.dropout_rate;

    for feats in window {
        for hour in 0..OUTPUT_HOURS {
            let x = feats.col_vec(hour);
            let step1 = cell_step_full(&params.layer1, &x, &state1)?;
            let mask1 = draw_mask::<T>(rate, hidden, &mut mode);
            let x2: Vec<T> =
                step1.h.iter().zip(&mask1).map(|(&hv, &mv)| hv * mv).collect();
            let step2 = cell_step_full(&params.layer2, &x2, &state2)?;
            let mask2 = draw_mask::<T>(rate, hidden, &mut mode);

            state1 = HiddenState { h: step1.h.clone(), c: step1.c.clone() };
            state2 = HiddenState { h: step2.h.clone(), c: step2.c.clone() };
            trace.inputs.push(x);
            trace.layer1.steps.push(step1);
            trace.layer1.masks.push(mask1);
            trace.layer2.steps.push(step2);
            trace.layer2.masks.push(mask2);
        }
    }

    let last = trace.layer2.steps.last().expect("window is non-empty");
    let last_mask = trace.layer2.masks.last().expect("window is non-empty");
    let dropped: Vec<T> =
        last.h.iter().zip(last_mask).map(|(&hv, &mv)| hv * mv).collect();
    let mut pred = params.w_y.matvec(&dropped)?;
    for (p, b) in pred.iter_mut().zip(&params.b_y) {
        *p = *p + *b;
    }
    trace.prediction = pred;
    Ok(trace)
}

/// Deterministic prediction: forward in infer mode, returning just the
/// 24-vector.
pub fn predict<T: Scalar>(
    params: &ModelParams<T>,
    window: &[Tensor2<T>],
) -> Result<Vec<T>, ModelError> {
    Ok(forward(params, window, Mode::Infer)?.prediction)
}

struct LayerBackward<T: Scalar> {
    grads: LstmLayerParams<T>,
    /// Gradient w.r.t. this layer's input at each step.
    d_inputs: Vec<Vec<T>>,
}

/// BPTT through one layer. `d_h_direct[t]` is the gradient flowing into the
/// layer's pre-dropout hidden state at step t from outside the recurrence
/// (already mask-multiplied by the caller).
fn layer_backward<T: Scalar>(
    params: &LstmLayerParams<T>,
    steps: &[LayerStep<T>],
    inputs: &[Vec<T>],
    d_h_direct: &[Vec<T>],
) -> Result<LayerBackward<T>, ModelError> {
    let hidden = params.hidden_size;
    let n = steps.len();
    let mut grads = LstmLayerParams::zeros(params.input_size, hidden);
    let mut d_inputs = vec![vec![T::zero(); params.input_size]; n];
    let mut d_h_next = vec![T::zero(); hidden];
    let mut d_c_next = vec![T::zero(); hidden];
    let zero_state = vec![T::zero(); hidden];

    for t in (0..n).rev() {
        let step = &steps[t];
        let (h_prev, c_prev) = if t == 0 {
            (&zero_state, &zero_state)
        } else {
            (&steps[t - 1].h, &steps[t - 1].c)
        };

        let mut da_i = vec![T::zero(); hidden];
        let mut da_f = vec![T::zero(); hidden];
        let mut da_o = vec![T::zero(); hidden];
        let mut da_g = vec![T::zero(); hidden];
        let mut d_c_prev = vec![T::zero(); hidden];
        for k in 0..hidden {
            let dh = d_h_direct[t][k] + d_h_next[k];
            let tc = step.c[k].tanh();
            let d_o = dh * tc;
            let dc = d_c_next[k] + dh * step.o[k] * (T::one() - tc * tc);
            let d_f = dc * c_prev[k];
            let d_i = dc * step.g[k];
            let d_g = dc * step.i[k];
            da_i[k] = d_i * step.i[k] * (T::one() - step.i[k]);
            da_f[k] = d_f * step.f[k] * (T::one() - step.f[k]);
            da_o[k] = d_o * step.o[k] * (T::one() - step.o[k]);
            da_g[k] = d_g * (T::one() - step.g[k] * step.g[k]);
            d_c_prev[k] = dc * step.f[k];
        }

        let x = &inputs[t];
        grads.w_i.add_outer(&da_i, x)?;
        grads.w_f.add_outer(&da_f, x)?;
        grads.w_o.add_outer(&da_o, x)?;
        grads.w_g.add_outer(&da_g, x)?;
        grads.u_i.add_outer(&da_i, h_prev)?;
        grads.u_f.add_outer(&da_f, h_prev)?;
        grads.u_o.add_outer(&da_o, h_prev)?;
        grads.u_g.add_outer(&da_g, h_prev)?;
        for k in 0..hidden {
            grads.b_i[k] += da_i[k];
            grads.b_f[k] += da_f[k];
            grads.b_o[k] += da_o[k];
            grads.b_g[k] += da_g[k];
        }

        let mut dx = params.w_i.tr_matvec(&da_i)?;
        for (acc, v) in dx.iter_mut().zip(params.w_f.tr_matvec(&da_f)?) {
            *acc += v;
        }
        for (acc, v) in dx.iter_mut().zip(params.w_o.tr_matvec(&da_o)?) {
            *acc += v;
        }
        for (acc, v) in dx.iter_mut().zip(params.w_g.tr_matvec(&da_g)?) {
            *acc += v;
        }
        d_inputs[t] = dx;

        let mut dh_prev = params.u_i.tr_matvec(&da_i)?;
        for (acc, v) in dh_prev.iter_mut().zip(params.u_f.tr_matvec(&da_f)?) {
            *acc += v;
        }
        for (acc, v) in dh_prev.iter_mut().zip(params.u_o.tr_matvec(&da_o)?) {
            *acc += v;
        }
        for (acc, v) in dh_prev.iter_mut().zip(params.u_g.tr_matvec(&da_g)?) {
            *acc += v;
        }
        d_h_next = dh_prev;
        d_c_next = d_c_prev;
    }

    Ok(LayerBackward { grads, d_inputs })
}

/// Exact gradients of a scalar loss with respect to every parameter, given
/// the forward trace and dLoss/dPrediction.
pub fn backward<T: Scalar>(
    params: &ModelParams<T>,
    trace: &ForwardTrace<T>,
    d_prediction: &[T],
) -> Result<ModelGrads<T>, ModelError> {
    let hidden = params.layer1.hidden_size;
    let n = trace.layer1.steps.len();
    if n == 0 {
        return Err(ModelError::TraceMismatch("empty trace".into()));
    }
    if trace.layer2.steps.len() != n
        || trace.inputs.len() != n
        || trace.layer1.masks.len() != n
        || trace.layer2.masks.len() != n
    {
        return Err(ModelError::TraceMismatch("step counts disagree".into()));
    }
    if trace.inputs[0].len() != params.layer1.input_size {
        return Err(ModelError::TraceMismatch(format!(
            "trace input width {} vs layer1 input size {}",
            trace.inputs[0].len(),
            params.layer1.input_size
        )));
    }
    if trace.layer1.steps[0].h.len() != hidden || trace.layer2.steps[0].h.len() != hidden {
        return Err(ModelError::TraceMismatch("hidden sizes disagree".into()));
    }
    if d_prediction.len() != OUTPUT_HOURS || trace.prediction.len() != OUTPUT_HOURS {
        return Err(ModelError::TraceMismatch(format!(
            "prediction gradient has length {}, expected {OUTPUT_HOURS}",
            d_prediction.len()
        )));
    }

    let mut grads = params.zeros_like();

    // Dense head: y = W_y (mask2 . h2_last) + b_y.
    let last = &trace.layer2.steps[n - 1];
    let last_mask = &trace.layer2.masks[n - 1];
    let dropped: Vec<T> =
        last.h.iter().zip(last_mask).map(|(&hv, &mv)| hv * mv).collect();
    grads.b_y.copy_from_slice(d_prediction);
    grads.w_y.add_outer(d_prediction, &dropped)?;
    let d_dropped = params.w_y.tr_matvec(d_prediction)?;

    // Only the final step's layer-2 output reaches the head; dropout
    // backward is the same mask multiply.
    let mut d_h2 = vec![vec![T::zero(); hidden]; n];
    for k in 0..hidden {
        d_h2[n - 1][k] = d_dropped[k] * last_mask[k];
    }

    // Layer 2 consumes the dropped layer-1 output at every step.
    let x2: Vec<Vec<T>> = (0..n)
        .map(|t| {
            trace.layer1.steps[t]
                .h
                .iter()
                .zip(&trace.layer1.masks[t])
                .map(|(&hv, &mv)| hv * mv)
                .collect()
        })
        .collect();
    let back2 = layer_backward(&params.layer2, &trace.layer2.steps, &x2, &d_h2)?;
    grads.layer2 = back2.grads;

    let d_h1: Vec<Vec<T>> = (0..n)
        .map(|t| {
            back2.d_inputs[t]
                .iter()
                .zip(&trace.layer1.masks[t])
                .map(|(&dv, &mv)| dv * mv)
                .collect()
        })
        .collect();
    let back1 = layer_backward(&params.layer1, &trace.layer1.steps, &trace.inputs, &d_h1)?;
    grads.layer1 = back1.grads;

    Ok(grads)
}

/// Architecture hyperparameters for [`init_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub feature_count: usize,
    pub hidden_size: usize,
    pub dropout_rate: f64,
}

/// Xavier-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases
/// except forget-gate biases at 1.0. Draw order: layer1 W gates then U
/// gates (i, f, o, g; row-major), layer2 likewise, then W_y.
pub fn init_params<T: Scalar>(spec: &ModelSpec, rng: &mut SeededRng) -> ModelParams<T> {
    assert!(spec.hidden_size >= 1 && spec.feature_count >= 1);
    assert!((0.0..1.0).contains(&spec.dropout_rate));
    let mut params = ModelParams::zeros(spec.feature_count, spec.hidden_size);
    params.dropout_rate = spec.dropout_rate;
    init_layer(&mut params.layer1, rng);
    init_layer(&mut params.layer2, rng);
    let bound = xavier_bound(spec.hidden_size, OUTPUT_HOURS);
    fill_uniform(&mut params.w_y, bound, rng);
    params
}

fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn fill_uniform<T: Scalar>(t: &mut Tensor2<T>, bound: f64, rng: &mut SeededRng) {
    for v in t.data_mut() {
        *v = T::from_f64(rng.uniform(-bound, bound));
    }
}

fn init_layer<T: Scalar>(layer: &mut LstmLayerParams<T>, rng: &mut SeededRng) {
    let w_bound = xavier_bound(layer.input_size, layer.hidden_size);
    let u_bound = xavier_bound(layer.hidden_size, layer.hidden_size);
    fill_uniform(&mut layer.w_i, w_bound, rng);
    fill_uniform(&mut layer.w_f, w_bound, rng);
    fill_uniform(&mut layer.w_o, w_bound, rng);
    fill_uniform(&mut layer.w_g, w_bound, rng);
    fill_uniform(&mut layer.u_i, u_bound, rng);
    fill_uniform(&mut layer.u_f, u_bound, rng);
    fill_uniform(&mut layer.u_o, u_bound, rng);
    fill_uniform(&mut layer.u_g, u_bound, rng);
    layer.b_f.fill(T::one());
}
