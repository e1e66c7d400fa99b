//! Parameter update rules.
//!
//! Offline training uses Adam with global-norm gradient clipping. The
//! online update is plain SGD: the accept/reject gate around it assumes the
//! candidate parameters are a pure function of (params, eta, gradient), and
//! Adam's moments would leak state across rejected updates.

use thiserror::Error;

use crate::model::{ModelGrads, ModelParams};
use crate::scalar::Scalar;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
/// Default offline learning rate.
pub const DEFAULT_ETA: f64 = 1e-3;
/// Default offline clipping threshold; the online step runs unclipped.
pub const DEFAULT_CLIP_NORM: f64 = 5.0;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("gradient shape (features {grad_features}, hidden {grad_hidden}) does not match params (features {param_features}, hidden {param_hidden})")]
    ShapeMismatch {
        param_features: usize,
        param_hidden: usize,
        grad_features: usize,
        grad_hidden: usize,
    },
    #[error("optimizer kind does not support this operation")]
    WrongKind,
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments<T: Scalar> {
    pub m: ModelGrads<T>,
    pub v: ModelGrads<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerKind<T: Scalar> {
    Sgd,
    Adam(AdamMoments<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T: Scalar> {
    pub kind: OptimizerKind<T>,
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    pub clip_norm: Option<f64>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn sgd(eta: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            eta,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
            step_count: 0,
            clip_norm: None,
        }
    }

    pub fn adam(eta: f64, template: &ModelParams<T>) -> Self {
        Self {
            kind: OptimizerKind::Adam(AdamMoments {
                m: template.zeros_like(),
                v: template.zeros_like(),
            }),
            eta,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
            step_count: 0,
            clip_norm: Some(DEFAULT_CLIP_NORM),
        }
    }
}

fn check_shapes<T: Scalar>(
    params: &ModelParams<T>,
    grads: &ModelGrads<T>,
) -> Result<(), OptimizerError> {
    if params.feature_count() != grads.feature_count()
        || params.hidden_size() != grads.hidden_size()
    {
        return Err(OptimizerError::ShapeMismatch {
            param_features: params.feature_count(),
            param_hidden: params.hidden_size(),
            grad_features: grads.feature_count(),
            grad_hidden: grads.hidden_size(),
        });
    }
    Ok(())
}

/// Plain gradient step: theta' = theta - eta * g. Pure; the inputs are
/// untouched.
pub fn sgd_step<T: Scalar>(
    params: &ModelParams<T>,
    grads: &ModelGrads<T>,
    eta: f64,
) -> Result<ModelParams<T>, OptimizerError> {
    check_shapes(params, grads)?;
    let eta = T::from_f64(eta);
    let mut flat = params.flatten();
    for (p, g) in flat.iter_mut().zip(grads.flatten()) {
        *p = *p - eta * g;
    }
    let mut out = params.clone();
    out.load_flat(&flat).expect("same shape");
    Ok(out)
}

/// One Adam step with bias correction. Consumes and returns the state so a
/// rejected candidate can simply drop it.
pub fn adam_step<T: Scalar>(
    mut state: OptimizerState<T>,
    params: &ModelParams<T>,
    grads: &ModelGrads<T>,
) -> Result<(ModelParams<T>, OptimizerState<T>), OptimizerError> {
    check_shapes(params, grads)?;
    let moments = match &mut state.kind {
        OptimizerKind::Adam(m) => m,
        OptimizerKind::Sgd => return Err(OptimizerError::WrongKind),
    };
    state.step_count += 1;
    let t = state.step_count as i32;
    let b1 = T::from_f64(state.beta1);
    let b2 = T::from_f64(state.beta2);
    let one = T::one();
    let bias1 = one - T::from_f64(state.beta1).powi(t);
    let bias2 = one - T::from_f64(state.beta2).powi(t);
    let eta = T::from_f64(state.eta);
    let eps = T::from_f64(state.epsilon);

    let mut m_flat = moments.m.flatten();
    let mut v_flat = moments.v.flatten();
    let g_flat = grads.flatten();
    let mut p_flat = params.flatten();
    for k in 0..p_flat.len() {
        let g = g_flat[k];
        m_flat[k] = b1 * m_flat[k] + (one - b1) * g;
        v_flat[k] = b2 * v_flat[k] + (one - b2) * g * g;
        let m_hat = m_flat[k] / bias1;
        let v_hat = v_flat[k] / bias2;
        p_flat[k] = p_flat[k] - eta * m_hat / (v_hat.sqrt() + eps);
    }
    moments.m.load_flat(&m_flat).expect("same shape");
    moments.v.load_flat(&v_flat).expect("same shape");
    let mut out = params.clone();
    out.load_flat(&p_flat).expect("same shape");
    Ok((out, state))
}

/// Scale all gradients by max_norm/norm when the global L2 norm exceeds
/// max_norm; otherwise return them untouched.
pub fn clip_gradients<T: Scalar>(mut grads: ModelGrads<T>, max_norm: f64) -> ModelGrads<T> {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = grads.l2_norm().to_f64();
    if norm > max_norm {
        let scale = T::from_f64(max_norm / norm);
        let mut flat = grads.flatten();
        for v in flat.iter_mut() {
            *v = *v * scale;
        }
        grads.load_flat(&flat).expect("same shape");
    }
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelSpec};
    use crate::rng::SeededRng;

    fn small_params(seed: u64) -> ModelParams<f64> {
        init_params(
            &ModelSpec { feature_count: 2, hidden_size: 3, dropout_rate: 0.0 },
            &mut SeededRng::new(seed),
        )
    }

    fn random_grads(template: &ModelParams<f64>, seed: u64) -> ModelGrads<f64> {
        let mut rng = SeededRng::new(seed);
        let mut g = template.zeros_like();
        let flat: Vec<f64> =
            (0..g.param_count()).map(|_| rng.uniform(-1.0, 1.0)).collect();
        g.load_flat(&flat).unwrap();
        g
    }

    #[test]
    fn sgd_zero_gradients_change_nothing() {
        let p = small_params(1);
        let out = sgd_step(&p, &p.zeros_like(), 0.3).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn sgd_scalar_arithmetic() {
        let mut p = ModelParams::<f64>::zeros(1, 1);
        p.b_y[0] = 1.0;
        let mut g = p.zeros_like();
        g.b_y[0] = 2.0;
        let out = sgd_step(&p, &g, 0.1).unwrap();
        assert!((out.b_y[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sgd_zero_eta_is_identity() {
        let p = small_params(3);
        let g = random_grads(&p, 4);
        let out = sgd_step(&p, &g, 0.0).unwrap();
        let same = out
            .flatten()
            .iter()
            .zip(p.flatten())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same);
    }

    #[test]
    fn sgd_involution_on_dyadic_values() {
        // Step sizes and values chosen so every product and sum is exact in
        // binary floating point; only then can undoing a step be bit-exact.
        let mut p = ModelParams::<f64>::zeros(2, 2);
        let mut rng = SeededRng::new(5);
        let dyadic =
            |rng: &mut SeededRng| (rng.next_index(65) as f64 - 32.0) / 1024.0;
        let flat: Vec<f64> = (0..p.param_count()).map(|_| dyadic(&mut rng)).collect();
        p.load_flat(&flat).unwrap();
        let mut g = p.zeros_like();
        let gflat: Vec<f64> = (0..g.param_count()).map(|_| dyadic(&mut rng)).collect();
        g.load_flat(&gflat).unwrap();

        let forward = sgd_step(&p, &g, 0.5).unwrap();
        let back = sgd_step(&forward, &g, -0.5).unwrap();
        let same = back
            .flatten()
            .iter()
            .zip(p.flatten())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same);
    }

    #[test]
    fn sgd_shape_mismatch_is_an_error() {
        let p = ModelParams::<f64>::zeros(2, 3);
        let g = ModelParams::<f64>::zeros(3, 4);
        assert!(matches!(
            sgd_step(&p, &g, 0.1),
            Err(OptimizerError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn adam_matches_scalar_trace() {
        // Hand-rolled scalar Adam, eta=0.1, defaults, gradients 2, -1, 0.5:
        // theta: 1.0 -> 0.900000000500000 -> 0.873366296702431
        //            -> 0.839323382138943
        let mut p = ModelParams::<f64>::zeros(1, 1);
        p.b_y[0] = 1.0;
        let mut state = OptimizerState::adam(0.1, &p);
        let expected = [0.900000000500000, 0.873366296702431, 0.839323382138943];
        for (g_val, want) in [2.0, -1.0, 0.5].iter().zip(expected) {
            let mut g = p.zeros_like();
            g.b_y[0] = *g_val;
            let (next, next_state) = adam_step(state, &p, &g).unwrap();
            p = next;
            state = next_state;
            assert!((p.b_y[0] - want).abs() < 1e-12, "got {}", p.b_y[0]);
        }
        assert_eq!(state.step_count, 3);
    }

    #[test]
    fn adam_zero_gradients_first_step_is_identity() {
        let p = small_params(7);
        let state = OptimizerState::adam(1e-3, &p);
        let (out, _) = adam_step(state, &p, &p.zeros_like()).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn adam_is_deterministic() {
        let p = small_params(9);
        let g = random_grads(&p, 10);
        let run = || {
            let mut params = p.clone();
            let mut state = OptimizerState::adam(1e-2, &params);
            for _ in 0..5 {
                let (next, next_state) = adam_step(state, &params, &g).unwrap();
                params = next;
                state = next_state;
            }
            params
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn adam_rejects_sgd_state() {
        let p = small_params(11);
        let state = OptimizerState::<f64>::sgd(0.1);
        assert!(matches!(
            adam_step(state, &p, &p.zeros_like()),
            Err(OptimizerError::WrongKind)
        ));
    }

    #[test]
    fn clip_below_threshold_is_identity() {
        let p = small_params(13);
        let g = random_grads(&p, 14);
        let norm = g.l2_norm();
        let clipped = clip_gradients(g.clone(), norm + 1.0);
        assert_eq!(clipped, g);
    }

    #[test]
    fn clip_rescales_to_threshold() {
        let p = ModelParams::<f64>::zeros(1, 1);
        let mut g = p.zeros_like();
        // Two entries 6 and 8: norm 10.
        g.b_y[0] = 6.0;
        g.b_y[1] = 8.0;
        let clipped = clip_gradients(g.clone(), 5.0);
        assert!((clipped.l2_norm() - 5.0).abs() < 1e-12);
        assert!((clipped.b_y[0] - 3.0).abs() < 1e-12);
        assert!((clipped.b_y[1] - 4.0).abs() < 1e-12);

        // Direction preserved: cosine similarity 1.
        let a = g.flatten();
        let b = clipped.flatten();
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let cos = dot / (g.l2_norm() * clipped.l2_norm());
        assert!((cos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clip_never_increases_norm() {
        let p = small_params(17);
        let mut rng = SeededRng::new(18);
        for _ in 0..10 {
            let g = random_grads(&p, rng.next_u64());
            let before = g.l2_norm();
            let after = clip_gradients(g, 2.0).l2_norm();
            assert!(after <= before.max(2.0) + 1e-12);
            assert!(after <= 2.0 + 1e-12 || after <= before);
        }
    }

    #[test]
    fn adam_descends_a_convex_quadratic() {
        // f(theta) = 0.5 sum c_k (theta_k - t_k)^2, gradient c .* (theta-t).
        let mut rng = SeededRng::new(19);
        let mut params = ModelParams::<f64>::zeros(1, 2);
        let n = params.param_count();
        let start: Vec<f64> = (0..n).map(|_| rng.uniform(-0.05, 0.05)).collect();
        params.load_flat(&start).unwrap();
        let targets: Vec<f64> = (0..n).map(|_| rng.uniform(-0.1, 0.1)).collect();
        let curv: Vec<f64> = (0..n).map(|_| rng.uniform(0.5, 2.0)).collect();

        let loss = |p: &ModelParams<f64>| -> f64 {
            p.flatten()
                .iter()
                .zip(&targets)
                .zip(&curv)
                .map(|((x, t), c)| 0.5 * c * (x - t) * (x - t))
                .sum()
        };
        let initial = loss(&params);
        let mut state = OptimizerState::adam(DEFAULT_ETA, &params);
        for _ in 0..200 {
            let flat = params.flatten();
            let gflat: Vec<f64> = flat
                .iter()
                .zip(&targets)
                .zip(&curv)
                .map(|((x, t), c)| c * (x - t))
                .collect();
            let mut g = params.zeros_like();
            g.load_flat(&gflat).unwrap();
            let (next, next_state) = adam_step(state, &params, &g).unwrap();
            params = next;
            state = next_state;
        }
        let final_loss = loss(&params);
        assert!(
            final_loss <= 0.01 * initial,
            "initial {initial}, final {final_loss}"
        );
    }
}
