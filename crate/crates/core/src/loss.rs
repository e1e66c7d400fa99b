//! Composite training objective with exact analytic gradients.
//!
//! Per forecast day: mean base regression loss (MAE or MSE) over the 24
//! hours, plus alpha times the Jensen-Shannon divergence between the
//! softmax-normalized prediction and target, plus beta times a smoothness
//! penalty on consecutive predicted hours. Gradients are derived by hand
//! and checked against the finite-difference oracle in the tests.

use thiserror::Error;

use crate::model::OUTPUT_HOURS;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("probability vector invalid: {0}")]
    BadProbability(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("expected a {expected}-vector, got length {got}")]
    BadLength { expected: usize, got: usize },
    #[error("batch is empty")]
    EmptyBatch,
}

/// Base per-hour regression loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseLoss {
    Mae,
    Mse,
}

/// Weights of the composite objective.
///
/// `sum_aggregation` selects the audit variant where the divergence and
/// smoothness sums are left unnormalized across the batch; the default
/// divides all three terms by the batch size so per-day magnitudes do not
/// depend on batch size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub base: BaseLoss,
    pub alpha: f64,
    pub beta: f64,
    pub sum_aggregation: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { base: BaseLoss::Mae, alpha: 1.0, beta: 0.01, sum_aggregation: false }
    }
}

/// Strictly positive probabilities summing to one.
///
/// The sum tolerance is 1e-12 at f64; at f32 it relaxes to a small multiple
/// of machine epsilon since 1e-12 is unrepresentable there.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector<T: Scalar> {
    p: Vec<T>,
}

impl<T: Scalar> ProbVector<T> {
    pub fn new(p: Vec<T>) -> Result<Self, LossError> {
        if p.is_empty() {
            return Err(LossError::BadProbability("empty vector".into()));
        }
        let mut sum = T::zero();
        for (k, &v) in p.iter().enumerate() {
            if !v.is_finite() {
                return Err(LossError::NonFinite(k));
            }
            if v <= T::zero() {
                return Err(LossError::BadProbability(format!(
                    "element {k} is {} but must be strictly positive",
                    v.to_f64()
                )));
            }
            sum += v;
        }
        let tol = T::from_f64(1e-12).max(T::epsilon() * T::from_f64(100.0));
        if (sum - T::one()).abs() > tol {
            return Err(LossError::BadProbability(format!(
                "elements sum to {}, expected 1",
                sum.to_f64()
            )));
        }
        Ok(Self { p })
    }

    pub fn as_slice(&self) -> &[T] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// Softmax with max-subtraction: p_t = exp(y_t - max) / sum exp(y_s - max).
pub fn softmax_day<T: Scalar>(y: &[T]) -> Result<ProbVector<T>, LossError> {
    if y.is_empty() {
        return Err(LossError::BadLength { expected: OUTPUT_HOURS, got: 0 });
    }
    for (k, v) in y.iter().enumerate() {
        if !v.is_finite() {
            return Err(LossError::NonFinite(k));
        }
    }
    let max = y.iter().copied().fold(y[0], T::max);
    let exps: Vec<T> = y.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = exps.iter().fold(T::zero(), |acc, &e| acc + e);
    ProbVector::new(exps.into_iter().map(|e| e / sum).collect())
}

/// Kullback-Leibler divergence sum p_i ln(p_i/q_i), in nats.
pub fn kl_div<T: Scalar>(p: &ProbVector<T>, q: &ProbVector<T>) -> Result<T, LossError> {
    if p.len() != q.len() {
        return Err(LossError::LengthMismatch { left: p.len(), right: q.len() });
    }
    let mut acc = T::zero();
    for (&pi, &qi) in p.as_slice().iter().zip(q.as_slice()) {
        acc += pi * (pi / qi).ln();
    }
    Ok(acc)
}

/// Jensen-Shannon divergence in nats: with M = (p_hat + p)/2, returns
/// (KL(p_hat || M) + KL(p || M)) / 2. Symmetric and bounded by ln 2.
pub fn jsd<T: Scalar>(p_hat: &ProbVector<T>, p: &ProbVector<T>) -> Result<T, LossError> {
    if p_hat.len() != p.len() {
        return Err(LossError::LengthMismatch { left: p_hat.len(), right: p.len() });
    }
    let half = T::from_f64(0.5);
    let m = ProbVector::new(
        p_hat
            .as_slice()
            .iter()
            .zip(p.as_slice())
            .map(|(&a, &b)| half * (a + b))
            .collect(),
    )?;
    Ok(half * (kl_div(p_hat, &m)? + kl_div(p, &m)?))
}

/// Sum of squared consecutive differences.
pub fn smoothness<T: Scalar>(y_hat: &[T]) -> Result<T, LossError> {
    for (k, v) in y_hat.iter().enumerate() {
        if !v.is_finite() {
            return Err(LossError::NonFinite(k));
        }
    }
    let mut acc = T::zero();
    for w in y_hat.windows(2) {
        let d = w[1] - w[0];
        acc += d * d;
    }
    Ok(acc)
}

fn check_day<T: Scalar>(y_hat: &[T], y: &[T]) -> Result<(), LossError> {
    if y_hat.len() != OUTPUT_HOURS {
        return Err(LossError::BadLength { expected: OUTPUT_HOURS, got: y_hat.len() });
    }
    if y.len() != OUTPUT_HOURS {
        return Err(LossError::BadLength { expected: OUTPUT_HOURS, got: y.len() });
    }
    for (k, v) in y_hat.iter().chain(y.iter()).enumerate() {
        if !v.is_finite() {
            return Err(LossError::NonFinite(k % OUTPUT_HOURS));
        }
    }
    Ok(())
}

fn base_mean<T: Scalar>(y_hat: &[T], y: &[T], base: BaseLoss) -> T {
    let n = T::from_f64(OUTPUT_HOURS as f64);
    let mut acc = T::zero();
    for (&a, &b) in y_hat.iter().zip(y) {
        let d = a - b;
        acc += match base {
            BaseLoss::Mae => d.abs(),
            BaseLoss::Mse => d * d,
        };
    }
    acc / n
}

/// Per-day composite value: mean base loss + alpha * JSD of the softmax
/// distributions + beta * smoothness of the prediction.
pub fn composite_loss<T: Scalar>(
    y_hat: &[T],
    y: &[T],
    cfg: &LossConfig,
) -> Result<T, LossError> {
    check_day(y_hat, y)?;
    let mut total = base_mean(y_hat, y, cfg.base);
    if cfg.alpha != 0.0 {
        let d = jsd(&softmax_day(y_hat)?, &softmax_day(y)?)?;
        total += T::from_f64(cfg.alpha) * d;
    }
    if cfg.beta != 0.0 {
        total += T::from_f64(cfg.beta) * smoothness(y_hat)?;
    }
    Ok(total)
}

fn base_grad<T: Scalar>(y_hat: &[T], y: &[T], base: BaseLoss, out: &mut [T]) {
    let inv_n = T::one() / T::from_f64(OUTPUT_HOURS as f64);
    for (k, (&a, &b)) in y_hat.iter().zip(y).enumerate() {
        let d = a - b;
        out[k] = match base {
            BaseLoss::Mae => {
                // Minimal-norm subgradient: 0 exactly at a tie.
                if d > T::zero() {
                    inv_n
                } else if d < T::zero() {
                    -inv_n
                } else {
                    T::zero()
                }
            }
            BaseLoss::Mse => T::from_f64(2.0) * d * inv_n,
        };
    }
}

/// Gradient of the JSD term with respect to the raw prediction, i.e. through
/// the softmax: with u_i = ln(p_hat_i / M_i)/2, returns
/// p_hat .* (u - (u . p_hat)).
fn jsd_grad_through_softmax<T: Scalar>(y_hat: &[T], y: &[T]) -> Result<Vec<T>, LossError> {
    let p_hat = softmax_day(y_hat)?;
    let p = softmax_day(y)?;
    let half = T::from_f64(0.5);
    let u: Vec<T> = p_hat
        .as_slice()
        .iter()
        .zip(p.as_slice())
        .map(|(&a, &b)| half * (a / (half * (a + b))).ln())
        .collect();
    let dot: T = u
        .iter()
        .zip(p_hat.as_slice())
        .fold(T::zero(), |acc, (&ui, &pi)| acc + ui * pi);
    Ok(u.iter()
        .zip(p_hat.as_slice())
        .map(|(&ui, &pi)| pi * (ui - dot))
        .collect())
}

fn smoothness_grad<T: Scalar>(y_hat: &[T], out: &mut [T]) {
    let two = T::from_f64(2.0);
    let n = y_hat.len();
    for t in 0..n {
        let mut g = T::zero();
        if t > 0 {
            g += two * (y_hat[t] - y_hat[t - 1]);
        }
        if t + 1 < n {
            g -= two * (y_hat[t + 1] - y_hat[t]);
        }
        out[t] = g;
    }
}

/// Exact gradient of [`composite_loss`] with respect to `y_hat`.
pub fn composite_loss_grad<T: Scalar>(
    y_hat: &[T],
    y: &[T],
    cfg: &LossConfig,
) -> Result<Vec<T>, LossError> {
    check_day(y_hat, y)?;
    let mut grad = vec![T::zero(); OUTPUT_HOURS];
    base_grad(y_hat, y, cfg.base, &mut grad);
    if cfg.alpha != 0.0 {
        let alpha = T::from_f64(cfg.alpha);
        for (g, dj) in grad.iter_mut().zip(jsd_grad_through_softmax(y_hat, y)?) {
            *g += alpha * dj;
        }
    }
    if cfg.beta != 0.0 {
        let beta = T::from_f64(cfg.beta);
        let mut sg = vec![T::zero(); OUTPUT_HOURS];
        smoothness_grad(y_hat, &mut sg);
        for (g, s) in grad.iter_mut().zip(sg) {
            *g += beta * s;
        }
    }
    Ok(grad)
}

fn check_batch<T: Scalar>(preds: &[Vec<T>], targets: &[Vec<T>]) -> Result<(), LossError> {
    if preds.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    if preds.len() != targets.len() {
        return Err(LossError::LengthMismatch { left: preds.len(), right: targets.len() });
    }
    Ok(())
}

/// Batch objective. Default: mean over days of the per-day composite value.
/// With `sum_aggregation`, only the base term is averaged; the alpha and
/// beta sums are added unnormalized.
pub fn batch_loss<T: Scalar>(
    preds: &[Vec<T>],
    targets: &[Vec<T>],
    cfg: &LossConfig,
) -> Result<T, LossError> {
    check_batch(preds, targets)?;
    let count = T::from_f64(preds.len() as f64);
    if cfg.sum_aggregation {
        let mut base_acc = T::zero();
        let mut rest = T::zero();
        for (p, t) in preds.iter().zip(targets) {
            check_day(p, t)?;
            base_acc += base_mean(p, t, cfg.base);
            if cfg.alpha != 0.0 {
                rest += T::from_f64(cfg.alpha) * jsd(&softmax_day(p)?, &softmax_day(t)?)?;
            }
            if cfg.beta != 0.0 {
                rest += T::from_f64(cfg.beta) * smoothness(p)?;
            }
        }
        Ok(base_acc / count + rest)
    } else {
        let mut acc = T::zero();
        for (p, t) in preds.iter().zip(targets) {
            acc += composite_loss(p, t, cfg)?;
        }
        Ok(acc / count)
    }
}

/// Per-day gradients of [`batch_loss`] with respect to each prediction.
pub fn batch_grads<T: Scalar>(
    preds: &[Vec<T>],
    targets: &[Vec<T>],
    cfg: &LossConfig,
) -> Result<Vec<Vec<T>>, LossError> {
    check_batch(preds, targets)?;
    let inv_count = T::one() / T::from_f64(preds.len() as f64);
    let mut out = Vec::with_capacity(preds.len());
    for (p, t) in preds.iter().zip(targets) {
        check_day(p, t)?;
        let grad = if cfg.sum_aggregation {
            // Base term is averaged over the batch; alpha/beta sums are not.
            let mut g = vec![T::zero(); OUTPUT_HOURS];
            base_grad(p, t, cfg.base, &mut g);
            for v in g.iter_mut() {
                *v *= inv_count;
            }
            if cfg.alpha != 0.0 {
                let alpha = T::from_f64(cfg.alpha);
                for (gv, dj) in g.iter_mut().zip(jsd_grad_through_softmax(p, t)?) {
                    *gv += alpha * dj;
                }
            }
            if cfg.beta != 0.0 {
                let beta = T::from_f64(cfg.beta);
                let mut sg = vec![T::zero(); OUTPUT_HOURS];
                smoothness_grad(p, &mut sg);
                for (gv, s) in g.iter_mut().zip(sg) {
                    *gv += beta * s;
                }
            }
            g
        } else {
            let mut g = composite_loss_grad(p, t, cfg)?;
            for v in g.iter_mut() {
                *v *= inv_count;
            }
            g
        };
        out.push(grad);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_diff_grad, max_rel_error};
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn prob(v: &[f64]) -> ProbVector<f64> {
        ProbVector::new(v.to_vec()).unwrap()
    }

    fn day(rng: &mut SeededRng) -> Vec<f64> {
        (0..OUTPUT_HOURS).map(|_| rng.uniform(-3.0, 3.0)).collect()
    }

    #[test]
    fn softmax_of_constant_is_uniform() {
        let p = softmax_day(&[1.7f64; OUTPUT_HOURS]).unwrap();
        assert!(p.as_slice().iter().all(|&v| v == 1.0 / 24.0));
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let mut rng = SeededRng::new(3);
        let y = day(&mut rng);
        let shifted: Vec<f64> = y.iter().map(|v| v + 17.25).collect();
        let a = softmax_day(&y).unwrap();
        let b = softmax_day(&shifted).unwrap();
        for (x, z) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - z).abs() < 1e-14);
        }
    }

    #[test]
    fn softmax_single_spike() {
        // Direct evaluation: p_0 = e/(e+23), the rest 1/(e+23).
        let mut y = [0.0f64; OUTPUT_HOURS];
        y[0] = 1.0;
        let p = softmax_day(&y).unwrap();
        let e = 1.0f64.exp();
        assert!((p.as_slice()[0] - e / (e + 23.0)).abs() < 1e-12);
        assert!((p.as_slice()[0] - 0.105694534595662).abs() < 1e-12);
        for &v in &p.as_slice()[1..] {
            assert!((v - 1.0 / (e + 23.0)).abs() < 1e-12);
            assert!((v - 0.038882846321928).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rejects_non_finite() {
        let mut y = [0.0f64; OUTPUT_HOURS];
        y[5] = f64::NAN;
        assert!(matches!(softmax_day(&y), Err(LossError::NonFinite(5))));
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbVector::new(vec![0.0, 1.0]).is_err());
        assert!(ProbVector::new(vec![-0.1, 1.1]).is_err());
        assert!(ProbVector::new(vec![0.4, 0.4]).is_err());
        assert!(ProbVector::new(Vec::<f64>::new()).is_err());
    }

    #[test]
    fn kl_of_self_is_zero() {
        let p = prob(&[0.3, 0.2, 0.5]);
        assert_eq!(kl_div(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_two_point_example() {
        // 0.8 ln 1.6 + 0.2 ln 0.4, evaluated directly.
        let p = prob(&[0.8, 0.2]);
        let q = prob(&[0.5, 0.5]);
        let expect = 0.8 * 1.6f64.ln() + 0.2 * 0.4f64.ln();
        let got = kl_div(&p, &q).unwrap();
        assert!((got - expect).abs() < 1e-15);
        assert!((got - 0.192744757021758).abs() < 1e-12);
    }

    #[test]
    fn kl_positive_both_ways_off_uniform() {
        let u = prob(&[0.25; 4]);
        let q = prob(&[0.4, 0.3, 0.2, 0.1]);
        assert!(kl_div(&u, &q).unwrap() > 0.0);
        assert!(kl_div(&q, &u).unwrap() > 0.0);
    }

    #[test]
    fn jsd_of_self_is_zero_and_symmetric() {
        let p = prob(&[0.7, 0.1, 0.2]);
        let q = prob(&[0.2, 0.5, 0.3]);
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
        assert_eq!(jsd(&p, &q).unwrap(), jsd(&q, &p).unwrap());
    }

    #[test]
    fn jsd_approaches_ln2_for_disjoint_mass() {
        let eps = 1e-9;
        let p = prob(&[1.0 - eps, eps]);
        let q = prob(&[eps, 1.0 - eps]);
        let d = jsd(&p, &q).unwrap();
        let ln2 = 2.0f64.ln();
        assert!(d > ln2 - 1e-6);
        assert!(d <= ln2 + 1e-15);
    }

    #[test]
    fn smoothness_examples() {
        assert_eq!(smoothness(&[4.2f64; OUTPUT_HOURS]).unwrap(), 0.0);
        let mut y = [2.0f64; OUTPUT_HOURS];
        y[0] = 1.0;
        y[1] = 3.0;
        y[2] = 2.0;
        // (3-1)^2 + (2-3)^2 + 0 + ... = 5
        assert_eq!(smoothness(&y).unwrap(), 5.0);
        let rev: Vec<f64> = y.iter().rev().copied().collect();
        assert_eq!(smoothness(&rev).unwrap(), 5.0);
    }

    #[test]
    fn smoothness_shift_and_reverse_invariance_random() {
        let mut rng = SeededRng::new(5);
        for _ in 0..20 {
            let y = day(&mut rng);
            let s = smoothness(&y).unwrap();
            let shifted: Vec<f64> = y.iter().map(|v| v + 3.75).collect();
            let rev: Vec<f64> = y.iter().rev().copied().collect();
            assert!((smoothness(&shifted).unwrap() - s).abs() < 1e-12);
            assert!((smoothness(&rev).unwrap() - s).abs() < 1e-12);
        }
    }

    #[test]
    fn composite_reduces_to_mae() {
        let mut rng = SeededRng::new(7);
        let a = day(&mut rng);
        let b = day(&mut rng);
        let cfg = LossConfig { base: BaseLoss::Mae, alpha: 0.0, beta: 0.0, ..Default::default() };
        let want: f64 =
            a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 24.0;
        assert!((composite_loss(&a, &b, &cfg).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn perfect_prediction_leaves_only_smoothness() {
        let mut rng = SeededRng::new(11);
        let y = day(&mut rng);
        let cfg = LossConfig { base: BaseLoss::Mae, alpha: 1.5, beta: 0.25, ..Default::default() };
        let got = composite_loss(&y, &y, &cfg).unwrap();
        let want = 0.25 * smoothness(&y).unwrap();
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn loss_is_monotone_in_alpha_and_beta() {
        let mut rng = SeededRng::new(13);
        let a = day(&mut rng);
        let b = day(&mut rng);
        let at = |alpha: f64, beta: f64| {
            composite_loss(&a, &b, &LossConfig { base: BaseLoss::Mae, alpha, beta, ..Default::default() })
                .unwrap()
        };
        assert!(at(2.0, 0.01) > at(0.5, 0.01));
        assert!(at(1.0, 0.1) > at(1.0, 0.001));
    }

    #[test]
    fn gradient_zero_at_perfect_prediction_without_beta() {
        let mut rng = SeededRng::new(17);
        let y = day(&mut rng);
        for base in [BaseLoss::Mae, BaseLoss::Mse] {
            let cfg = LossConfig { base, alpha: 1.0, beta: 0.0, ..Default::default() };
            let g = composite_loss_grad(&y, &y, &cfg).unwrap();
            assert!(g.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn mse_gradient_closed_form() {
        let mut rng = SeededRng::new(19);
        let a = day(&mut rng);
        let b = day(&mut rng);
        let cfg = LossConfig { base: BaseLoss::Mse, alpha: 0.0, beta: 0.0, ..Default::default() };
        let g = composite_loss_grad(&a, &b, &cfg).unwrap();
        for (k, gv) in g.iter().enumerate() {
            assert!((gv - 2.0 * (a[k] - b[k]) / 24.0).abs() < 1e-15);
        }
    }

    #[test]
    fn batch_of_one_matches_per_day() {
        let mut rng = SeededRng::new(23);
        let a = day(&mut rng);
        let b = day(&mut rng);
        let cfg = LossConfig::default();
        let single = composite_loss(&a, &b, &cfg).unwrap();
        let batched = batch_loss(&[a], &[b], &cfg).unwrap();
        assert!((single - batched).abs() < 1e-15);
    }

    #[test]
    fn sum_aggregation_matches_hand_assembly() {
        let mut rng = SeededRng::new(29);
        let preds: Vec<Vec<f64>> = (0..3).map(|_| day(&mut rng)).collect();
        let targets: Vec<Vec<f64>> = (0..3).map(|_| day(&mut rng)).collect();
        let cfg = LossConfig { base: BaseLoss::Mae, alpha: 0.7, beta: 0.02, sum_aggregation: true };
        let got = batch_loss(&preds, &targets, &cfg).unwrap();

        let mut base = 0.0;
        let mut rest = 0.0;
        for (p, t) in preds.iter().zip(&targets) {
            base += p.iter().zip(t).map(|(x, y)| (x - y).abs()).sum::<f64>() / 24.0;
            rest += 0.7 * jsd(&softmax_day(p).unwrap(), &softmax_day(t).unwrap()).unwrap();
            rest += 0.02 * smoothness(p).unwrap();
        }
        assert!((got - (base / 3.0 + rest)).abs() < 1e-12);
    }

    #[test]
    fn batch_grads_match_finite_differences_both_aggregations() {
        let mut rng = SeededRng::new(31);
        for sum_aggregation in [false, true] {
            let preds: Vec<Vec<f64>> = (0..3).map(|_| day(&mut rng)).collect();
            let targets: Vec<Vec<f64>> = (0..3)
                .map(|i| {
                    preds[i]
                        .iter()
                        .map(|v| v + rng.uniform(0.01, 1.0) * if rng.next_f64() < 0.5 { 1.0 } else { -1.0 })
                        .collect()
                })
                .collect();
            let cfg = LossConfig { base: BaseLoss::Mse, alpha: 1.3, beta: 0.05, sum_aggregation };
            let analytic = batch_grads(&preds, &targets, &cfg).unwrap();

            let flat: Vec<f64> = preds.iter().flatten().copied().collect();
            let numeric = finite_diff_grad(
                |p| {
                    let rebuilt: Vec<Vec<f64>> =
                        p.chunks(OUTPUT_HOURS).map(|c| c.to_vec()).collect();
                    batch_loss(&rebuilt, &targets, &cfg).unwrap()
                },
                &flat,
                1e-5,
            )
            .unwrap();
            let analytic_flat: Vec<f64> = analytic.into_iter().flatten().collect();
            let err = max_rel_error(&analytic_flat, &numeric, 1e-3);
            assert!(err < 1e-6, "sum_aggregation={sum_aggregation}: rel err {err}");
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        let cfg = LossConfig::default();
        assert!(matches!(
            batch_loss::<f64>(&[], &[], &cfg),
            Err(LossError::EmptyBatch)
        ));
    }

    fn day_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-3.0f64..3.0, OUTPUT_HOURS)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn jsd_bounded_and_symmetric(a in day_strategy(), b in day_strategy()) {
            let p = softmax_day(&a).unwrap();
            let q = softmax_day(&b).unwrap();
            let d = jsd(&p, &q).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!(d <= 2.0f64.ln() + 1e-15);
            prop_assert_eq!(d, jsd(&q, &p).unwrap());
        }

        #[test]
        fn jsd_shift_invariant_through_softmax(a in day_strategy(), b in day_strategy(), c in -40.0f64..40.0) {
            let base = jsd(&softmax_day(&a).unwrap(), &softmax_day(&b).unwrap()).unwrap();
            let sa: Vec<f64> = a.iter().map(|v| v + c).collect();
            let sb: Vec<f64> = b.iter().map(|v| v + c).collect();
            let shifted = jsd(&softmax_day(&sa).unwrap(), &softmax_day(&sb).unwrap()).unwrap();
            prop_assert!((base - shifted).abs() < 1e-12);
        }

        // 128 cases x both bases comfortably covers the 100-instance bar.
        #[test]
        fn gradient_matches_oracle_off_the_kinks(
            target in day_strategy(),
            offsets in proptest::collection::vec(0.01f64..2.0, OUTPUT_HOURS),
            signs in proptest::collection::vec(proptest::bool::ANY, OUTPUT_HOURS),
            alpha in 0.0f64..2.0,
            beta in 0.0f64..0.1,
            use_mse in proptest::bool::ANY,
        ) {
            // Build predictions at least 0.01 away from the target per hour
            // so no finite-difference probe crosses an MAE kink.
            let pred: Vec<f64> = target
                .iter()
                .zip(offsets.iter().zip(&signs))
                .map(|(t, (o, s))| t + if *s { *o } else { -*o })
                .collect();
            let base = if use_mse { BaseLoss::Mse } else { BaseLoss::Mae };
            let cfg = LossConfig { base, alpha, beta, ..Default::default() };
            let analytic = composite_loss_grad(&pred, &target, &cfg).unwrap();
            let numeric = finite_diff_grad(
                |p| composite_loss(p, &target, &cfg).unwrap(),
                &pred,
                1e-5,
            ).unwrap();
            let err = max_rel_error(&analytic, &numeric, 1e-3);
            prop_assert!(err < 1e-6, "rel err {}", err);
        }
    }
}
