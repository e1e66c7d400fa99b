//! Minimal dense 2-D tensor arithmetic.
//!
//! Deliberately small: row-major storage, no broadcasting, shape mismatches are
//! hard errors. Gradient code elsewhere in the crate relies on these operations
//! being exactly what they say they are.

use thiserror::Error;

use crate::scalar::Scalar;

/// Errors from tensor construction and arithmetic.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch, left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    ShapeMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("tensor data length {len} does not match {rows}x{cols}")]
    BadDataLength { rows: usize, cols: usize, len: usize },
    #[error("log of non-positive element {value} at ({row}, {col})")]
    LogDomain { row: usize, col: usize, value: f64 },
    #[error("non-finite element at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Elementwise binary operation selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

/// Elementwise map selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFn {
    Sigmoid,
    Tanh,
    Exp,
    Log,
}

/// Dense row-major matrix of scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Numerically stable logistic function.
///
/// Split on the sign of `x` so the exponential argument is always non-positive;
/// no overflow for any finite input.
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Tensor2<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, TensorError> {
        if data.len() != rows * cols {
            return Err(TensorError::BadDataLength { rows, cols, len: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, TensorError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(TensorError::BadDataLength { rows: r, cols: c, len: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Column extracted as an owned vector.
    pub fn col_vec(&self, col: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// Standard matrix product.
    pub fn matmul(&self, other: &Self) -> Result<Self, TensorError> {
        if self.cols != other.rows {
            return Err(self.shape_err("matmul", other));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product; `x.len()` must equal `self.cols`.
    ///
    /// Accumulates left-to-right over columns, the same order `matmul` uses.
    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>, TensorError> {
        if x.len() != self.cols {
            return Err(TensorError::ShapeMismatch {
                op: "matvec",
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: x.len(),
                right_cols: 1,
            });
        }
        let mut out = vec![T::zero(); self.rows];
        for (r, o) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut acc = T::zero();
            for (a, b) in row.iter().zip(x) {
                acc += *a * *b;
            }
            *o = acc;
        }
        Ok(out)
    }

    /// Transposed matrix-vector product `Aᵀ d`; `d.len()` must equal `self.rows`.
    pub fn tr_matvec(&self, d: &[T]) -> Result<Vec<T>, TensorError> {
        if d.len() != self.rows {
            return Err(TensorError::ShapeMismatch {
                op: "tr_matvec",
                left_rows: self.cols,
                left_cols: self.rows,
                right_rows: d.len(),
                right_cols: 1,
            });
        }
        let mut out = vec![T::zero(); self.cols];
        for (r, &dr) in d.iter().enumerate() {
            if dr == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o += a * dr;
            }
        }
        Ok(out)
    }

    /// Rank-one update `self += col ⊗ row`, used by gradient accumulation.
    pub fn add_outer(&mut self, col: &[T], row: &[T]) -> Result<(), TensorError> {
        if col.len() != self.rows || row.len() != self.cols {
            return Err(TensorError::ShapeMismatch {
                op: "add_outer",
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: col.len(),
                right_cols: row.len(),
            });
        }
        for (r, &c) in col.iter().enumerate() {
            if c == T::zero() {
                continue;
            }
            let base = r * self.cols;
            for (j, &x) in row.iter().enumerate() {
                self.data[base + j] += c * x;
            }
        }
        Ok(())
    }

    /// Elementwise combination of two equally shaped tensors.
    pub fn elementwise(&self, other: &Self, op: BinOp) -> Result<Self, TensorError> {
        if self.shape() != other.shape() {
            return Err(self.shape_err("elementwise", other));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
            })
            .collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn add(&self, other: &Self) -> Result<Self, TensorError> {
        self.elementwise(other, BinOp::Add)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, TensorError> {
        self.elementwise(other, BinOp::Sub)
    }

    pub fn mul(&self, other: &Self) -> Result<Self, TensorError> {
        self.elementwise(other, BinOp::Mul)
    }

    /// Elementwise application of one of the supported nonlinearities.
    pub fn map(&self, f: MapFn) -> Result<Self, TensorError> {
        let mut data = Vec::with_capacity(self.data.len());
        for (idx, &x) in self.data.iter().enumerate() {
            let y = match f {
                MapFn::Sigmoid => sigmoid(x),
                MapFn::Tanh => x.tanh(),
                MapFn::Exp => x.exp(),
                MapFn::Log => {
                    if x <= T::zero() {
                        return Err(TensorError::LogDomain {
                            row: idx / self.cols,
                            col: idx % self.cols,
                            value: x.to_f64(),
                        });
                    }
                    x.ln()
                }
            };
            data.push(y);
        }
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    /// Index of the first non-finite element, if any.
    pub fn check_finite(&self) -> Result<(), TensorError> {
        for (idx, x) in self.data.iter().enumerate() {
            if !x.is_finite() {
                return Err(TensorError::NonFinite { row: idx / self.cols, col: idx % self.cols });
            }
        }
        Ok(())
    }

    fn shape_err(&self, op: &'static str, other: &Self) -> TensorError {
        TensorError::ShapeMismatch {
            op,
            left_rows: self.rows,
            left_cols: self.cols,
            right_rows: other.rows,
            right_cols: other.cols,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor2<f64> {
        Tensor2::new(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let id = t(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let v = t(2, 1, &[3.0, 4.0]);
        assert_eq!(id.matmul(&v).unwrap().data(), &[3.0, 4.0]);
    }

    #[test]
    fn matmul_hand_example() {
        // Hand multiplication: [1*5+2*6, 3*5+4*6] = [17, 39].
        let a = t(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = t(2, 1, &[5.0, 6.0]);
        assert_eq!(a.matmul(&b).unwrap().data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_shape_mismatch_reports_both_shapes() {
        let a = Tensor2::<f64>::zeros(2, 3);
        let b = Tensor2::<f64>::zeros(2, 2);
        match a.matmul(&b) {
            Err(TensorError::ShapeMismatch { left_rows, left_cols, right_rows, right_cols, .. }) => {
                assert_eq!((left_rows, left_cols, right_rows, right_cols), (2, 3, 2, 2));
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn matmul_associative_on_random_chains() {
        let mut rng = SeededRng::new(7);
        for _ in 0..20 {
            let a: Tensor2<f64> = rng.uniform_tensor(3, 4, -1.0, 1.0);
            let b: Tensor2<f64> = rng.uniform_tensor(4, 2, -1.0, 1.0);
            let c: Tensor2<f64> = rng.uniform_tensor(2, 5, -1.0, 1.0);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            for (l, r) in left.data().iter().zip(right.data()) {
                let denom = l.abs().max(r.abs()).max(1.0);
                assert!((l - r).abs() / denom < 1e-9, "associativity violated: {l} vs {r}");
            }
        }
    }

    #[test]
    fn elementwise_basics() {
        let x = t(1, 1, &[1.0]);
        let y = t(1, 1, &[2.0]);
        assert_eq!(x.add(&y).unwrap().data(), &[3.0]);

        let a = t(2, 2, &[1.0, -2.0, 3.0, 4.5]);
        let zeros = Tensor2::zeros(2, 2);
        assert_eq!(a.mul(&zeros).unwrap(), zeros);
        assert_eq!(a.sub(&a).unwrap(), zeros);
    }

    #[test]
    fn elementwise_shape_mismatch() {
        let a = Tensor2::<f64>::zeros(2, 2);
        let b = Tensor2::<f64>::zeros(2, 3);
        assert!(matches!(a.add(&b), Err(TensorError::ShapeMismatch { .. })));
    }

    #[test]
    fn map_fixed_points() {
        let z = t(1, 3, &[0.0, 0.0, 0.0]);
        assert_eq!(z.map(MapFn::Sigmoid).unwrap().data(), &[0.5, 0.5, 0.5]);
        assert_eq!(z.map(MapFn::Tanh).unwrap().data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn sigmoid_saturates_without_overflow() {
        let big = t(1, 2, &[1000.0, -1000.0]);
        let s = big.map(MapFn::Sigmoid).unwrap();
        assert!((s.data()[0] - 1.0).abs() < 1e-12);
        assert!(s.data()[1].abs() < 1e-12);
        assert!(s.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sigmoid_tanh_ranges_on_random_input() {
        // Strict openness only holds below the f64 saturation threshold
        // (tanh rounds to exactly 1.0 near |x| = 19), hence the range cap.
        let mut rng = SeededRng::new(11);
        let x: Tensor2<f64> = rng.uniform_tensor(8, 8, -15.0, 15.0);
        let s = x.map(MapFn::Sigmoid).unwrap();
        let th = x.map(MapFn::Tanh).unwrap();
        assert!(s.data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(th.data().iter().all(|&v| v > -1.0 && v < 1.0));
    }

    #[test]
    fn log_domain_error_carries_index() {
        let x = t(2, 2, &[1.0, 2.0, -3.0, 4.0]);
        match x.map(MapFn::Log) {
            Err(TensorError::LogDomain { row, col, value }) => {
                assert_eq!((row, col), (1, 0));
                assert_eq!(value, -3.0);
            }
            other => panic!("expected log domain error, got {other:?}"),
        }
    }

    #[test]
    fn matvec_matches_matmul() {
        let mut rng = SeededRng::new(3);
        let a = rng.uniform_tensor(5, 4, -2.0, 2.0);
        let x = rng.uniform_vec(4, -2.0, 2.0);
        let via_matmul = a.matmul(&t(4, 1, &x)).unwrap();
        assert_eq!(a.matvec(&x).unwrap(), via_matmul.data());
    }

    #[test]
    fn tr_matvec_matches_explicit_transpose() {
        let a = t(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let d = [10.0, 100.0];
        // Aᵀ d = [1*10+4*100, 2*10+5*100, 3*10+6*100]
        assert_eq!(a.tr_matvec(&d).unwrap(), vec![410.0, 520.0, 630.0]);
    }

    #[test]
    fn add_outer_accumulates() {
        let mut g = Tensor2::<f64>::zeros(2, 3);
        g.add_outer(&[1.0, 2.0], &[3.0, 4.0, 5.0]).unwrap();
        g.add_outer(&[1.0, 0.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(g.data(), &[4.0, 5.0, 6.0, 6.0, 8.0, 10.0]);
    }
}
