//! Day-ahead electricity price forecasting toolkit.
//!
//! The crate builds up from a small dense-tensor kernel and a deterministic
//! RNG to a stacked LSTM forecaster trained with a composite loss, plus the
//! data pipeline, offline trainer, and validation-gated online update loop
//! that sit on top. All gradients are hand-derived and checked against the
//! finite-difference oracle in [`gradcheck`].
//!
//! Numeric code is generic over [`scalar::Scalar`] (f32 or f64); the type
//! aliases at the crate root pin the f64 instantiations the rest of the
//! pipeline uses.

pub mod checkpoint;
pub mod data;
pub mod eval;
pub mod experiment;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod online;
pub mod optimizer;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod trainer;

pub use rng::SeededRng;
pub use scalar::Scalar;

/// Dense row-major matrix at working precision.
pub type Tensor = tensor::Tensor2<f64>;
