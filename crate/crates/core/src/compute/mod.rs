//! Dense tensors, tape-based reverse-mode differentiation, stable scalar
//! helpers and the Adam optimizer.

mod adam;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::{adam_step, clip_global_norm, AdamState};
pub use gradcheck::{check_gradients, GradCheckReport};
pub use tape::{sigmoid, Gradients, Tape, Var, PROB_CLAMP};
pub use tensor::Tensor;

use thiserror::Error;

/// Floor applied inside guarded logarithms and divisions.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComputeError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("gradient error: {0}")]
    Grad(String),
    #[error("non-finite gradient")]
    NonFiniteGradient,
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(sum(exp(xs)))`, shifted by the maximum; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().fold(0.0, |acc, &x| acc + (x - m).exp()).ln()
}
