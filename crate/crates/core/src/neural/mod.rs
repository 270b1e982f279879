//! Dense feedforward networks trained by hand-written backpropagation.
//!
//! Everything is generic over [`Scalar`] so the same code runs in `f32` for
//! training and in `f64` for finite-difference gradient checks.

mod adam;
mod dense;
mod dropout;
pub mod gradcheck;
mod loss;
mod matrix;
mod scalar;
mod stack;

pub use adam::{Adam, AdamConfig};
pub use dense::{dense_forward, DenseLayer, LayerGrads};
pub use dropout::{dropout_apply, DropoutMode, DropoutSpec};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport, GradTarget, MlpTarget};
pub use loss::{argmax, softmax, softmax_cross_entropy};
pub use matrix::Matrix;
pub use scalar::Scalar;
pub use stack::{Activation, Mlp, StackGrads};
