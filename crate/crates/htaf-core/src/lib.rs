//! Heavy-tailed activations for networks that binarize cleanly.
//!
//! This crate trains multilayer perceptrons whose hidden units behave, at
//! inference time, like hard Heaviside gates. The training-time activation
//! is the heavy-tailed function `sigmoid(alpha1 * tanh(alpha0 * x))`, whose
//! gradient decays slowly enough in the tails to keep learning alive while
//! the forward values saturate towards {0, 1}. The crate provides:
//!
//! - the activation family and its exact, numerically stable gradients
//!   ([`activations`]);
//! - closed-form parameter selection: how large the gains must be for the
//!   activation to approximate the step to a given tolerance, plus tail and
//!   ratio diagnostics ([`bounds`]);
//! - a matrix-valued reverse-mode autodiff tape ([`tape`]) on top of a small
//!   dense-matrix layer ([`matrix`]);
//! - feed-forward networks with train-time/inference-time activation
//!   swapping and post-hoc binarization baselines ([`network`]);
//! - minibatch training with SGD/Adam, gradient-flow tracing, and
//!   vanishing-gradient detection ([`training`]);
//! - interpretability metrics for binary concept layers: binarity, concept
//!   accuracy, class specificity, importance scores, and ready-to-send
//!   concept-naming prompts ([`icbm`]).

#[cfg(feature = "openblas")]
extern crate blas_src;

pub mod activations;
pub mod bounds;
pub mod error;
pub mod matrix;
pub mod icbm;
pub mod network;
pub mod tape;
pub mod training;

pub use error::{CoreError, Result};
