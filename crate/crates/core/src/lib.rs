//! Physics-informed neural networks for three ocean-modelling PDEs.
//!
//! The crate is layered bottom-up:
//!
//! - [`autodiff`]: scalar expression tape with reverse sweeps, plus degree-2
//!   input jets whose components are tape nodes.
//! - [`network`]: multilayer perceptrons, Glorot initialization, nine
//!   activation functions.
//! - [`optim`]: Adam with bias correction, used by the training loop.
//! - [`pde`]: residual operators for Burgers, the variable-depth wave
//!   equation and advection-diffusion.
//! - [`solvers`]: reference data (Fourier spectral Burgers, finite-difference
//!   wave, closed-form advection-diffusion).
//! - [`dataset`]: training, collocation and validation point sets.
//! - [`training`]: the λ-weighted loss, the training loop and its metrics.
//! - [`experiments`]: sweep harness, CSV tables and SVG reports.

// `!(x > 0.0)` is used on purpose to reject NaN alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod dataset;
pub mod experiments;
pub mod network;
pub mod optim;
pub mod pde;
pub mod rng;
pub mod solvers;
pub mod training;
