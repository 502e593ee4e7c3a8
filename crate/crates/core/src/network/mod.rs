//! Fully connected networks evaluated plainly or as input jets on a tape.

mod activation;
mod batch;
mod io;
mod mlp;

pub use activation::Activation;
pub use batch::JetBatch;
pub use io::{load_params, read_params, save_params, write_params, PARAMS_MAGIC};
pub use mlp::{xavier_init, LayerLayout, Mlp, MlpConfig, MlpParams};

use thiserror::Error;

use crate::autodiff::AutodiffError;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("parameter {0} is not finite")]
    NonFiniteParam(usize),
    #[error("expected {expected} input coordinates, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("input point has a non-finite coordinate")]
    NonFiniteInput,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("parameter file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
