use thiserror::Error;

use crate::exprlang::{EvalError, ParseError};
use crate::jets::JetError;
use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("point {0:?} lies outside the domain box")]
    OutOfDomain(Vec<f64>),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
