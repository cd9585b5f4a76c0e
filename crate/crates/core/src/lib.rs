pub mod abundant;
pub mod catalog;
pub mod classify;
pub mod conformal;
pub mod error;
pub mod exprlang;
pub mod forms;
pub mod geometry;
pub mod hypersurface;
pub mod jets;
pub mod reconstruct;
pub mod report;
pub mod runspec;
pub mod tensor;

pub use abundant::AbundantData;
pub use error::{Error, Result};
pub use jets::Jet;
pub use report::ResidualReport;
pub use tensor::{Metric, Scalar, Slot, Tensor};
