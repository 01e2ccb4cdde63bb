pub mod cli;
pub mod error;
pub mod experiments;
pub mod frobenius;
pub mod matrixlab;
pub mod spectrum;
pub mod stieltjes;

pub use error::{Error, ErrorKind, Result};
pub use spectrum::SpectrumSpec;
