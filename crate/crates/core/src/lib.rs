pub mod cli;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod juncture;
pub mod latentopt;
pub mod model;
pub mod molgraph;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
