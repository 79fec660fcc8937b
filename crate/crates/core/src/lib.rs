mod binio;
pub mod dbn;
pub mod error;
pub mod extractor;
pub mod image_io;
pub mod pipeline;
pub mod sampler;
pub mod tensor;

pub use error::{Error, Result};
