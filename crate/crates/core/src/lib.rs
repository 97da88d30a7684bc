pub mod error;
pub mod codecs;
pub mod corruptions;
pub mod harness;
pub mod heatmap;
pub mod image;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
