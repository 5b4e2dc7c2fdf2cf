//! Attribute-regularized variational autoencoders: data handling, model,
//! losses, training, attention maps, generation and evaluation metrics.

pub mod attention;
pub mod dataio;
pub mod error;
pub mod generate;
pub mod losses;
pub mod measure;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod render;
pub mod train;

pub use error::{Error, Result};
