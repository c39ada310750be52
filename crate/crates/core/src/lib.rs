//! Joint relational triple extraction with potential relation prediction,
//! relation-specific sequence tagging and global subject-object
//! correspondence.
//!
//! The pipeline is encoder-agnostic: anything implementing
//! [`encoder::TokenEncoder`] can feed the decoder. A small trainable
//! convolutional encoder ([`encoder::DeskEncoder`]) is included for
//! experiments without pretrained weights.

pub mod bio;
pub mod cli;
pub mod data;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod inference;
pub mod labeling;
pub mod model;
pub mod params;
pub mod tensor;
pub mod training;
pub mod types;

pub use error::{Error, Result};
