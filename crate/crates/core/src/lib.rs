pub mod corpus;
pub mod error;
pub mod segmenter;

pub use error::{Error, Result};
pub mod annotate;
pub mod augmentor;
pub mod cli;
pub mod config;
pub mod masking;
pub mod pipeline;
pub mod rouge;
pub mod sectionizer;
