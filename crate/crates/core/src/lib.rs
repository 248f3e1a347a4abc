//! Automated test-repair pipeline: repair-context extraction and
//! prioritisation, model input/output encoding, candidate validation,
//! evaluation metrics, repair categorisation, trust prediction and dataset
//! mining.

pub mod diff;
pub mod edit_seq;
pub mod engine;
pub mod error;
pub mod hunks;
pub mod java;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod prioritize;
pub mod prompt;
pub mod similarity;
pub mod taxonomy;
pub mod special;
pub mod tokenize;
pub mod trust;

pub use error::{Error, Result};
pub use model::*;
