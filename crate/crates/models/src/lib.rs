//! Seizure/non-seizure classifiers trained from scratch, their on-disk
//! container, and the detection metrics used to score them.

pub mod cnn;
pub mod error;
pub mod file;
pub mod forest;
pub mod knn;
pub mod labels;
pub mod metrics;
pub mod svm;

pub use error::{ModelError, Result};
pub use labels::Label;
pub use metrics::{Confusion, Metrics};
