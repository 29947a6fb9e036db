//! Collaborative-filtering recommenders with group bias auditing.
//!
//! The crate loads rating, trust, group and category data, trains eleven
//! recommendation algorithms under k-fold cross validation, and measures the
//! top-N output for ranking quality (nDCG), item coverage, per-category bias
//! disparity between training data and recommendations, and average
//! disparity between a protected and an unprotected user group.

pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod params;
pub mod report;
pub mod synthetic;

pub use error::{Error, Result};
