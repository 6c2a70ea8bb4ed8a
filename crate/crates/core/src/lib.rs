//! Incomplete multi-view classification by joint missing-view imputation and
//! dual (common + view-specific) representation learning, followed by an
//! entropy-weighted cooperative TSK fuzzy classifier.

pub mod baselines;
pub mod classifier;
pub mod commands;
pub mod dataset;
pub mod error;
pub mod explain;
pub mod fuzzy;
pub mod graphs;
pub mod linalg;
pub mod metrics;
pub mod representation;

pub use error::{Error, Result};
