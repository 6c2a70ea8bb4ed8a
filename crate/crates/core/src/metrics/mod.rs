//! Classification metrics and the rank-based comparison of algorithms.

mod classification;
mod special;
mod stats;

pub use classification::{accuracy, auc, auc_binary, f1, F1Average, MetricReport, MetricSummary};
pub use special::{chi_square_sf, erfc, ln_gamma, normal_sf, regularized_gamma_q};
pub use stats::{friedman_test, holm_posthoc, rank_descending, FriedmanResult, HolmComparison, HolmResult};
