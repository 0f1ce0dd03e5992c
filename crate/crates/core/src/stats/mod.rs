//! Evaluation metrics and significance testing.

mod f1;
mod mwu;

pub use f1::{weighted_f1, ConfusionMatrix};
pub use mwu::{mann_whitney_u, mann_whitney_u_approx, mean_std, significance_stars, UTestMethod, UTestResult, EXACT_MAX_PRODUCT};
