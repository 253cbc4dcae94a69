//! Significance tests and uncertainty bands for comparing calibration methods.

mod dist;
mod normality;
mod quantile;
mod ttest;
mod uncertainty;
mod wilcoxon;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dist::{normal_cdf, student_t_cdf, student_t_quantile, student_t_two_sided_p};
pub use normality::jarque_bera;
pub use quantile::quantiles;
pub use ttest::{t_test_paired, t_test_welch};
pub use uncertainty::{confidence_interval, sigma_band, Band, CiCombination, UncertaintyModel};
pub use wilcoxon::{
    signed_ranks, signed_rank_sum_counts, wilcoxon_signed_rank, wilcoxon_signed_rank_with,
    WilcoxonMethod, EXACT_MAX_PAIRS,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("{got} points, at least {need} are needed")]
    TooFewPoints { got: usize, need: usize },
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("paired differences have zero variance")]
    ZeroVarianceDifferences,
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("non-finite input")]
    NonFinite,
    #[error("empty input")]
    Empty,
    #[error("probability {0} outside (0, 1)")]
    BadProbability(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    WilcoxonExact,
    WilcoxonNormal,
    TPaired,
    TWelch,
    JarqueBera,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Observations the test actually used (e.g. nonzero differences).
    pub n_effective: usize,
    /// Degrees of freedom, where the reference distribution has them.
    pub dof: Option<f64>,
    pub method: TestMethod,
}

impl TestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n - 1) sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Binomial coefficient, saturating at `u64::MAX`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    acc as u64
}
