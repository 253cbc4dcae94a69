//! Two-component uncertainty on a performance index.
//!
//! Each observation is modelled as `δ_i = θ + ε_i`, where the error mixes the
//! choice of training period and the choice of device composition. Each
//! component contributes a t-scaled standard error of the mean.

use serde::{Deserialize, Serialize};

use super::dist::student_t_quantile;
use super::{mean, sample_variance, StatsError};

/// Number of training-period choices in the short-term protocol.
pub const PERIOD_DOF: f64 = 3.0;
/// Cap on the composition sample count.
pub const MAX_COMPOSITION_DOF: f64 = 100.0;

/// How the two components are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiCombination {
    /// `sqrt(t_p² var_p / n_p + t_c² var_c / n_c)`.
    #[default]
    SumOfSquares,
    /// One t quantile on `n_p + n_c` dof times `sqrt(var_p / n_p + var_c / n_c)`.
    PooledDof,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyModel {
    pub theta_hat: f64,
    pub var_period: f64,
    pub dof_period: f64,
    pub var_composition: f64,
    pub dof_composition: f64,
    pub alpha: f64,
    #[serde(default)]
    pub combination: CiCombination,
}

impl UncertaintyModel {
    /// Standard setup: 3 periods and `min(100, compositions)` for the
    /// composition term, at the 95 % level.
    pub fn new(theta_hat: f64, var_period: f64, var_composition: f64, compositions: u64) -> Self {
        Self {
            theta_hat,
            var_period,
            dof_period: PERIOD_DOF,
            var_composition,
            dof_composition: (compositions.max(1) as f64).min(MAX_COMPOSITION_DOF),
            alpha: 0.05,
            combination: CiCombination::SumOfSquares,
        }
    }

    pub fn half_width(&self) -> f64 {
        let p = 1.0 - self.alpha / 2.0;
        let se_p = self.var_period.max(0.0) / self.dof_period;
        let se_c = self.var_composition.max(0.0) / self.dof_composition;
        match self.combination {
            CiCombination::SumOfSquares => {
                let tp = student_t_quantile(p, self.dof_period);
                let tc = student_t_quantile(p, self.dof_composition);
                (tp * tp * se_p + tc * tc * se_c).sqrt()
            }
            CiCombination::PooledDof => {
                student_t_quantile(p, self.dof_period + self.dof_composition) * (se_p + se_c).sqrt()
            }
        }
    }
}

/// `(low, high)` around `theta_hat`.
pub fn confidence_interval(model: &UncertaintyModel) -> (f64, f64) {
    let h = model.half_width();
    (model.theta_hat - h, model.theta_hat + h)
}

/// Sample mean with a ±1 standard deviation band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: f64,
    pub sigma: f64,
}

impl Band {
    pub fn low(&self) -> f64 {
        self.mean - self.sigma
    }

    pub fn high(&self) -> f64 {
        self.mean + self.sigma
    }
}

/// Mean and unbiased standard deviation of pooled samples.
pub fn sigma_band(samples: &[f64]) -> Result<Band, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewPoints { got: samples.len(), need: 2 });
    }
    super::check_finite(samples)?;
    Ok(Band {
        mean: mean(samples),
        sigma: sample_variance(samples).sqrt(),
    })
}
