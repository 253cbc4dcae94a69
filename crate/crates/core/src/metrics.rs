//! Performance indicators: MAE, RMSE, R², NRMSE and MAE/range.
//!
//! NRMSE is RMSE over the population standard deviation of the reference,
//! so the constant-mean predictor scores exactly 1. Range normalization is
//! available through [`NrmseNorm::Range`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::CalibrationModel;
use crate::data::{Channel, DeviceSeries};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("prediction and truth lengths differ ({pred} vs {truth})")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("empty series")]
    Empty,
    #[error("{0} points, at least 2 are needed")]
    TooFewPoints(usize),
    #[error("reference series has zero variance")]
    ZeroVariance,
    #[error("reference series has zero range")]
    ZeroRange,
    #[error("the reference analyzer does not report {0}")]
    NoReference(String),
    #[error("model is for {model}, test channel is {test}")]
    FractionMismatch { model: String, test: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NrmseNorm {
    #[default]
    StdDev,
    Range,
}

fn check(pred: &[f64], truth: &[f64]) -> Result<(), MetricError> {
    if pred.len() != truth.len() {
        return Err(MetricError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sum_sq_dev(truth: &[f64]) -> f64 {
    let m = mean(truth);
    truth.iter().map(|t| (t - m).powi(2)).sum()
}

fn range(truth: &[f64]) -> f64 {
    let (lo, hi) = truth
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
    hi - lo
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    check(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / truth.len() as f64)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    check(pred, truth)?;
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sse / truth.len() as f64).sqrt())
}

/// `1 - SSE / SST`. Negative when worse than predicting the mean.
pub fn r2(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    check(pred, truth)?;
    if truth.len() < 2 {
        return Err(MetricError::TooFewPoints(truth.len()));
    }
    let sst = sum_sq_dev(truth);
    if sst == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p).powi(2)).sum();
    Ok(1.0 - sse / sst)
}

pub fn nrmse(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    nrmse_with(pred, truth, NrmseNorm::StdDev)
}

pub fn nrmse_with(pred: &[f64], truth: &[f64], norm: NrmseNorm) -> Result<f64, MetricError> {
    let e = rmse(pred, truth)?;
    let scale = match norm {
        NrmseNorm::StdDev => {
            let sd = (sum_sq_dev(truth) / truth.len() as f64).sqrt();
            if sd == 0.0 {
                return Err(MetricError::ZeroVariance);
            }
            sd
        }
        NrmseNorm::Range => {
            let r = range(truth);
            if r == 0.0 {
                return Err(MetricError::ZeroRange);
            }
            r
        }
    };
    Ok(e / scale)
}

pub fn mae_over_range(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    let e = mae(pred, truth)?;
    let r = range(truth);
    if r == 0.0 {
        return Err(MetricError::ZeroRange);
    }
    Ok(e / r)
}

/// All indicators of one (model, test set) pairing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
    pub nrmse: f64,
    pub mae_over_range: f64,
    pub n_points: usize,
}

/// Selects one indicator out of a [`PerformanceRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mae,
    Rmse,
    R2,
    Nrmse,
    MaeOverRange,
}

impl Metric {
    pub fn token(self) -> &'static str {
        match self {
            Metric::Mae => "mae",
            Metric::Rmse => "rmse",
            Metric::R2 => "r2",
            Metric::Nrmse => "nrmse",
            Metric::MaeOverRange => "mae_over_range",
        }
    }
}

impl PerformanceRecord {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Mae => self.mae,
            Metric::Rmse => self.rmse,
            Metric::R2 => self.r2,
            Metric::Nrmse => self.nrmse,
            Metric::MaeOverRange => self.mae_over_range,
        }
    }

    /// Field-wise mean; `n_points` is summed. `None` for an empty input.
    pub fn mean<'a>(records: impl IntoIterator<Item = &'a PerformanceRecord>) -> Option<PerformanceRecord> {
        let mut acc = [0.0; 5];
        let mut points = 0;
        let mut n = 0usize;
        for r in records {
            for (a, v) in acc.iter_mut().zip([r.mae, r.rmse, r.r2, r.nrmse, r.mae_over_range]) {
                *a += v;
            }
            points += r.n_points;
            n += 1;
        }
        (n > 0).then(|| {
            let k = n as f64;
            PerformanceRecord {
                mae: acc[0] / k,
                rmse: acc[1] / k,
                r2: acc[2] / k,
                nrmse: acc[3] / k,
                mae_over_range: acc[4] / k,
                n_points: points,
            }
        })
    }
}

pub fn score(pred: &[f64], truth: &[f64]) -> Result<PerformanceRecord, MetricError> {
    score_with(pred, truth, NrmseNorm::StdDev)
}

pub fn score_with(pred: &[f64], truth: &[f64], norm: NrmseNorm) -> Result<PerformanceRecord, MetricError> {
    Ok(PerformanceRecord {
        r2: r2(pred, truth)?,
        mae: mae(pred, truth)?,
        rmse: rmse(pred, truth)?,
        nrmse: nrmse_with(pred, truth, norm)?,
        mae_over_range: mae_over_range(pred, truth)?,
        n_points: truth.len(),
    })
}

/// Scores `model` on the test series against the reference for its fraction.
pub fn evaluate(
    model: &CalibrationModel,
    test: &DeviceSeries,
    channel: Channel,
) -> Result<PerformanceRecord, MetricError> {
    evaluate_with(model, test, channel, NrmseNorm::StdDev)
}

pub fn evaluate_with(
    model: &CalibrationModel,
    test: &DeviceSeries,
    channel: Channel,
    norm: NrmseNorm,
) -> Result<PerformanceRecord, MetricError> {
    if model.fraction != channel.fraction {
        return Err(MetricError::FractionMismatch {
            model: model.fraction.to_string(),
            test: channel.fraction.to_string(),
        });
    }
    if test.is_empty() {
        return Err(MetricError::Empty);
    }
    if channel.fraction.reference_free() {
        return Err(MetricError::NoReference(channel.fraction.to_string()));
    }
    let (pred, truth): (Vec<f64>, Vec<f64>) = test
        .records
        .iter()
        .map(|r| {
            (
                model.predict_features(&r.features, channel.variant),
                r.reference.get(channel.fraction).unwrap_or(f64::NAN),
            )
        })
        .unzip();
    score_with(&pred, &truth, norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!((mae(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((mae(&[6.0, 7.0, 8.0], &[1.0, 2.0, 3.0]).unwrap() - 5.0).abs() < 1e-15);
        assert_eq!(mae(&[1.0], &[1.0, 2.0]), Err(MetricError::LengthMismatch { pred: 1, truth: 2 }));
        assert_eq!(mae(&[], &[]), Err(MetricError::Empty));
    }

    #[test]
    fn r2_examples() {
        let truth = [1.0, 4.0, 2.0, 8.0];
        assert_eq!(r2(&truth, &truth).unwrap(), 1.0);
        assert!(r2(&[3.75; 4], &truth).unwrap().abs() < 1e-15);
        assert!(r2(&[8.0, 1.0, 8.0, 2.0], &truth).unwrap() < 0.0);
        assert_eq!(r2(&[1.0, 2.0], &[3.0, 3.0]), Err(MetricError::ZeroVariance));
    }

    #[test]
    fn rmse_nrmse_and_range() {
        let truth = [1.0, 3.0];
        assert_eq!(rmse(&truth, &truth).unwrap(), 0.0);
        assert_eq!(nrmse(&truth, &truth).unwrap(), 0.0);
        assert_eq!(mae_over_range(&truth, &truth).unwrap(), 0.0);

        let pred = [0.0, 0.0];
        assert!((rmse(&pred, &truth).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae(&pred, &truth).unwrap(), 2.0);
        assert!((mae_over_range(&pred, &truth).unwrap() - 1.0).abs() < 1e-15);

        assert!((nrmse(&[2.0, 2.0], &truth).unwrap() - 1.0).abs() < 1e-15);
        assert!((nrmse_with(&[2.0, 2.0], &truth, NrmseNorm::Range).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(mae_over_range(&[1.0, 1.0], &[2.0, 2.0]), Err(MetricError::ZeroRange));
    }

    #[test]
    fn record_mean() {
        let a = PerformanceRecord {
            mae: 1.0,
            rmse: 2.0,
            r2: 0.5,
            nrmse: 0.4,
            mae_over_range: 0.1,
            n_points: 10,
        };
        let b = PerformanceRecord {
            mae: 3.0,
            rmse: 4.0,
            r2: -0.5,
            nrmse: 0.6,
            mae_over_range: 0.3,
            n_points: 5,
        };
        let m = PerformanceRecord::mean([&a, &b]).unwrap();
        assert_eq!((m.mae, m.rmse, m.r2, m.n_points), (2.0, 3.0, 0.0, 15));
        assert!(PerformanceRecord::mean([]).is_none());
    }
}
