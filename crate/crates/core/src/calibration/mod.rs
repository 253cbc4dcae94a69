//! The multilinear calibration law `C = a * PM' + b * RH + c`.

mod lstsq;
mod payload;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Features, PmFraction, VendorVariant};
use crate::fusion::{FusionKind, TrainingRow, TrainingSet};

pub use lstsq::RANK_TOLERANCE;
pub use payload::{
    decode_payload_bytes, encode_payload, payload_bytes, PayloadEncoder, CALIBRATED_PAYLOAD_BYTES,
    RAW_PAYLOAD_BYTES,
};

/// Number of coefficients of the law.
pub const N_PARAMS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("{rows} training rows, at least 3 are needed")]
    TooFewRows { rows: usize },
    #[error("design matrix is rank deficient (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("training data contains non-finite values")]
    NonFinite,
    #[error("no {0} model available")]
    MissingModel(PmFraction),
    #[error("model is for {found}, expected {expected}")]
    FractionMismatch {
        expected: PmFraction,
        found: PmFraction,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Global,
    Adhoc,
    Vendor,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Global => "global",
            ModelKind::Adhoc => "adhoc",
            ModelKind::Vendor => "vendor",
        })
    }
}

/// Where a model's training data came from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub devices: Vec<String>,
    pub period: Option<String>,
    pub fusion_kind: Option<FusionKind>,
    pub rows: usize,
}

/// Fitted coefficients for one PM fraction.
///
/// Serializes as `{fraction, a, b, c, kind, trained_on}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub fraction: PmFraction,
    /// Gain on the vendor PM estimate.
    pub a: f64,
    /// µg/m³ per %RH.
    pub b: f64,
    /// Intercept, µg/m³.
    pub c: f64,
    pub kind: ModelKind,
    pub trained_on: Provenance,
}

impl CalibrationModel {
    #[inline]
    pub fn predict(&self, pm_vendor: f64, rh: f64) -> f64 {
        self.a * pm_vendor + self.b * rh + self.c
    }

    pub fn predict_features(&self, features: &Features, variant: VendorVariant) -> f64 {
        self.predict(features.vendor_pm(self.fraction, variant), features.rh)
    }

    pub fn coefficients(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn with_kind(mut self, kind: ModelKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_period(mut self, period: impl Into<String>) -> Self {
        self.trained_on.period = Some(period.into());
        self
    }
}

/// Applies the law. Negative outputs are returned as-is.
pub fn predict(model: &CalibrationModel, pm_vendor: f64, rh: f64) -> f64 {
    model.predict(pm_vendor, rh)
}

/// Ordinary least squares on the design `[pm_vendor, rh, 1]`.
///
/// Solved through a Householder QR factorization; the design is rejected
/// when its smallest singular value falls below [`RANK_TOLERANCE`] times the
/// largest (a constant RH column, for instance, is collinear with the
/// intercept). The returned model is tagged [`ModelKind::Global`]; use
/// [`CalibrationModel::with_kind`] for ad-hoc fits.
pub fn fit_mlr(train: &TrainingSet) -> Result<CalibrationModel, CalibrationError> {
    let [a, b, c] = fit_rows(&train.rows)?;
    Ok(CalibrationModel {
        fraction: train.fraction,
        a,
        b,
        c,
        kind: ModelKind::Global,
        trained_on: Provenance {
            devices: train.source_devices.clone(),
            period: None,
            fusion_kind: Some(train.fusion_kind),
            rows: train.rows.len(),
        },
    })
}

pub(crate) fn fit_rows(rows: &[TrainingRow]) -> Result<[f64; 3], CalibrationError> {
    if rows.len() < N_PARAMS {
        return Err(CalibrationError::TooFewRows { rows: rows.len() });
    }
    let finite = rows
        .iter()
        .all(|r| r.pm_vendor.is_finite() && r.rh.is_finite() && r.target.is_finite());
    if !finite {
        return Err(CalibrationError::NonFinite);
    }
    let columns = vec![
        rows.iter().map(|r| r.pm_vendor).collect(),
        rows.iter().map(|r| r.rh).collect(),
        vec![1.0; rows.len()],
    ];
    let y = rows.iter().map(|r| r.target).collect();
    let sol = lstsq::solve(columns, y).map_err(|e| CalibrationError::RankDeficient { ratio: e.ratio })?;
    let x = sol.coefficients;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CalibrationError::NonFinite);
    }
    Ok([x[0], x[1], x[2]])
}

/// The manufacturer's own estimate, `(a, b, c) = (1, 0, 0)`.
pub fn vendor_baseline(fraction: PmFraction) -> CalibrationModel {
    CalibrationModel {
        fraction,
        a: 1.0,
        b: 0.0,
        c: 0.0,
        kind: ModelKind::Vendor,
        trained_on: Provenance::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: Vec<TrainingRow>) -> TrainingSet {
        TrainingSet {
            hours_covered: rows.len(),
            rows,
            fraction: PmFraction::Pm25,
            fusion_kind: FusionKind::Aggregate,
            source_devices: vec!["337".into()],
            dropped_hours: 0,
            reference_conflicts: 0,
        }
    }

    fn row(pm: f64, rh: f64, target: f64) -> TrainingRow {
        TrainingRow {
            pm_vendor: pm,
            rh,
            target,
        }
    }

    #[test]
    fn recovers_noiseless_coefficients() {
        let (a, b, c) = (0.62, -0.11, 3.5);
        let rows = [(10.0, 40.0), (25.0, 80.0), (3.0, 55.0), (60.0, 20.0)]
            .iter()
            .map(|&(pm, rh)| row(pm, rh, a * pm + b * rh + c))
            .collect();
        let m = fit_mlr(&set(rows)).unwrap();
        for (got, want) in m.coefficients().iter().zip([a, b, c]) {
            assert!(((got - want) / want).abs() < 1e-9, "{got} vs {want}");
        }
        assert_eq!(m.trained_on.rows, 4);
        assert_eq!(m.kind, ModelKind::Global);
    }

    #[test]
    fn identity_targets() {
        let rows = (0..10).map(|i| row(i as f64 * 3.0, 30.0 + (i * i) as f64, i as f64 * 3.0)).collect();
        let m = fit_mlr(&set(rows)).unwrap();
        assert!((m.a - 1.0).abs() < 1e-12 && m.b.abs() < 1e-12 && m.c.abs() < 1e-10);
    }

    #[test]
    fn constant_rh_is_rank_deficient() {
        let rows = (0..10).map(|i| row(i as f64, 50.0, 2.0 * i as f64)).collect();
        assert!(matches!(fit_mlr(&set(rows)), Err(CalibrationError::RankDeficient { .. })));
    }

    #[test]
    fn too_few_rows_and_non_finite() {
        let rows = vec![row(1.0, 2.0, 3.0), row(2.0, 3.0, 4.0)];
        assert_eq!(fit_mlr(&set(rows)).unwrap_err(), CalibrationError::TooFewRows { rows: 2 });
        let rows = vec![row(1.0, 2.0, 3.0), row(2.0, 7.0, 4.0), row(f64::NAN, 3.0, 1.0)];
        assert_eq!(fit_mlr(&set(rows)).unwrap_err(), CalibrationError::NonFinite);
    }

    #[test]
    fn prediction_examples() {
        let mut m = vendor_baseline(PmFraction::Pm25);
        assert_eq!(predict(&m, 12.3, 80.0), 12.3);
        assert_eq!(predict(&m, 8.7, 10.0), 8.7);
        (m.a, m.b, m.c) = (2.0, 0.1, 1.0);
        assert!((predict(&m, 10.0, 50.0) - 26.0).abs() < 1e-12);
        (m.a, m.b, m.c) = (0.0, 0.0, 5.0);
        assert_eq!(predict(&m, 123.0, 99.0), 5.0);
        (m.a, m.b, m.c) = (1.0, 0.0, -10.0);
        assert_eq!(predict(&m, 2.0, 0.0), -8.0);
    }

    #[test]
    fn json_field_names() {
        let m = vendor_baseline(PmFraction::Pm10).with_period("winter/p1");
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        for k in ["fraction", "a", "b", "c", "kind", "trained_on"] {
            assert!(keys.contains(&k), "missing {k}");
        }
        assert_eq!(v["fraction"], "pm10");
        assert_eq!(v["kind"], "vendor");
        assert_eq!(v["trained_on"]["period"], "winter/p1");
        let back: CalibrationModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }
}
