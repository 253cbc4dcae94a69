//! Long-term protocol: every k-subset of every training batch is fused into
//! a global model on one deployment and tested on the other deployment's
//! devices that were not part of the batch.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{fit_mlr, CalibrationModel, ModelKind};
use crate::data::{Channel, Dataset, DeviceSeries, PmFraction, VendorVariant};
use crate::fusion::{fuse, FusionKind};
use crate::metrics::{evaluate, Metric, PerformanceRecord};

pub use crate::stats::quantiles;

#[derive(Debug, Error, PartialEq)]
pub enum LongTermError {
    #[error("k = {k} is outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("deployment `{0}` not found")]
    UnknownDeployment(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LongTermConfig {
    pub train_deployment: String,
    pub test_deployment: String,
    pub fusion_kind: FusionKind,
    pub fraction: PmFraction,
    pub variant: VendorVariant,
    pub max_k: Option<usize>,
    pub quantiles: Vec<f64>,
    /// Smallest subset size pooled into the combined table.
    pub combined_min_k: usize,
}

impl Default for LongTermConfig {
    fn default() -> Self {
        Self {
            train_deployment: "winter".into(),
            test_deployment: "summer".into(),
            fusion_kind: FusionKind::Aggregate,
            fraction: PmFraction::Pm25,
            variant: VendorVariant::default(),
            max_k: None,
            quantiles: vec![0.25, 0.5, 0.75],
            combined_min_k: 5,
        }
    }
}

impl LongTermConfig {
    pub fn channel(&self) -> Channel {
        Channel::new(self.fraction, self.variant)
    }

    pub fn validate(&self) -> Result<(), LongTermError> {
        let bad = |m: String| Err(LongTermError::InvalidConfig(m));
        if self.train_deployment == self.test_deployment {
            return bad("train and test deployments must differ".into());
        }
        if self.quantiles.is_empty() || self.quantiles.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return bad(format!("quantiles {:?} must lie in (0, 1)", self.quantiles));
        }
        if self.quantiles.windows(2).any(|w| w[0] >= w[1]) {
            return bad("quantiles must be strictly increasing".into());
        }
        if self.max_k == Some(0) {
            return bad("max_k must be at least 1".into());
        }
        if self.fraction.reference_free() {
            return bad("the reference analyzer reports PM2.5 and PM10 only".into());
        }
        Ok(())
    }
}

/// All `k`-subsets of `devices` in lexicographic order of input positions.
/// Each subset keeps the input order, so sorted input gives sorted subsets.
pub fn enumerate_combinations<T: Clone>(devices: &[T], k: usize) -> Result<Vec<Vec<T>>, LongTermError> {
    let n = devices.len();
    if k == 0 || k > n {
        return Err(LongTermError::KOutOfRange { k, n });
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| devices[i].clone()).collect());
        // Rightmost position that can still advance.
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return Ok(out);
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// One row of a quantile table. `values` is NaN-filled for missing cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub batch: String,
    pub k: usize,
    pub metric: Metric,
    pub values: Vec<f64>,
    /// Number of pooled (model, test device) pairs.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub kind: ModelKind,
    pub probs: Vec<f64>,
    pub rows: Vec<QuantileRow>,
}

/// Pooled quantiles of each method across batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedRow {
    pub method: ModelKind,
    pub metric: Metric,
    pub values: Vec<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedTable {
    pub probs: Vec<f64>,
    pub min_k: usize,
    pub rows: Vec<CombinedRow>,
}

/// A scored (model, test device) pair, kept for auditing batch exclusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub batch: String,
    pub k: usize,
    pub train_devices: Vec<String>,
    pub test_device: String,
    pub record: PerformanceRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongTermResult {
    pub global: QuantileTable,
    pub adhoc: QuantileTable,
    pub combined: CombinedTable,
    pub pairs: Vec<ScoredPair>,
    pub adhoc_pairs: Vec<ScoredPair>,
    pub models_fitted: usize,
    pub failed_fits: usize,
}

const TABLE_METRICS: [Metric; 2] = [Metric::R2, Metric::Mae];

fn quantile_values(records: &[&PerformanceRecord], metric: Metric, probs: &[f64]) -> Vec<f64> {
    let values: Vec<f64> = records.iter().map(|r| r.get(metric)).collect();
    quantiles(&values, probs).unwrap_or_else(|_| vec![f64::NAN; probs.len()])
}

fn fit(devices: &[&DeviceSeries], cfg: &LongTermConfig) -> Option<CalibrationModel> {
    let set = fuse(devices, cfg.channel(), cfg.fusion_kind).ok()?;
    fit_mlr(&set).ok()
}

/// Runs the protocol. Batches are the periods of the training deployment.
///
/// Subset sizes sweep `1..=K`, where `K` is the largest batch (capped by
/// `max_k`); a batch smaller than `k`, or one without eligible test devices,
/// yields a NaN row.
pub fn run_long_term(dataset: &Dataset, cfg: &LongTermConfig) -> Result<LongTermResult, LongTermError> {
    cfg.validate()?;
    let train = dataset
        .deployment(&cfg.train_deployment)
        .ok_or_else(|| LongTermError::UnknownDeployment(cfg.train_deployment.clone()))?;
    let test = dataset
        .deployment(&cfg.test_deployment)
        .ok_or_else(|| LongTermError::UnknownDeployment(cfg.test_deployment.clone()))?;
    let channel = cfg.channel();

    let mut test_ids: Vec<String> = test.device_ids().map(str::to_string).collect();
    test_ids.sort();
    test_ids.dedup();
    let test_series: Vec<DeviceSeries> = test_ids
        .iter()
        .map(|id| test.device(id).expect("listed test device"))
        .collect();

    let k_max = train
        .periods
        .iter()
        .map(|p| p.devices.len())
        .max()
        .unwrap_or(0)
        .min(cfg.max_k.unwrap_or(usize::MAX));

    let mut global_rows = Vec::new();
    let mut pairs = Vec::new();
    let mut models_fitted = 0;
    let mut failed_fits = 0;
    let mut adhoc_rows = Vec::new();
    let mut adhoc_pairs = Vec::new();

    for batch in &train.periods {
        let mut members: Vec<&DeviceSeries> = batch.devices.iter().collect();
        members.sort_by(|a, b| a.device_id.cmp(&b.device_id));
        let eligible: Vec<&DeviceSeries> = test_series
            .iter()
            .filter(|t| !members.iter().any(|m| m.device_id == t.device_id))
            .collect();

        for k in 1..=k_max {
            let subsets = if k <= members.len() {
                enumerate_combinations(&members, k)?
            } else {
                Vec::new()
            };
            let scored: Vec<Option<Vec<ScoredPair>>> = subsets
                .par_iter()
                .map(|subset| {
                    let model = fit(subset, cfg)?;
                    let train_devices: Vec<String> = subset.iter().map(|d| d.device_id.clone()).collect();
                    Some(
                        eligible
                            .iter()
                            .filter_map(|t| {
                                assert!(!train_devices.contains(&t.device_id));
                                let record = evaluate(&model, t, channel).ok()?;
                                Some(ScoredPair {
                                    batch: batch.name.clone(),
                                    k,
                                    train_devices: train_devices.clone(),
                                    test_device: t.device_id.clone(),
                                    record,
                                })
                            })
                            .collect(),
                    )
                })
                .collect();
            models_fitted += scored.iter().filter(|s| s.is_some()).count();
            failed_fits += scored.iter().filter(|s| s.is_none()).count();
            let cell: Vec<ScoredPair> = scored.into_iter().flatten().flatten().collect();
            let records: Vec<&PerformanceRecord> = cell.iter().map(|p| &p.record).collect();
            for metric in TABLE_METRICS {
                global_rows.push(QuantileRow {
                    batch: batch.name.clone(),
                    k,
                    metric,
                    values: quantile_values(&records, metric, &cfg.quantiles),
                    samples: records.len(),
                });
            }
            pairs.extend(cell);
        }

        // Each device calibrated on its own training data, tested on its
        // own data from the other deployment.
        let cell: Vec<ScoredPair> = members
            .iter()
            .filter_map(|m| {
                let own = test_series.iter().find(|t| t.device_id == m.device_id)?;
                let model = fit(&[*m], cfg)?.with_kind(ModelKind::Adhoc);
                Some(ScoredPair {
                    batch: batch.name.clone(),
                    k: 1,
                    train_devices: vec![m.device_id.clone()],
                    test_device: own.device_id.clone(),
                    record: evaluate(&model, own, channel).ok()?,
                })
            })
            .collect();
        let records: Vec<&PerformanceRecord> = cell.iter().map(|p| &p.record).collect();
        for metric in TABLE_METRICS {
            adhoc_rows.push(QuantileRow {
                batch: batch.name.clone(),
                k: 1,
                metric,
                values: quantile_values(&records, metric, &cfg.quantiles),
                samples: records.len(),
            });
        }
        adhoc_pairs.extend(cell);
    }

    let mut combined_rows = Vec::new();
    for metric in TABLE_METRICS {
        let global: Vec<&PerformanceRecord> = pairs
            .iter()
            .filter(|p| p.k >= cfg.combined_min_k)
            .map(|p| &p.record)
            .collect();
        let adhoc: Vec<&PerformanceRecord> = adhoc_pairs.iter().map(|p| &p.record).collect();
        for (method, records) in [(ModelKind::Global, global), (ModelKind::Adhoc, adhoc)] {
            combined_rows.push(CombinedRow {
                method,
                metric,
                values: quantile_values(&records, metric, &cfg.quantiles),
                samples: records.len(),
            });
        }
    }

    Ok(LongTermResult {
        global: QuantileTable {
            kind: ModelKind::Global,
            probs: cfg.quantiles.clone(),
            rows: global_rows,
        },
        adhoc: QuantileTable {
            kind: ModelKind::Adhoc,
            probs: cfg.quantiles.clone(),
            rows: adhoc_rows,
        },
        combined: CombinedTable {
            probs: cfg.quantiles.clone(),
            min_k: cfg.combined_min_k,
            rows: combined_rows,
        },
        pairs,
        adhoc_pairs,
        models_fitted,
        failed_fits,
    })
}
