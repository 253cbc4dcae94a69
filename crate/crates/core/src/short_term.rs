//! Short-term protocol: rotating calibration periods, shuffled device subsets
//! of growing size, global versus per-device calibration on held-out weeks.
//!
//! For every shuffle `l` and calibration period `p`, the devices of `p` are
//! put in a random order and the first `n` of them train a global model on
//! two of their three week-slices. Every device of the other periods is then
//! scored on its week 3 and week 1, and the two scores are averaged. The
//! ad-hoc reference for that device is fitted on its own weeks (1, 2) and
//! scored on week 3, and fitted on weeks (2, 3) and scored on week 1. Week 2
//! is never a test week.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{fit_mlr, vendor_baseline, CalibrationModel, ModelKind};
use crate::data::{
    split_weeks, Channel, DataError, DeploymentData, DeviceSeries, PmFraction, VendorVariant,
    WeekSlices,
};
use crate::fusion::{fuse, FusionKind};
use crate::metrics::{evaluate, Metric, PerformanceRecord};
use crate::stats::{
    binomial, confidence_interval, sample_variance, sigma_band, t_test_paired, t_test_welch,
    wilcoxon_signed_rank, StatsError, TestResult, UncertaintyModel,
};

#[derive(Debug, Error)]
pub enum ShortTermError {
    #[error("{0} calibration periods, at least 2 are needed")]
    InsufficientPeriods(usize),
    #[error("period `{0}` has no devices")]
    InsufficientDevices(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("device {device}: {source}")]
    Data {
        device: String,
        #[source]
        source: DataError,
    },
    #[error("tensors are indexed differently: {0}")]
    IndexMismatch(String),
}

/// Which t test [`compare_methods`] runs next to the Wilcoxon test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    #[default]
    Paired,
    Welch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShortTermConfig {
    pub n_shuffles: usize,
    pub fusion_kind: FusionKind,
    pub fraction: PmFraction,
    pub variant: VendorVariant,
    pub seed: u64,
    /// The two 1-based week-slices of the calibration devices used for
    /// global training.
    pub train_weeks_global: [usize; 2],
    pub alpha: f64,
    pub t_test: TTestKind,
}

impl Default for ShortTermConfig {
    fn default() -> Self {
        Self {
            n_shuffles: 100,
            fusion_kind: FusionKind::Aggregate,
            fraction: PmFraction::Pm25,
            variant: VendorVariant::default(),
            seed: 0,
            train_weeks_global: [1, 2],
            alpha: 0.05,
            t_test: TTestKind::Paired,
        }
    }
}

impl ShortTermConfig {
    pub fn channel(&self) -> Channel {
        Channel::new(self.fraction, self.variant)
    }

    pub fn validate(&self) -> Result<(), ShortTermError> {
        let bad = |m: &str| Err(ShortTermError::InvalidConfig(m.to_string()));
        if self.n_shuffles == 0 {
            return bad("n_shuffles must be at least 1");
        }
        let [a, b] = self.train_weeks_global;
        if a == b || !(1..=3).contains(&a) || !(1..=3).contains(&b) {
            return bad("train_weeks_global must name two distinct week-slices in 1..=3");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.fraction.reference_free() {
            return bad("the reference analyzer reports PM2.5 and PM10 only");
        }
        Ok(())
    }
}

/// One test device's score within a cell: the mean of its two test weeks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceScore {
    pub device_id: String,
    pub period: usize,
    pub record: PerformanceRecord,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TensorCell {
    /// Mean over test devices, `None` when the cell is invalid.
    pub record: Option<PerformanceRecord>,
    pub device_scores: Vec<DeviceScore>,
    /// Global cells: the calibration devices, in shuffled order.
    pub train_devices: Vec<String>,
    /// Test devices that could not be scored.
    pub failed_devices: usize,
    /// Why the model could not be built, for invalid cells.
    pub error: Option<String>,
}

/// Performance indexed by shuffle `l`, calibration period `p` and subset size
/// `n`. Cells exist for `n <= period_sizes[p]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfTensor {
    pub kind: ModelKind,
    pub period_names: Vec<String>,
    pub period_sizes: Vec<usize>,
    /// `cells[l][p][n - 1]`.
    pub cells: Vec<Vec<Vec<TensorCell>>>,
}

impl PerfTensor {
    pub fn n_shuffles(&self) -> usize {
        self.cells.len()
    }

    pub fn n_periods(&self) -> usize {
        self.period_sizes.len()
    }

    pub fn max_n(&self) -> usize {
        self.period_sizes.iter().copied().max().unwrap_or(0)
    }

    /// `n` is 1-based.
    pub fn get(&self, l: usize, p: usize, n: usize) -> Option<&TensorCell> {
        self.cells.get(l)?.get(p)?.get(n.checked_sub(1)?)
    }

    /// Valid values of `metric` at size `n`, as `((l, p), value)` in index
    /// order.
    pub fn values_at(&self, n: usize, metric: Metric) -> Vec<((usize, usize), f64)> {
        let mut out = Vec::new();
        for l in 0..self.n_shuffles() {
            for p in 0..self.n_periods() {
                if let Some(r) = self.get(l, p, n).and_then(|c| c.record) {
                    out.push(((l, p), r.get(metric)));
                }
            }
        }
        out
    }

    /// Cells at size `n` that exist but hold no record.
    pub fn invalid_at(&self, n: usize) -> usize {
        (0..self.n_shuffles())
            .flat_map(|l| (0..self.n_periods()).map(move |p| (l, p)))
            .filter(|&(l, p)| self.get(l, p, n).is_some_and(|c| c.record.is_none()))
            .count()
    }
}

/// Uniformly random permutation of `device_ids` (Fisher–Yates).
pub fn shuffle_devices<R: Rng + ?Sized>(device_ids: &[String], rng: &mut R) -> Vec<String> {
    let mut out = device_ids.to_vec();
    out.shuffle(rng);
    out
}

/// The independent random stream of shuffle `l` in period `p`.
pub fn cell_stream(seed: u64, l: usize, p: usize, n_periods: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((l * n_periods + p) as u64);
    rng
}

struct PreparedPeriod {
    name: String,
    devices: Vec<(String, WeekSlices)>,
}

fn prepare(deployment: &DeploymentData) -> Result<Vec<PreparedPeriod>, ShortTermError> {
    if deployment.periods.len() < 2 {
        return Err(ShortTermError::InsufficientPeriods(deployment.periods.len()));
    }
    deployment
        .periods
        .iter()
        .map(|p| {
            if p.devices.is_empty() {
                return Err(ShortTermError::InsufficientDevices(p.name.clone()));
            }
            let devices = p
                .devices
                .iter()
                .map(|d| {
                    split_weeks(d)
                        .map(|w| (d.device_id.clone(), w))
                        .map_err(|source| ShortTermError::Data {
                            device: d.device_id.clone(),
                            source,
                        })
                })
                .collect::<Result<_, _>>()?;
            Ok(PreparedPeriod {
                name: p.name.clone(),
                devices,
            })
        })
        .collect()
}

/// Mean of the scores on week 3 and week 1.
fn two_week_score(
    model3: &CalibrationModel,
    model1: &CalibrationModel,
    weeks: &WeekSlices,
    channel: Channel,
) -> Option<PerformanceRecord> {
    let r3 = evaluate(model3, weeks.week(3), channel).ok()?;
    let r1 = evaluate(model1, weeks.week(1), channel).ok()?;
    PerformanceRecord::mean([&r3, &r1])
}

fn fit_single(series: &DeviceSeries, channel: Channel) -> Option<CalibrationModel> {
    let set = fuse(std::slice::from_ref(series), channel, FusionKind::Aggregate).ok()?;
    fit_mlr(&set).ok().map(|m| m.with_kind(ModelKind::Adhoc))
}

fn adhoc_score(weeks: &WeekSlices, channel: Channel) -> Option<PerformanceRecord> {
    let ah1 = fit_single(&weeks.pair(1, 2), channel)?;
    let ah2 = fit_single(&weeks.pair(2, 3), channel)?;
    two_week_score(&ah1, &ah2, weeks, channel)
}

fn cell_from_scores(scores: Vec<DeviceScore>, failed: usize, train: Vec<String>) -> TensorCell {
    let record = PerformanceRecord::mean(scores.iter().map(|s| &s.record));
    TensorCell {
        error: record.is_none().then(|| "no test device could be scored".to_string()),
        record,
        device_scores: scores,
        train_devices: train,
        failed_devices: failed,
    }
}

/// Runs the protocol on one deployment. Returns `(global, adhoc)`.
///
/// Cells whose model cannot be fitted are kept, marked invalid, and left out
/// of every average.
pub fn run_short_term(
    deployment: &DeploymentData,
    cfg: &ShortTermConfig,
) -> Result<(PerfTensor, PerfTensor), ShortTermError> {
    cfg.validate()?;
    let periods = prepare(deployment)?;
    let channel = cfg.channel();
    let n_periods = periods.len();
    let sizes: Vec<usize> = periods.iter().map(|p| p.devices.len()).collect();
    let names: Vec<String> = periods.iter().map(|p| p.name.clone()).collect();

    // Ad-hoc scores do not depend on l or n.
    let adhoc: Vec<Vec<Option<PerformanceRecord>>> = periods
        .par_iter()
        .map(|p| p.devices.iter().map(|(_, w)| adhoc_score(w, channel)).collect())
        .collect();

    let adhoc_cells: Vec<TensorCell> = (0..n_periods)
        .map(|p| {
            let mut scores = Vec::new();
            let mut failed = 0;
            for (q, period) in periods.iter().enumerate().filter(|(q, _)| *q != p) {
                for ((id, _), score) in period.devices.iter().zip(&adhoc[q]) {
                    match score {
                        Some(record) => scores.push(DeviceScore {
                            device_id: id.clone(),
                            period: q,
                            record: *record,
                        }),
                        None => failed += 1,
                    }
                }
            }
            cell_from_scores(scores, failed, Vec::new())
        })
        .collect();

    let [wa, wb] = cfg.train_weeks_global;
    let work: Vec<(usize, usize)> = (0..cfg.n_shuffles)
        .flat_map(|l| (0..n_periods).map(move |p| (l, p)))
        .collect();
    let global_rows: Vec<Vec<TensorCell>> = work
        .par_iter()
        .map(|&(l, p)| {
            let period = &periods[p];
            let ids: Vec<String> = period.devices.iter().map(|(id, _)| id.clone()).collect();
            let order = shuffle_devices(&ids, &mut cell_stream(cfg.seed, l, p, n_periods));
            let by_id: BTreeMap<&str, &WeekSlices> =
                period.devices.iter().map(|(id, w)| (id.as_str(), w)).collect();
            let train_slices: Vec<DeviceSeries> =
                order.iter().map(|id| by_id[id.as_str()].pair(wa, wb)).collect();
            (1..=order.len())
                .map(|n| global_cell(&periods, p, &order[..n], &train_slices[..n], cfg, channel))
                .collect()
        })
        .collect();

    let mut global_cells = vec![Vec::with_capacity(n_periods); cfg.n_shuffles];
    for ((l, _), row) in work.into_iter().zip(global_rows) {
        global_cells[l].push(row);
    }
    let adhoc_tensor_cells = (0..cfg.n_shuffles)
        .map(|_| {
            (0..n_periods)
                .map(|p| vec![adhoc_cells[p].clone(); sizes[p]])
                .collect()
        })
        .collect();

    Ok((
        PerfTensor {
            kind: ModelKind::Global,
            period_names: names.clone(),
            period_sizes: sizes.clone(),
            cells: global_cells,
        },
        PerfTensor {
            kind: ModelKind::Adhoc,
            period_names: names,
            period_sizes: sizes,
            cells: adhoc_tensor_cells,
        },
    ))
}

fn global_cell(
    periods: &[PreparedPeriod],
    p: usize,
    train_ids: &[String],
    train_slices: &[DeviceSeries],
    cfg: &ShortTermConfig,
    channel: Channel,
) -> TensorCell {
    let invalid = |e: String| TensorCell {
        train_devices: train_ids.to_vec(),
        error: Some(e),
        ..TensorCell::default()
    };
    let set = match fuse(train_slices, channel, cfg.fusion_kind) {
        Ok(s) => s,
        Err(e) => return invalid(e.to_string()),
    };
    let model = match fit_mlr(&set) {
        Ok(m) => m.with_period(periods[p].name.clone()),
        Err(e) => return invalid(e.to_string()),
    };
    let mut scores = Vec::new();
    let mut failed = 0;
    for (q, period) in periods.iter().enumerate().filter(|(q, _)| *q != p) {
        for (id, weeks) in &period.devices {
            assert!(
                !train_ids.contains(id),
                "device {id} is both a calibration and a test device"
            );
            match two_week_score(&model, &model, weeks, channel) {
                Some(record) => scores.push(DeviceScore {
                    device_id: id.clone(),
                    period: q,
                    record,
                }),
                None => failed += 1,
            }
        }
    }
    cell_from_scores(scores, failed, train_ids.to_vec())
}

/// Vendor calibration scored on every week-slice of every device.
pub fn vendor_baseline_scores(
    deployment: &DeploymentData,
    channel: Channel,
) -> Result<Vec<PerformanceRecord>, ShortTermError> {
    let model = vendor_baseline(channel.fraction);
    let mut out = Vec::new();
    for period in prepare(deployment)? {
        for (_, weeks) in &period.devices {
            out.extend(weeks.0.iter().filter_map(|w| evaluate(&model, w, channel).ok()));
        }
    }
    Ok(out)
}

/// Outcome of one significance test; failures are reported, not fatal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestOutcome {
    Done(TestResult),
    Failed(String),
}

impl TestOutcome {
    fn from(r: Result<TestResult, StatsError>) -> Self {
        match r {
            Ok(t) => TestOutcome::Done(t),
            Err(e) => TestOutcome::Failed(e.to_string()),
        }
    }

    pub fn p_value(&self) -> Option<f64> {
        match self {
            TestOutcome::Done(t) => Some(t.p_value),
            TestOutcome::Failed(_) => None,
        }
    }

    /// `p<0.05`, `p>0.05` or the failure reason.
    pub fn label(&self, alpha: f64) -> String {
        match self {
            TestOutcome::Done(t) if t.p_value < alpha => format!("p<{alpha}"),
            TestOutcome::Done(_) => format!("p>{alpha}"),
            TestOutcome::Failed(e) => format!("n/a ({e})"),
        }
    }
}

/// Tests at one subset size `n`, for R² and MAE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub pairs: usize,
    pub periods_contributing: usize,
    pub invalid_cells: usize,
    pub r2_t: TestOutcome,
    pub r2_wilcoxon: TestOutcome,
    pub mae_t: TestOutcome,
    pub mae_wilcoxon: TestOutcome,
}

/// Mean, 1-σ band and confidence interval of one method at one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub n: usize,
    pub method: ModelKind,
    pub metric: Metric,
    pub samples: usize,
    pub mean: f64,
    pub sigma: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub alpha: f64,
    pub t_test: TTestKind,
    pub first: ModelKind,
    pub second: ModelKind,
    pub rows: Vec<ComparisonRow>,
    pub bands: Vec<BandRow>,
}

/// Paired per-(l, p) comparison of two tensors at every subset size.
pub fn compare_methods(
    first: &PerfTensor,
    second: &PerfTensor,
    alpha: f64,
    t_test: TTestKind,
) -> Result<ComparisonReport, ShortTermError> {
    if first.period_sizes != second.period_sizes || first.n_shuffles() != second.n_shuffles() {
        return Err(ShortTermError::IndexMismatch(format!(
            "{} x {:?} vs {} x {:?}",
            first.n_shuffles(),
            first.period_sizes,
            second.n_shuffles(),
            second.period_sizes
        )));
    }
    let mut rows = Vec::new();
    let mut bands = Vec::new();
    for n in 1..=first.max_n() {
        let periods_contributing = first.period_sizes.iter().filter(|s| **s >= n).count();
        let outcome = |metric: Metric| {
            let a: BTreeMap<_, _> = first.values_at(n, metric).into_iter().collect();
            let (x, y): (Vec<f64>, Vec<f64>) = second
                .values_at(n, metric)
                .into_iter()
                .filter_map(|(k, v)| a.get(&k).map(|u| (*u, v)))
                .unzip();
            let t = match t_test {
                TTestKind::Paired => t_test_paired(&x, &y),
                TTestKind::Welch => t_test_welch(&x, &y),
            };
            (x.len(), TestOutcome::from(t), TestOutcome::from(wilcoxon_signed_rank(&x, &y, true)))
        };
        let (pairs, r2_t, r2_wilcoxon) = outcome(Metric::R2);
        let (_, mae_t, mae_wilcoxon) = outcome(Metric::Mae);
        rows.push(ComparisonRow {
            n,
            pairs,
            periods_contributing,
            invalid_cells: first.invalid_at(n) + second.invalid_at(n),
            r2_t,
            r2_wilcoxon,
            mae_t,
            mae_wilcoxon,
        });
        for tensor in [first, second] {
            for metric in [Metric::Mae, Metric::R2] {
                bands.push(band_row(tensor, n, metric, alpha));
            }
        }
    }
    Ok(ComparisonReport {
        alpha,
        t_test,
        first: first.kind,
        second: second.kind,
        rows,
        bands,
    })
}

fn band_row(tensor: &PerfTensor, n: usize, metric: Metric, alpha: f64) -> BandRow {
    let values = tensor.values_at(n, metric);
    let flat: Vec<f64> = values.iter().map(|(_, v)| *v).collect();
    let (mean, sigma) = match sigma_band(&flat) {
        Ok(b) => (b.mean, b.sigma),
        Err(_) if flat.len() == 1 => (flat[0], f64::NAN),
        Err(_) => (f64::NAN, f64::NAN),
    };

    // Split the spread into a period component (between per-period means)
    // and a composition component (within-period spread across shuffles).
    let mut by_period: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for ((_, p), v) in &values {
        by_period.entry(*p).or_default().push(*v);
    }
    let period_means: Vec<f64> = by_period
        .values()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    let within: Vec<f64> = by_period
        .values()
        .filter(|v| v.len() >= 2)
        .map(|v| sample_variance(v))
        .collect();
    let (ci_low, ci_high) = if period_means.len() >= 2 {
        let var_composition = if tensor.kind == ModelKind::Global && !within.is_empty() {
            within.iter().sum::<f64>() / within.len() as f64
        } else {
            0.0
        };
        let compositions = match tensor.kind {
            ModelKind::Global => by_period
                .keys()
                .map(|p| binomial(tensor.period_sizes[*p] as u64, n as u64))
                .min()
                .unwrap_or(1),
            _ => 1,
        };
        let mut model =
            UncertaintyModel::new(mean, sample_variance(&period_means), var_composition, compositions);
        model.dof_period = period_means.len() as f64;
        model.alpha = alpha;
        confidence_interval(&model)
    } else {
        (f64::NAN, f64::NAN)
    };
    BandRow {
        n,
        method: tensor.kind,
        metric,
        samples: flat.len(),
        mean,
        sigma,
        ci_low,
        ci_high,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(ShortTermConfig::default().validate().is_ok());
        let bad = ShortTermConfig {
            train_weeks_global: [2, 2],
            ..ShortTermConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ShortTermConfig {
            n_shuffles: 0,
            ..ShortTermConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ShortTermConfig {
            fraction: PmFraction::Pm1,
            ..ShortTermConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn shuffle_is_a_seeded_permutation() {
        let ids: Vec<String> = (0..10).map(|i| i.to_string()).collect();
        let a = shuffle_devices(&ids, &mut cell_stream(7, 3, 1, 3));
        let b = shuffle_devices(&ids, &mut cell_stream(7, 3, 1, 3));
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_by_key(|s| s.parse::<u32>().unwrap());
        assert_eq!(sorted, ids);
        assert_ne!(a, shuffle_devices(&ids, &mut cell_stream(7, 3, 2, 3)));
        let one = vec!["x".to_string()];
        assert_eq!(shuffle_devices(&one, &mut cell_stream(1, 0, 0, 1)), one);
    }

    #[test]
    fn shuffle_uniformity() {
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut counts: BTreeMap<Vec<String>, usize> = BTreeMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let trials = 10_000;
        for _ in 0..trials {
            *counts.entry(shuffle_devices(&ids, &mut rng)).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for c in counts.values() {
            let f = *c as f64 / trials as f64;
            assert!((f - 1.0 / 6.0).abs() <= 0.02, "{f}");
        }
    }
}
