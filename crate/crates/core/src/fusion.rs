//! Fusion of several devices' colocation data into one training set.
//!
//! Aggregation concatenates every device-hour, so `n` devices with `size`
//! hours each yield `n * size` rows. Median fusion keeps only the hours every
//! device reported and replaces each feature by its median across devices.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Channel, DeviceSeries, PmFraction};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FusionError {
    #[error("no devices to fuse")]
    EmptyInput,
    #[error("devices share no common hour")]
    NoCommonHours,
    #[error("the reference analyzer does not report {0}")]
    NoReference(PmFraction),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionKind {
    #[default]
    Aggregate,
    Median,
}

impl fmt::Display for FusionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionKind::Aggregate => "aggregate",
            FusionKind::Median => "median",
        })
    }
}

impl std::str::FromStr for FusionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aggregate" | "aggregation" => Ok(FusionKind::Aggregate),
            "median" => Ok(FusionKind::Median),
            other => Err(format!("unknown fusion kind `{other}`")),
        }
    }
}

/// Features of the calibration law plus the reference target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub pm_vendor: f64,
    pub rh: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub rows: Vec<TrainingRow>,
    pub fraction: PmFraction,
    pub fusion_kind: FusionKind,
    pub source_devices: Vec<String>,
    /// Distinct hours represented in `rows`.
    pub hours_covered: usize,
    /// Median fusion: hours dropped because some device did not report them.
    pub dropped_hours: usize,
    /// Median fusion: common hours where devices carried different reference
    /// values. The median of those values is used as the target.
    pub reference_conflicts: usize,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub(crate) fn training_rows(
    series: &DeviceSeries,
    channel: Channel,
) -> Result<impl Iterator<Item = TrainingRow> + '_, FusionError> {
    let fraction = channel.fraction;
    if fraction == PmFraction::Pm1 {
        return Err(FusionError::NoReference(fraction));
    }
    Ok(series.records.iter().map(move |r| TrainingRow {
        pm_vendor: r.features.vendor_pm(fraction, channel.variant),
        rh: r.features.rh,
        target: r.reference.get(fraction).expect("PM2.5 and PM10 always have a reference"),
    }))
}

/// Concatenates all devices' rows, without deduplication.
pub fn fuse_aggregate<S: AsRef<DeviceSeries>>(
    devices: &[S],
    channel: Channel,
) -> Result<TrainingSet, FusionError> {
    if devices.is_empty() {
        return Err(FusionError::EmptyInput);
    }
    let total = devices.iter().map(|d| d.as_ref().len()).sum();
    let mut rows = Vec::with_capacity(total);
    for d in devices {
        rows.extend(training_rows(d.as_ref(), channel)?);
    }
    let hours: std::collections::BTreeSet<DateTime<Utc>> =
        devices.iter().flat_map(|d| d.as_ref().hours()).collect();
    Ok(TrainingSet {
        rows,
        fraction: channel.fraction,
        fusion_kind: FusionKind::Aggregate,
        source_devices: devices.iter().map(|d| d.as_ref().device_id.clone()).collect(),
        hours_covered: hours.len(),
        dropped_hours: 0,
        reference_conflicts: 0,
    })
}

/// Median of a small sample; the mean of the two central values for even sizes.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Feature-wise median across devices at every hour all of them reported.
pub fn fuse_median<S: AsRef<DeviceSeries>>(
    devices: &[S],
    channel: Channel,
) -> Result<TrainingSet, FusionError> {
    if devices.is_empty() {
        return Err(FusionError::EmptyInput);
    }
    let n = devices.len();
    let mut by_hour: BTreeMap<DateTime<Utc>, Vec<TrainingRow>> = BTreeMap::new();
    for d in devices {
        let d = d.as_ref();
        for (hour, row) in d.hours().zip(training_rows(d, channel)?) {
            by_hour.entry(hour).or_default().push(row);
        }
    }
    let total_hours = by_hour.len();

    let mut rows = Vec::new();
    let mut conflicts = 0;
    let (mut pm, mut rh, mut target) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for group in by_hour.values().filter(|g| g.len() == n) {
        pm.clear();
        rh.clear();
        target.clear();
        for r in group {
            pm.push(r.pm_vendor);
            rh.push(r.rh);
            target.push(r.target);
        }
        if target.iter().any(|t| *t != target[0]) {
            conflicts += 1;
        }
        rows.push(TrainingRow {
            pm_vendor: median(&mut pm),
            rh: median(&mut rh),
            target: median(&mut target),
        });
    }
    if rows.is_empty() {
        return Err(FusionError::NoCommonHours);
    }
    if conflicts > 0 {
        log::warn!("{conflicts} hours with disagreeing reference values across devices");
    }
    Ok(TrainingSet {
        hours_covered: rows.len(),
        dropped_hours: total_hours - rows.len(),
        rows,
        fraction: channel.fraction,
        fusion_kind: FusionKind::Median,
        source_devices: devices.iter().map(|d| d.as_ref().device_id.clone()).collect(),
        reference_conflicts: conflicts,
    })
}

/// Dispatches on `kind`.
pub fn fuse<S: AsRef<DeviceSeries>>(
    devices: &[S],
    channel: Channel,
    kind: FusionKind,
) -> Result<TrainingSet, FusionError> {
    match kind {
        FusionKind::Aggregate => fuse_aggregate(devices, channel),
        FusionKind::Median => fuse_median(devices, channel),
    }
}
