use std::collections::BTreeMap;

use chrono::{DateTime, DurationRound, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use super::{AlignedRecord, DataError, DeviceSeries, Features, RawSample, ReferenceValues};

/// Expected samples per hour at the device's 6 s sampling cadence.
pub const SAMPLES_PER_HOUR: usize = 600;
/// Minimum fraction of expected samples for an hour to be kept.
pub const DEFAULT_MIN_COVERAGE: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyRecord {
    /// Start of the hour, `[hour, hour + 1h)`.
    pub hour: DateTime<Utc>,
    pub features: Features,
    pub coverage: f64,
}

pub(crate) fn floor_hour(t: DateTime<Utc>) -> DateTime<Utc> {
    t.duration_trunc(TimeDelta::hours(1))
        .expect("hour truncation of a representable instant")
}

/// Hourly means at the default 600 samples/hour cadence.
pub fn hourly_average(samples: &[RawSample], min_coverage: f64) -> Vec<HourlyRecord> {
    hourly_average_with(samples, min_coverage, SAMPLES_PER_HOUR)
}

/// Arithmetic mean of every field over the samples falling in each hour.
///
/// `coverage = count / samples_per_hour`, capped at 1 (resent samples can
/// push the raw count above the nominal cadence). Hours below
/// `min_coverage` are dropped. Output is ordered by hour.
pub fn hourly_average_with(
    samples: &[RawSample],
    min_coverage: f64,
    samples_per_hour: usize,
) -> Vec<HourlyRecord> {
    assert!((0.0..=1.0).contains(&min_coverage), "min_coverage must lie in [0, 1]");
    assert!(samples_per_hour > 0);

    let mut buckets: BTreeMap<DateTime<Utc>, (Features, usize)> = BTreeMap::new();
    for s in samples {
        let (acc, n) = buckets.entry(floor_hour(s.timestamp)).or_default();
        for (a, v) in acc.fields_mut().zip(s.features.fields()) {
            *a += v;
        }
        *n += 1;
    }

    buckets
        .into_iter()
        .filter_map(|(hour, (mut features, n))| {
            let coverage = (n as f64 / samples_per_hour as f64).min(1.0);
            if coverage < min_coverage {
                return None;
            }
            for f in features.fields_mut() {
                *f /= n as f64;
            }
            Some(HourlyRecord {
                hour,
                features,
                coverage,
            })
        })
        .collect()
}

/// Inner join of hourly device records with the reference series.
pub fn align_with_reference(
    device_id: &str,
    hourly: &[HourlyRecord],
    reference: &BTreeMap<DateTime<Utc>, ReferenceValues>,
) -> Result<DeviceSeries, DataError> {
    let mut records: Vec<AlignedRecord> = hourly
        .iter()
        .filter_map(|h| {
            reference.get(&h.hour).map(|r| AlignedRecord {
                hour: h.hour,
                features: h.features,
                coverage: h.coverage,
                reference: *r,
            })
        })
        .collect();
    if records.is_empty() {
        return Err(DataError::EmptyOverlap);
    }
    records.sort_by_key(|r| r.hour);
    records.dedup_by_key(|r| r.hour);
    Ok(DeviceSeries::new(device_id, records))
}
