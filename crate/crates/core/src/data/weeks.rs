use chrono::TimeDelta;

use super::{DataError, DeviceSeries};

/// Three contiguous, equal-duration slices of one device's period.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeekSlices(pub [DeviceSeries; 3]);

impl WeekSlices {
    /// One-based access, matching how the protocols name the weeks.
    pub fn week(&self, n: usize) -> &DeviceSeries {
        &self.0[n - 1]
    }

    /// Union of two weeks as one ordered series.
    pub fn pair(&self, a: usize, b: usize) -> DeviceSeries {
        DeviceSeries::concat([self.week(a), self.week(b)])
    }
}

/// Splits a single-period series into three equal-duration slices.
///
/// The span runs from the first to the last record hour inclusive. Its hour
/// count is divided by 3 and the remainder goes to the earliest slices, so a
/// 505 h span yields 169/168/168 h.
pub fn split_weeks(series: &DeviceSeries) -> Result<WeekSlices, DataError> {
    let empty = || DeviceSeries::new(series.device_id.clone(), Vec::new());
    let (Some(first), Some(last)) = (series.first_hour(), series.last_hour()) else {
        return Ok(WeekSlices([empty(), empty(), empty()]));
    };
    let total = (last - first).num_hours() + 1;
    if total < 3 {
        return Err(DataError::TooShort { hours: total });
    }
    let base = total / 3;
    let rem = total % 3;
    let mut bounds = [first; 4];
    for i in 0..3 {
        let len = base + i64::from((i as i64) < rem);
        bounds[i + 1] = bounds[i] + TimeDelta::hours(len);
    }

    let mut out = [empty(), empty(), empty()];
    for r in &series.records {
        let slot = (0..3)
            .find(|&i| r.hour < bounds[i + 1])
            .expect("record lies inside the series span");
        out[slot].records.push(*r);
    }
    Ok(WeekSlices(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AlignedRecord, Features, ReferenceValues};
    use chrono::{TimeZone, Utc};

    fn hourly_series(hours: i64) -> DeviceSeries {
        let t0 = Utc.with_ymd_and_hms(2021, 1, 13, 15, 0, 0).unwrap();
        let records = (0..hours)
            .map(|h| AlignedRecord {
                hour: t0 + TimeDelta::hours(h),
                features: Features::default(),
                coverage: 1.0,
                reference: ReferenceValues { pm25: 1.0, pm10: 1.0 },
            })
            .collect();
        DeviceSeries::new("d", records)
    }

    fn lens(w: &WeekSlices) -> [usize; 3] {
        [w.week(1).len(), w.week(2).len(), w.week(3).len()]
    }

    #[test]
    fn three_full_weeks() {
        assert_eq!(lens(&split_weeks(&hourly_series(504)).unwrap()), [168, 168, 168]);
    }

    #[test]
    fn remainder_goes_to_earliest_slice() {
        assert_eq!(lens(&split_weeks(&hourly_series(505)).unwrap()), [169, 168, 168]);
        assert_eq!(lens(&split_weeks(&hourly_series(506)).unwrap()), [169, 169, 168]);
    }

    #[test]
    fn empty_and_too_short() {
        assert_eq!(lens(&split_weeks(&hourly_series(0)).unwrap()), [0, 0, 0]);
        assert!(matches!(
            split_weeks(&hourly_series(2)),
            Err(DataError::TooShort { hours: 2 })
        ));
    }

    #[test]
    fn gaps_keep_duration_based_bounds() {
        let mut s = hourly_series(9);
        let gap = s.records[4].hour;
        s.records.retain(|r| r.hour != gap);
        let w = split_weeks(&s).unwrap();
        assert_eq!(lens(&w), [3, 2, 3]);
        assert_eq!(w.pair(1, 3).len(), 6);
    }
}
