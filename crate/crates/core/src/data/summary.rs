use std::collections::BTreeMap;

use serde::Serialize;

use super::{DataError, DeviceSeries, PmFraction};
use crate::stats::quantiles;

/// Two-dimensional histogram of (reference concentration, RH) device-hours.
///
/// Bins are `[lo, hi)` except the last one on each axis, which is closed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointHistogram {
    pub concentration_edges: Vec<f64>,
    pub rh_edges: Vec<f64>,
    /// `counts[i][j]` for concentration bin `i` and RH bin `j`.
    pub counts: Vec<Vec<u64>>,
    /// Pairs falling outside the edges.
    pub outside: u64,
}

fn bin_of(edges: &[f64], v: f64) -> Option<usize> {
    let (&lo, &hi) = (edges.first()?, edges.last()?);
    if v < lo || v > hi {
        return None;
    }
    Some(edges.partition_point(|&e| e <= v).saturating_sub(1).min(edges.len() - 2))
}

impl JointHistogram {
    pub fn new(concentration_edges: Vec<f64>, rh_edges: Vec<f64>) -> Self {
        assert!(concentration_edges.len() >= 2 && rh_edges.len() >= 2, "need at least one bin per axis");
        assert!(
            concentration_edges.windows(2).all(|w| w[0] < w[1]) && rh_edges.windows(2).all(|w| w[0] < w[1]),
            "bin edges must be strictly increasing"
        );
        let counts = vec![vec![0; rh_edges.len() - 1]; concentration_edges.len() - 1];
        Self {
            concentration_edges,
            rh_edges,
            counts,
            outside: 0,
        }
    }

    pub fn add(&mut self, concentration: f64, rh: f64) {
        match (bin_of(&self.concentration_edges, concentration), bin_of(&self.rh_edges, rh)) {
            (Some(i), Some(j)) => self.counts[i][j] += 1,
            _ => self.outside += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum::<u64>() + self.outside
    }
}

/// Concentration and humidity regime of one (period, fraction) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodSummary {
    pub period: String,
    pub fraction: PmFraction,
    /// Strictly positive reference hours used by the lognormal fit.
    pub n_positive: usize,
    /// Reference hours left out of the fit because they are not positive.
    pub n_excluded: usize,
    /// Maximum-likelihood lognormal parameters: mean and population standard
    /// deviation of `ln(concentration)`.
    pub lognormal_mu: f64,
    pub lognormal_sigma: f64,
    pub rh_min: f64,
    pub rh_q25: f64,
    pub rh_median: f64,
    pub rh_q75: f64,
    pub rh_max: f64,
    pub histogram: JointHistogram,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DatasetSummary {
    pub periods: Vec<PeriodSummary>,
}

/// Characterizes the devices colocated during one period.
///
/// Reference concentrations are taken once per hour (all devices share the
/// analyzer); RH and the joint histogram use every device-hour.
pub fn characterize(
    period: &str,
    devices: &[DeviceSeries],
    fraction: PmFraction,
    concentration_edges: &[f64],
    rh_edges: &[f64],
) -> Result<PeriodSummary, DataError> {
    let mut per_hour = BTreeMap::new();
    let mut rh = Vec::new();
    let mut histogram = JointHistogram::new(concentration_edges.to_vec(), rh_edges.to_vec());
    for d in devices {
        for r in &d.records {
            let Some(c) = r.reference.get(fraction) else {
                continue;
            };
            per_hour.insert(r.hour, c);
            rh.push(r.features.rh);
            histogram.add(c, r.features.rh);
        }
    }

    let logs: Vec<f64> = per_hour.values().filter(|&&c| c > 0.0).map(|c| c.ln()).collect();
    if logs.len() < 3 {
        return Err(DataError::InsufficientData { positive: logs.len() });
    }
    let n = logs.len() as f64;
    let mu = logs.iter().sum::<f64>() / n;
    let sigma = (logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n).sqrt();

    let q = quantiles(&rh, &[0.25, 0.5, 0.75]).expect("rh is non-empty when concentrations are");
    let (rh_min, rh_max) = rh
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));

    Ok(PeriodSummary {
        period: period.to_string(),
        fraction,
        n_positive: logs.len(),
        n_excluded: per_hour.len() - logs.len(),
        lognormal_mu: mu,
        lognormal_sigma: sigma,
        rh_min,
        rh_q25: q[0],
        rh_median: q[1],
        rh_q75: q[2],
        rh_max,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AlignedRecord, Features, ReferenceValues};
    use chrono::{TimeDelta, TimeZone, Utc};

    fn series(values: &[(f64, f64)]) -> DeviceSeries {
        let t0 = Utc.with_ymd_and_hms(2021, 1, 13, 15, 0, 0).unwrap();
        let records = values
            .iter()
            .enumerate()
            .map(|(i, &(c, rh))| AlignedRecord {
                hour: t0 + TimeDelta::hours(i as i64),
                features: Features {
                    rh,
                    ..Features::default()
                },
                coverage: 1.0,
                reference: ReferenceValues { pm25: c, pm10: c },
            })
            .collect();
        DeviceSeries::new("d", records)
    }

    const CONC: [f64; 3] = [0.0, 10.0, 100.0];
    const RH: [f64; 3] = [0.0, 50.0, 100.0];

    #[test]
    fn degenerate_lognormal() {
        let e2 = 2f64.exp();
        let s = series(&[(e2, 30.0), (e2, 40.0), (e2, 50.0), (e2, 60.0), (e2, 70.0)]);
        let sum = characterize("p1", &[s], PmFraction::Pm25, &CONC, &RH).unwrap();
        assert!((sum.lognormal_mu - 2.0).abs() < 1e-12);
        assert!(sum.lognormal_sigma.abs() < 1e-12);
        assert_eq!((sum.rh_q25, sum.rh_median, sum.rh_q75), (40.0, 50.0, 60.0));
        assert_eq!((sum.rh_min, sum.rh_max), (30.0, 70.0));
    }

    #[test]
    fn zero_concentration_is_excluded_from_the_fit() {
        let s = series(&[(0.0, 50.0), (1.0, 50.0), (2.0, 50.0), (4.0, 50.0)]);
        let sum = characterize("p1", &[s], PmFraction::Pm25, &CONC, &RH).unwrap();
        assert_eq!(sum.n_excluded, 1);
        assert_eq!(sum.n_positive, 3);
        assert!((sum.lognormal_mu - (8f64.ln() / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn too_few_positive_values() {
        let s = series(&[(0.0, 50.0), (1.0, 50.0), (2.0, 50.0)]);
        let err = characterize("p1", &[s], PmFraction::Pm25, &CONC, &RH).unwrap_err();
        assert!(matches!(err, DataError::InsufficientData { positive: 2 }));
    }

    #[test]
    fn histogram_bins() {
        let s = series(&[(5.0, 20.0), (10.0, 50.0), (100.0, 100.0), (150.0, 10.0)]);
        let sum = characterize("p1", &[s], PmFraction::Pm25, &CONC, &RH).unwrap();
        let h = &sum.histogram;
        assert_eq!(h.counts, vec![vec![1, 0], vec![0, 2]]);
        assert_eq!(h.outside, 1);
        assert_eq!(h.total(), 4);
    }
}
