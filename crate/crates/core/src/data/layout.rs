use std::collections::{BTreeMap, HashSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{DataError, DeviceSeries};

/// One colocation period: a batch of devices sharing `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub name: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    #[serde(default)]
    pub devices: Vec<String>,
}

impl Period {
    /// Half-open membership: a record at `end` belongs to the next period.
    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deployment {
    pub name: String,
    pub periods: Vec<Period>,
}

/// Named seasons, each an ordered list of colocation periods.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DeploymentLayout {
    pub deployments: Vec<Deployment>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PeriodKey {
    pub deployment: String,
    /// Zero-based index into the deployment's periods.
    pub period: usize,
}

impl fmt::Display for PeriodKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/p{}", self.deployment, self.period + 1)
    }
}

impl DeploymentLayout {
    /// Checks period ordering, overlap and device membership.
    ///
    /// Periods must not overlap anywhere in the layout (also across
    /// deployments), so every instant maps to at most one period.
    pub fn validate(&self) -> Result<(), DataError> {
        let mut names = HashSet::new();
        let mut all: Vec<(&str, &Period)> = Vec::new();
        for d in &self.deployments {
            if !names.insert(d.name.as_str()) {
                return Err(DataError::InvalidLayout(format!("duplicate deployment `{}`", d.name)));
            }
            let mut members = HashSet::new();
            for p in &d.periods {
                if p.end <= p.start {
                    return Err(DataError::InvalidLayout(format!(
                        "{}/{}: end is not after start",
                        d.name, p.name
                    )));
                }
                for dev in &p.devices {
                    if !members.insert(dev.as_str()) {
                        return Err(DataError::InvalidLayout(format!(
                            "device `{dev}` appears in more than one period of `{}`",
                            d.name
                        )));
                    }
                }
                all.push((d.name.as_str(), p));
            }
        }
        all.sort_by_key(|(_, p)| p.start);
        for w in all.windows(2) {
            if w[1].1.start < w[0].1.end {
                return Err(DataError::InvalidLayout(format!(
                    "periods {}/{} and {}/{} overlap",
                    w[0].0, w[0].1.name, w[1].0, w[1].1.name
                )));
            }
        }
        Ok(())
    }

    pub fn deployment(&self, name: &str) -> Option<&Deployment> {
        self.deployments.iter().find(|d| d.name == name)
    }

    pub fn period(&self, key: &PeriodKey) -> Option<&Period> {
        self.deployment(&key.deployment)?.periods.get(key.period)
    }

    pub fn locate(&self, t: DateTime<Utc>) -> Option<PeriodKey> {
        self.deployments.iter().find_map(|d| {
            d.periods.iter().position(|p| p.contains(t)).map(|period| PeriodKey {
                deployment: d.name.clone(),
                period,
            })
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Partitioned {
    pub by_period: BTreeMap<PeriodKey, DeviceSeries>,
    /// Records outside every period.
    pub discarded: usize,
}

/// Assigns every record of `series` to the period containing its hour.
pub fn partition(series: &DeviceSeries, layout: &DeploymentLayout) -> Partitioned {
    let mut out = Partitioned::default();
    for r in &series.records {
        match layout.locate(r.hour) {
            Some(key) => out
                .by_period
                .entry(key)
                .or_insert_with(|| DeviceSeries::new(series.device_id.clone(), Vec::new()))
                .records
                .push(*r),
            None => out.discarded += 1,
        }
    }
    out
}
