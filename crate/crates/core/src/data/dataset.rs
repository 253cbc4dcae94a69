use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::Serialize;

use super::{partition, DataError, DeploymentLayout, DeviceSeries, PeriodKey};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodData {
    pub name: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    /// Member devices with data in this period, in layout order.
    pub devices: Vec<DeviceSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeploymentData {
    pub name: String,
    pub periods: Vec<PeriodData>,
}

impl DeploymentData {
    pub fn device_count(&self) -> usize {
        self.periods.iter().map(|p| p.devices.len()).sum()
    }

    /// All of a device's records in this deployment, across periods.
    pub fn device(&self, id: &str) -> Option<DeviceSeries> {
        let parts: Vec<&DeviceSeries> = self
            .periods
            .iter()
            .flat_map(|p| p.devices.iter())
            .filter(|d| d.device_id == id)
            .collect();
        (!parts.is_empty()).then(|| DeviceSeries::concat(parts))
    }

    pub fn device_ids(&self) -> impl Iterator<Item = &str> {
        self.periods
            .iter()
            .flat_map(|p| p.devices.iter().map(|d| d.device_id.as_str()))
    }
}

/// Aligned device data organized by deployment and period.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Dataset {
    pub deployments: Vec<DeploymentData>,
}

impl Dataset {
    /// Partitions aligned series over the layout.
    ///
    /// A device's records are kept for a period only if the layout lists the
    /// device as a member of that period; everything else is discarded and
    /// counted. Returns the dataset and the number of discarded records.
    pub fn assemble(
        layout: &DeploymentLayout,
        series: &[DeviceSeries],
    ) -> Result<(Dataset, usize), DataError> {
        layout.validate()?;
        let mut pool: BTreeMap<(PeriodKey, String), DeviceSeries> = BTreeMap::new();
        let mut discarded = 0;
        for s in series {
            let parts = partition(s, layout);
            discarded += parts.discarded;
            for (key, part) in parts.by_period {
                let member = layout
                    .period(&key)
                    .is_some_and(|p| p.devices.contains(&s.device_id));
                if !member {
                    discarded += part.len();
                    continue;
                }
                let slot = pool
                    .entry((key, s.device_id.clone()))
                    .or_insert_with(|| DeviceSeries::new(s.device_id.clone(), Vec::new()));
                slot.records.extend(part.records);
            }
        }

        let mut deployments = Vec::new();
        for d in &layout.deployments {
            let mut periods = Vec::new();
            for (i, p) in d.periods.iter().enumerate() {
                let key = PeriodKey {
                    deployment: d.name.clone(),
                    period: i,
                };
                let mut devices = Vec::new();
                for id in &p.devices {
                    match pool.remove(&(key.clone(), id.clone())) {
                        Some(mut s) => {
                            s.records.sort_by_key(|r| r.hour);
                            s.records.dedup_by_key(|r| r.hour);
                            devices.push(s);
                        }
                        None => log::warn!("device {id} has no data in {key}"),
                    }
                }
                periods.push(PeriodData {
                    name: p.name.clone(),
                    start: p.start,
                    end: p.end,
                    devices,
                });
            }
            deployments.push(DeploymentData {
                name: d.name.clone(),
                periods,
            });
        }
        Ok((Dataset { deployments }, discarded))
    }

    pub fn deployment(&self, name: &str) -> Option<&DeploymentData> {
        self.deployments.iter().find(|d| d.name == name)
    }
}
