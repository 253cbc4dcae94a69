//! Synthetic colocation fleets with known ground truth.
//!
//! The reference concentration follows a lognormal AR(1) process, RH a daily
//! sinusoid plus noise. Device `i` reports
//!
//! ```text
//! PM'(t) = g_i * C(t) + κ * RH(t) + o_i + ε(t),   ε ~ N(0, σ_noise)
//! ```
//!
//! floored at zero, so the calibration law with `(a, b, c) = (1/g_i, -κ/g_i,
//! -o_i/g_i)` is the exact inverse when `ε = 0`. Samples are hourly.

use std::collections::BTreeMap;

use chrono::{DateTime, TimeDelta, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{CalibrationModel, ModelKind, Provenance};
use crate::data::{
    AlignedRecord, Channel, Dataset, Deployment, DeploymentLayout, DeviceSeries, Features, Period,
    PmFraction, RawSample, ReferenceValues, BIN_COUNT,
};
use crate::metrics::{evaluate, MetricError, PerformanceRecord};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid fleet spec: {0}")]
    InvalidSpec(String),
    #[error("ground truth does not match the test data: {0}")]
    SpecMismatch(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalRegime {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhRegime {
    pub mean: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub name: String,
    /// Defaults to the end of the previous period, or the fleet start.
    #[serde(default)]
    pub start: Option<DateTime<Utc>>,
    pub hours: usize,
    /// Number of devices, taken in fleet order after the previous period's.
    #[serde(default)]
    pub n_devices: usize,
    /// Explicit device ids; overrides `n_devices`.
    #[serde(default)]
    pub devices: Option<Vec<String>>,
    pub concentration: LognormalRegime,
    pub rh: RhRegime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentSpec {
    pub name: String,
    pub periods: Vec<PeriodSpec>,
}

/// Parameters shared by all devices of the fleet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceLaw {
    pub sigma_gain: f64,
    pub sigma_offset: f64,
    /// RH interference, µg/m³ per %RH.
    pub rh_coefficient: f64,
    pub sigma_noise: f64,
    /// Optional hygroscopic-growth-like distortion: the device sees
    /// `C * (1 + h * (RH/100)²)`. Zero keeps the law linear; nonzero values
    /// fall outside the model class of the calibration law.
    pub rh_nonlinearity: f64,
}

impl Default for DeviceLaw {
    fn default() -> Self {
        Self {
            sigma_gain: 0.05,
            sigma_offset: 1.0,
            rh_coefficient: 0.05,
            sigma_noise: 2.0,
            rh_nonlinearity: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSpec {
    /// Required; there is no ambient entropy.
    pub seed: Option<u64>,
    #[serde(default = "default_start")]
    pub start: DateTime<Utc>,
    #[serde(default = "default_first_id")]
    pub first_device_id: u32,
    #[serde(default = "default_phi")]
    pub autocorrelation: f64,
    /// Reference PM10 over PM2.5.
    #[serde(default = "default_pm10_ratio")]
    pub pm10_ratio: f64,
    #[serde(default)]
    pub law: DeviceLaw,
    pub deployments: Vec<DeploymentSpec>,
}

fn default_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 1, 13, 0, 0, 0).unwrap()
}

fn default_first_id() -> u32 {
    301
}

fn default_phi() -> f64 {
    0.95
}

fn default_pm10_ratio() -> f64 {
    1.6
}

impl FleetSpec {
    /// One deployment of `n_periods` consecutive periods, each with its own
    /// `devices_per_period` devices and `hours` hours.
    pub fn single_deployment(
        seed: u64,
        name: &str,
        n_periods: usize,
        devices_per_period: usize,
        hours: usize,
        law: DeviceLaw,
    ) -> Self {
        Self {
            seed: Some(seed),
            start: default_start(),
            first_device_id: default_first_id(),
            autocorrelation: default_phi(),
            pm10_ratio: default_pm10_ratio(),
            law,
            deployments: vec![DeploymentSpec {
                name: name.to_string(),
                periods: (1..=n_periods)
                    .map(|i| PeriodSpec {
                        name: format!("p{i}"),
                        start: None,
                        hours,
                        n_devices: devices_per_period,
                        devices: None,
                        concentration: LognormalRegime { mu: 2.5, sigma: 0.6 },
                        rh: RhRegime {
                            mean: 70.0,
                            amplitude: 15.0,
                            noise: 5.0,
                        },
                    })
                    .collect(),
            }],
        }
    }

    /// A law with no fabrication variance, interference or noise.
    pub fn identity_law() -> DeviceLaw {
        DeviceLaw {
            sigma_gain: 0.0,
            sigma_offset: 0.0,
            rh_coefficient: 0.0,
            sigma_noise: 0.0,
            rh_nonlinearity: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.seed.is_none() {
            return bad("an explicit seed is required".into());
        }
        let l = &self.law;
        for (name, v) in [
            ("sigma_gain", l.sigma_gain),
            ("sigma_offset", l.sigma_offset),
            ("sigma_noise", l.sigma_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.autocorrelation >= 0.0 && self.autocorrelation < 1.0) {
            return bad(format!("autocorrelation must lie in [0, 1), got {}", self.autocorrelation));
        }
        if !(self.pm10_ratio >= 1.0) {
            return bad("pm10_ratio must be at least 1".into());
        }
        if self.deployments.is_empty() {
            return bad("no deployments".into());
        }
        for d in &self.deployments {
            for p in &d.periods {
                if p.hours < 3 {
                    return bad(format!("{}/{}: duration {} h is below 3 h", d.name, p.name, p.hours));
                }
                if !(p.concentration.sigma >= 0.0) || !(p.rh.noise >= 0.0) {
                    return bad(format!("{}/{}: negative spread", d.name, p.name));
                }
            }
        }
        Ok(())
    }
}

/// True parameters of one device and the exact inverse law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTruth {
    pub device_id: String,
    pub gain: f64,
    pub offset: f64,
    pub rh_coefficient: f64,
    /// `(1/g, -κ/g, -o/g)`.
    pub inverse: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub law: DeviceLaw,
    pub devices: Vec<DeviceTruth>,
}

impl GroundTruth {
    pub fn device(&self, id: &str) -> Option<&DeviceTruth> {
        self.devices.iter().find(|d| d.device_id == id)
    }

    /// The exact inverse law of one device for `fraction`.
    pub fn inverse_model(&self, id: &str, fraction: PmFraction) -> Option<CalibrationModel> {
        let d = self.device(id)?;
        let [a, b, c] = d.inverse;
        Some(CalibrationModel {
            fraction,
            a,
            b,
            c,
            kind: ModelKind::Adhoc,
            trained_on: Provenance {
                devices: vec![id.to_string()],
                ..Provenance::default()
            },
        })
    }
}

pub struct SyntheticFleet {
    pub layout: DeploymentLayout,
    pub reference: BTreeMap<DateTime<Utc>, ReferenceValues>,
    /// Hourly raw samples per device, all deployments together.
    pub samples: BTreeMap<String, Vec<RawSample>>,
    /// The same samples aligned with the reference and partitioned.
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

const PARAMS_STREAM: u64 = 0;
const REFERENCE_STREAM_BASE: u64 = 1 << 32;
const DEVICE_STREAM_BASE: u64 = 1 << 48;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

struct PlannedPeriod {
    start: DateTime<Utc>,
    spec: PeriodSpec,
    devices: Vec<String>,
}

fn plan(spec: &FleetSpec) -> Result<Vec<(String, Vec<PlannedPeriod>)>, SynthError> {
    let mut cursor = spec.start;
    let mut out = Vec::new();
    for d in &spec.deployments {
        let mut next_device = 0u32;
        let mut periods = Vec::new();
        for p in &d.periods {
            let start = p.start.unwrap_or(cursor);
            if start < cursor {
                return Err(SynthError::InvalidSpec(format!(
                    "{}/{} starts before the previous period ends",
                    d.name, p.name
                )));
            }
            cursor = start + TimeDelta::hours(p.hours as i64);
            let devices = match &p.devices {
                Some(ids) => ids.clone(),
                None => {
                    let ids = (0..p.n_devices as u32)
                        .map(|i| (spec.first_device_id + next_device + i).to_string())
                        .collect();
                    next_device += p.n_devices as u32;
                    ids
                }
            };
            periods.push(PlannedPeriod {
                start,
                spec: p.clone(),
                devices,
            });
        }
        out.push((d.name.clone(), periods));
    }
    Ok(out)
}

/// Generates the fleet. Deterministic for a given spec.
pub fn generate_fleet(spec: &FleetSpec) -> Result<SyntheticFleet, SynthError> {
    spec.validate()?;
    let seed = spec.seed.expect("validated");
    let planned = plan(spec)?;

    let mut ids: Vec<String> = planned
        .iter()
        .flat_map(|(_, ps)| ps.iter().flat_map(|p| p.devices.iter().cloned()))
        .collect();
    ids.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    ids.dedup();

    let law = spec.law;
    let mut params = stream(seed, PARAMS_STREAM);
    let devices: Vec<DeviceTruth> = ids
        .iter()
        .map(|id| {
            let gain = 1.0 + law.sigma_gain * normal(&mut params);
            let offset = law.sigma_offset * normal(&mut params);
            DeviceTruth {
                device_id: id.clone(),
                gain,
                offset,
                rh_coefficient: law.rh_coefficient,
                inverse: [1.0 / gain, -law.rh_coefficient / gain, -offset / gain],
            }
        })
        .collect();
    if let Some(d) = devices.iter().find(|d| !(d.gain > 0.0)) {
        return Err(SynthError::InvalidSpec(format!(
            "device {} drew a non-positive gain; lower sigma_gain",
            d.device_id
        )));
    }
    let truth_of: BTreeMap<&str, &DeviceTruth> = devices.iter().map(|d| (d.device_id.as_str(), d)).collect();

    let phi = spec.autocorrelation;
    let innovation = (1.0 - phi * phi).sqrt();
    let mut reference = BTreeMap::new();
    let mut samples: BTreeMap<String, Vec<RawSample>> = BTreeMap::new();
    let mut layout = DeploymentLayout::default();
    let mut period_index = 0u64;

    for (dep_name, periods) in &planned {
        let mut deployment = Deployment {
            name: dep_name.clone(),
            periods: Vec::new(),
        };
        for p in periods {
            let regime = p.spec.concentration;
            let rh_regime = p.spec.rh;
            let mut rng = stream(seed, REFERENCE_STREAM_BASE + period_index);
            let mut x = regime.mu + regime.sigma * normal(&mut rng);
            let mut hours = Vec::with_capacity(p.spec.hours);
            for h in 0..p.spec.hours {
                if h > 0 {
                    x = regime.mu + phi * (x - regime.mu) + regime.sigma * innovation * normal(&mut rng);
                }
                let hour = p.start + TimeDelta::hours(h as i64);
                let phase = 2.0 * std::f64::consts::PI * (h % 24) as f64 / 24.0;
                let rh = (rh_regime.mean + rh_regime.amplitude * phase.sin() + rh_regime.noise * normal(&mut rng))
                    .clamp(0.0, 100.0);
                let pm25 = x.exp();
                let temperature = 15.0 + 5.0 * (phase - 1.0).sin();
                reference.insert(
                    hour,
                    ReferenceValues {
                        pm25,
                        pm10: pm25 * spec.pm10_ratio,
                    },
                );
                hours.push((hour, pm25, rh, temperature));
            }

            for (i, id) in p.devices.iter().enumerate() {
                let t = truth_of[id.as_str()];
                let mut rng = stream(seed, DEVICE_STREAM_BASE + (period_index << 16) + i as u64);
                let out = samples.entry(id.clone()).or_default();
                for &(hour, pm25, rh, temperature) in &hours {
                    let seen = 1.0 + law.rh_nonlinearity * (rh / 100.0).powi(2);
                    let mut read = |c: f64| {
                        (t.gain * c * seen + law.rh_coefficient * rh + t.offset
                            + law.sigma_noise * normal(&mut rng))
                        .max(0.0)
                    };
                    let v25 = read(pm25);
                    let v10 = read(pm25 * spec.pm10_ratio);
                    let v1 = read(pm25 * 0.7);
                    let pm = [v1, v25, v10];
                    out.push(RawSample {
                        timestamp: hour,
                        features: Features {
                            bin_counts: bin_counts(pm),
                            pm_standard: pm,
                            pm_atmospheric: pm,
                            temperature,
                            rh,
                        },
                    });
                }
            }
            deployment.periods.push(Period {
                name: p.spec.name.clone(),
                start: p.start,
                end: p.start + TimeDelta::hours(p.spec.hours as i64),
                devices: p.devices.clone(),
            });
            period_index += 1;
        }
        layout.deployments.push(deployment);
    }
    for s in samples.values_mut() {
        s.sort_by_key(|r| r.timestamp);
    }

    let series: Vec<DeviceSeries> = samples
        .iter()
        .map(|(id, raw)| {
            let records = raw
                .iter()
                .map(|s| AlignedRecord {
                    hour: s.timestamp,
                    features: s.features,
                    coverage: 1.0,
                    reference: reference[&s.timestamp],
                })
                .collect();
            DeviceSeries::new(id.clone(), records)
        })
        .collect();
    let (dataset, _) = Dataset::assemble(&layout, &series)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;

    Ok(SyntheticFleet {
        layout,
        reference,
        samples,
        dataset,
        truth: GroundTruth {
            seed,
            law,
            devices,
        },
    })
}

/// Plausible cumulative particle counts per 0.1 L for the given PM1, PM2.5,
/// PM10 readings. They do not enter the calibration law.
fn bin_counts(pm: [f64; 3]) -> [f64; BIN_COUNT] {
    let [pm1, pm25, pm10] = pm;
    [
        pm1 * 120.0 + pm25 * 30.0,
        pm1 * 40.0 + pm25 * 10.0,
        pm1 * 8.0,
        pm25 * 1.5,
        pm10 * 0.2,
        pm10 * 0.05,
    ]
}

/// Best achievable score per test device: its exact inverse law.
pub fn oracle_scores(
    truth: &GroundTruth,
    test: &[DeviceSeries],
    channel: Channel,
) -> Result<Vec<(String, PerformanceRecord)>, SynthError> {
    if truth.law.rh_nonlinearity != 0.0 {
        return Err(SynthError::SpecMismatch(
            "the nonlinear RH response has no exact linear inverse".into(),
        ));
    }
    test.iter()
        .map(|s| {
            let model = truth
                .inverse_model(&s.device_id, channel.fraction)
                .ok_or_else(|| SynthError::SpecMismatch(format!("unknown device {}", s.device_id)))?;
            Ok((s.device_id.clone(), evaluate(&model, s, channel)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(law: DeviceLaw) -> FleetSpec {
        FleetSpec::single_deployment(11, "winter", 2, 2, 72, law)
    }

    #[test]
    fn identity_fleet_reads_the_reference() {
        let fleet = generate_fleet(&small(FleetSpec::identity_law())).unwrap();
        for d in &fleet.dataset.deployments[0].periods[0].devices {
            for r in &d.records {
                assert_eq!(r.features.pm_atmospheric[1], r.reference.pm25);
                assert_eq!(r.features.pm_atmospheric[2], r.reference.pm10);
            }
        }
        assert!(fleet.truth.devices.iter().all(|d| d.gain == 1.0 && d.offset == 0.0));
    }

    #[test]
    fn ids_layout_and_counts() {
        let fleet = generate_fleet(&small(DeviceLaw::default())).unwrap();
        assert_eq!(fleet.samples.keys().collect::<Vec<_>>(), ["301", "302", "303", "304"]);
        assert!(fleet.samples.values().all(|s| s.len() == 72));
        assert_eq!(fleet.reference.len(), 144);
        assert_eq!(fleet.layout.deployments[0].periods[1].devices, ["303", "304"]);
        fleet.layout.validate().unwrap();
    }

    #[test]
    fn seed_is_required_and_determines_output() {
        let mut spec = small(DeviceLaw::default());
        let a = generate_fleet(&spec).unwrap();
        let b = generate_fleet(&spec).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.truth, b.truth);
        spec.seed = Some(12);
        assert_ne!(generate_fleet(&spec).unwrap().samples, a.samples);
        spec.seed = None;
        assert!(matches!(generate_fleet(&spec), Err(SynthError::InvalidSpec(_))));
    }

    #[test]
    fn ranges() {
        let fleet = generate_fleet(&small(DeviceLaw::default())).unwrap();
        assert!(fleet.reference.values().all(|r| r.pm25 > 0.0));
        for s in fleet.samples.values().flatten() {
            assert!((0.0..=100.0).contains(&s.features.rh));
            assert!(s.features.pm_atmospheric.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn invalid_specs() {
        let mut spec = small(DeviceLaw::default());
        spec.law.sigma_noise = -1.0;
        assert!(generate_fleet(&spec).is_err());
        let mut spec = small(DeviceLaw::default());
        spec.deployments[0].periods[0].hours = 2;
        assert!(generate_fleet(&spec).is_err());
    }
}
