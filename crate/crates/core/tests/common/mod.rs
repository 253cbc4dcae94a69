#![allow(dead_code)]

use std::path::Path;

use chrono::{DateTime, TimeZone, Utc};
use fleetcal::synth::{DeploymentSpec, DeviceLaw, FleetSpec, LognormalRegime, PeriodSpec, RhRegime};

/// Seed used by every fixture; chosen before any result was seen.
pub const SEED: u64 = 20211213;

pub fn noisy_law() -> DeviceLaw {
    DeviceLaw {
        sigma_gain: 0.05,
        sigma_offset: 1.0,
        rh_coefficient: 0.05,
        sigma_noise: 2.0,
        rh_nonlinearity: 0.0,
    }
}

/// Three consecutive periods of `per_period` devices each.
pub fn short_fleet(law: DeviceLaw, per_period: usize, hours: usize) -> FleetSpec {
    FleetSpec::single_deployment(SEED, "winter", 3, per_period, hours, law)
}

pub fn period(name: &str, start: Option<DateTime<Utc>>, hours: usize, devices: &[u32], mu: f64, rh: f64) -> PeriodSpec {
    PeriodSpec {
        name: name.into(),
        start,
        hours,
        n_devices: 0,
        devices: Some(devices.iter().map(|d| d.to_string()).collect()),
        concentration: LognormalRegime { mu, sigma: 0.6 },
        rh: RhRegime {
            mean: rh,
            amplitude: 15.0,
            noise: 5.0,
        },
    }
}

/// Winter: batches 301-304, 305-308, 309-311. Summer: 301-304 only, so the
/// first batch has no eligible test device.
pub fn two_season_fleet(hours: usize) -> FleetSpec {
    let summer_start = Utc.with_ymd_and_hms(2021, 6, 1, 0, 0, 0).unwrap();
    FleetSpec {
        seed: Some(SEED),
        start: Utc.with_ymd_and_hms(2021, 1, 13, 0, 0, 0).unwrap(),
        first_device_id: 301,
        autocorrelation: 0.95,
        pm10_ratio: 1.6,
        law: noisy_law(),
        deployments: vec![
            DeploymentSpec {
                name: "winter".into(),
                periods: vec![
                    period("p1", None, hours, &[301, 302, 303, 304], 2.8, 75.0),
                    period("p2", None, hours, &[305, 306, 307, 308], 2.6, 70.0),
                    period("p3", None, hours, &[309, 310, 311], 2.7, 72.0),
                ],
            },
            DeploymentSpec {
                name: "summer".into(),
                periods: vec![
                    period("p1", Some(summer_start), hours, &[301, 302], 2.2, 55.0),
                    period("p2", None, hours, &[303, 304], 2.1, 50.0),
                ],
            },
        ],
    }
}

pub fn write_spec(dir: &Path, spec: &FleetSpec) -> std::path::PathBuf {
    let path = dir.join("fleet.json");
    std::fs::write(&path, serde_json::to_string_pretty(spec).unwrap()).unwrap();
    path
}

/// Runs the command line in-process and returns the exit code.
pub fn fleetcal(args: &[&str]) -> i32 {
    let mut full = vec!["fleetcal"];
    full.extend_from_slice(args);
    fleetcal::cli::main_with(full)
}

/// Adds `[short]`/`[long]` overrides to a generated run config.
pub fn append_config(path: &Path, extra: &str) {
    let mut text = std::fs::read_to_string(path).unwrap();
    let mut doc: toml::Table = text.parse().unwrap();
    let add: toml::Table = extra.parse().unwrap();
    for (k, v) in add {
        match (doc.get_mut(&k), v) {
            (Some(toml::Value::Table(t)), toml::Value::Table(a)) => t.extend(a),
            (_, v) => {
                doc.insert(k, v);
            }
        }
    }
    text = toml::to_string(&doc).unwrap();
    std::fs::write(path, text).unwrap();
}
