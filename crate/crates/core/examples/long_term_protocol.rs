//! Long-term protocol: every device subset of each winter batch is trained
//! once and tested in summer on devices outside the batch.

use chrono::{TimeZone, Utc};
use fleetcal::long_term::{enumerate_combinations, run_long_term, LongTermConfig};
use fleetcal::synth::{DeploymentSpec, FleetSpec, LognormalRegime, PeriodSpec, RhRegime};

fn period(name: &str, devices: &[&str], mu: f64, rh: f64) -> PeriodSpec {
    PeriodSpec {
        name: name.into(),
        start: None,
        hours: 336,
        n_devices: 0,
        devices: Some(devices.iter().map(|d| d.to_string()).collect()),
        concentration: LognormalRegime { mu, sigma: 0.6 },
        rh: RhRegime { mean: rh, amplitude: 15.0, noise: 5.0 },
    }
}

fn main() {
    println!("C(10, 2) = {}", enumerate_combinations(&[0; 10], 2).unwrap().len());

    let mut spec = FleetSpec::single_deployment(5, "winter", 1, 1, 24, FleetSpec::identity_law());
    spec.law.sigma_gain = 0.05;
    spec.law.sigma_offset = 1.0;
    spec.law.sigma_noise = 2.0;
    spec.deployments = vec![
        DeploymentSpec {
            name: "winter".into(),
            periods: vec![
                period("batch1", &["301", "302", "303", "304"], 2.8, 75.0),
                period("batch2", &["305", "306", "307", "308"], 2.6, 70.0),
            ],
        },
        DeploymentSpec {
            name: "summer".into(),
            periods: vec![PeriodSpec {
                start: Some(Utc.with_ymd_and_hms(2021, 6, 1, 0, 0, 0).unwrap()),
                ..period("p1", &["301", "302", "305", "306"], 2.1, 50.0)
            }],
        },
    ];
    let fleet = fleetcal::synth::generate_fleet(&spec).unwrap();
    let res = run_long_term(&fleet.dataset, &LongTermConfig::default()).unwrap();

    println!("{} models, {} scored pairs\n", res.models_fitted, res.pairs.len());
    println!("{:<7} {:>2} {:<4} {:>8} {:>8} {:>8}", "batch", "k", "", "q25", "q50", "q75");
    for r in res.global.rows.iter().chain(&res.adhoc.rows) {
        let q = &r.values;
        println!("{:<7} {:>2} {:<4} {:>8.3} {:>8.3} {:>8.3}", r.batch, r.k, r.metric.token(), q[0], q[1], q[2]);
    }
}
