//! Per-period characterization: lognormal fit of the reference and the
//! humidity distribution.

use fleetcal::data::characterize;
use fleetcal::synth::{generate_fleet, FleetSpec};
use fleetcal::PmFraction;

fn main() {
    let fleet = generate_fleet(&FleetSpec::single_deployment(9, "winter", 3, 3, 504, FleetSpec::identity_law())).unwrap();
    let conc_edges = [0.0, 5.0, 10.0, 20.0, 40.0, 80.0, 1000.0];
    let rh_edges: Vec<f64> = (0..=10).map(|i| 10.0 * i as f64).collect();
    for p in &fleet.dataset.deployments[0].periods {
        for fraction in [PmFraction::Pm25, PmFraction::Pm10] {
            let s = characterize(&p.name, &p.devices, fraction, &conc_edges, &rh_edges).unwrap();
            println!(
                "{} {:<5} lognormal(mu {:.3}, sigma {:.3}) over {} h; RH {:.0}/{:.0}/{:.0}/{:.0}/{:.0}",
                s.period,
                fraction.token(),
                s.lognormal_mu,
                s.lognormal_sigma,
                s.n_positive,
                s.rh_min,
                s.rh_q25,
                s.rh_median,
                s.rh_q75,
                s.rh_max
            );
        }
    }
}
