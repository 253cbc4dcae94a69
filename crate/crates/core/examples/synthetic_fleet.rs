//! Generates a small synthetic fleet and prints each device's hidden law
//! next to the exact inverse a perfect calibration would recover.

use fleetcal::synth::{generate_fleet, DeviceLaw, FleetSpec};
use fleetcal::PmFraction;

fn main() {
    let law = DeviceLaw {
        sigma_gain: 0.05,
        sigma_offset: 1.0,
        rh_coefficient: 0.05,
        sigma_noise: 2.0,
        rh_nonlinearity: 0.0,
    };
    let spec = FleetSpec::single_deployment(42, "winter", 3, 4, 504, law);
    let fleet = generate_fleet(&spec).expect("valid spec");

    println!("{} devices, {} reference hours", fleet.samples.len(), fleet.reference.len());
    for p in &fleet.dataset.deployments[0].periods {
        let ids: Vec<&str> = p.devices.iter().map(|d| d.device_id.as_str()).collect();
        println!("  period {}: {} .. {}  devices {:?}", p.name, p.start, p.end, ids);
    }

    println!("\n{:>6} {:>8} {:>8} {:>8}   inverse (a, b, c)", "device", "gain", "offset", "kappa");
    for d in &fleet.truth.devices {
        let inv = fleet.truth.inverse_model(&d.device_id, PmFraction::Pm25).expect("known device");
        println!(
            "{:>6} {:>8.4} {:>8.4} {:>8.4}   ({:.4}, {:.4}, {:.4})",
            d.device_id, d.gain, d.offset, d.rh_coefficient, inv.a, inv.b, inv.c
        );
    }
}
