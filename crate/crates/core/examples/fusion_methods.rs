//! Aggregation concatenates every device's rows; median fusion keeps one
//! row per hour that all devices reported.

use fleetcal::fusion::{fuse_aggregate, fuse_median};
use fleetcal::synth::{generate_fleet, FleetSpec};
use fleetcal::Channel;

fn main() {
    let spec = FleetSpec::single_deployment(7, "winter", 1, 5, 168, FleetSpec::identity_law());
    let mut devices = generate_fleet(&spec).unwrap().dataset.deployments.remove(0).periods.remove(0).devices;

    // Knock out a few hours of one device.
    devices[2].records.retain(|r| r.hour.format("%H").to_string() != "03");

    let sizes: Vec<usize> = devices.iter().map(|d| d.len()).collect();
    println!("per-device hours: {sizes:?}");

    let agg = fuse_aggregate(&devices, Channel::pm25()).unwrap();
    println!("aggregate: {} rows over {} distinct hours", agg.len(), agg.hours_covered);

    let med = fuse_median(&devices, Channel::pm25()).unwrap();
    println!("median:    {} rows, {} hours dropped", med.len(), med.dropped_hours);
    let first = med.rows[0];
    println!(
        "first median row: pm' = {:.3}, rh = {:.2}, target = {:.3}",
        first.pm_vendor, first.rh, first.target
    );
}
