//! Fits one global law on pooled devices and compares it with each device's
//! own law and with the vendor calibration on a held-out week.

use fleetcal::data::split_weeks;
use fleetcal::fusion::fuse;
use fleetcal::synth::{generate_fleet, DeviceLaw, FleetSpec};
use fleetcal::{evaluate, fit_mlr, vendor_baseline, Channel, FusionKind, PmFraction};

fn main() {
    let law = DeviceLaw {
        sigma_gain: 0.05,
        sigma_offset: 1.0,
        rh_coefficient: 0.05,
        sigma_noise: 2.0,
        rh_nonlinearity: 0.0,
    };
    let spec = FleetSpec::single_deployment(3, "winter", 2, 6, 504, law);
    let fleet = generate_fleet(&spec).unwrap();
    let periods = &fleet.dataset.deployments[0].periods;
    let channel = Channel::pm25();

    // Global model: weeks 1-2 of every device in the first period.
    let train: Vec<_> = periods[0].devices.iter().map(|d| split_weeks(d).unwrap().pair(1, 2)).collect();
    for kind in [FusionKind::Aggregate, FusionKind::Median] {
        let set = fuse(&train, channel, kind).unwrap();
        let m = fit_mlr(&set).unwrap();
        println!("{:>9}: C = {:.4} PM' {:+.4} RH {:+.4}  ({} rows)", kind.to_string(), m.a, m.b, m.c, set.len());
    }
    let global = fit_mlr(&fuse(&train, channel, FusionKind::Aggregate).unwrap()).unwrap();
    let vendor = vendor_baseline(PmFraction::Pm25);

    println!("\nweek-3 MAE on devices the global model never saw:");
    println!("{:>6} {:>8} {:>8} {:>8}", "device", "global", "ad-hoc", "vendor");
    for d in &periods[1].devices {
        let w = split_weeks(d).unwrap();
        let own = fit_mlr(&fuse(&[w.pair(1, 2)], channel, FusionKind::Aggregate).unwrap()).unwrap();
        let test = w.week(3);
        println!(
            "{:>6} {:>8.3} {:>8.3} {:>8.3}",
            d.device_id,
            evaluate(&global, test, channel).unwrap().mae,
            evaluate(&own, test, channel).unwrap().mae,
            evaluate(&vendor, test, channel).unwrap().mae,
        );
    }
}
