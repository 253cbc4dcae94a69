//! Short-term protocol on a 3-period fleet: global models from n shuffled
//! devices against per-device models, with significance tests per n.

use fleetcal::metrics::Metric;
use fleetcal::short_term::{compare_methods, run_short_term, ShortTermConfig, TTestKind};
use fleetcal::synth::{generate_fleet, DeviceLaw, FleetSpec};

fn main() {
    let law = DeviceLaw {
        sigma_gain: 0.05,
        sigma_offset: 1.0,
        rh_coefficient: 0.05,
        sigma_noise: 2.0,
        rh_nonlinearity: 0.0,
    };
    let fleet = generate_fleet(&FleetSpec::single_deployment(1, "winter", 3, 6, 504, law)).unwrap();
    let cfg = ShortTermConfig {
        n_shuffles: 20,
        seed: 1,
        ..ShortTermConfig::default()
    };
    let (global, adhoc) = run_short_term(&fleet.dataset.deployments[0], &cfg).unwrap();
    let report = compare_methods(&global, &adhoc, cfg.alpha, TTestKind::Paired).unwrap();

    println!("{:>2} {:>10} {:>10} {:>8} {:>8}", "n", "global MAE", "ad-hoc MAE", "t", "wilcoxon");
    for row in &report.rows {
        let mean = |t: &fleetcal::short_term::PerfTensor| {
            let v = t.values_at(row.n, Metric::Mae);
            v.iter().map(|(_, x)| x).sum::<f64>() / v.len() as f64
        };
        println!(
            "{:>2} {:>10.3} {:>10.3} {:>8} {:>8}",
            row.n,
            mean(&global),
            mean(&adhoc),
            row.mae_t.label(cfg.alpha),
            row.mae_wilcoxon.label(cfg.alpha)
        );
    }
}
