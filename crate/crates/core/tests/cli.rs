mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use fleetcal::synth::FleetSpec;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fleetcal"))
}

fn synth(dir: &Path, spec: &FleetSpec) -> PathBuf {
    let spec_path = common::write_spec(dir, spec);
    let data = dir.join("data");
    let code = common::fleetcal(&["synth", "--config", spec_path.to_str().unwrap(), "--out", data.to_str().unwrap()]);
    assert_eq!(code, 0);
    data
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn two_devices_one_period() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FleetSpec::single_deployment(3, "winter", 1, 2, 72, common::noisy_law());
    let data = synth(dir.path(), &spec);
    let mut files: Vec<_> = std::fs::read_dir(data.join("devices")).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 2);
    assert!(files[0].ends_with("301.csv") && files[1].ends_with("302.csv"));
    for f in &files {
        let text = std::fs::read_to_string(f).unwrap();
        assert_eq!(text.lines().count(), 1 + 72, "{}", f.display());
    }
    assert!(data.join("synth.manifest.json").exists());
}

#[test]
fn seedless_spec_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = FleetSpec::single_deployment(3, "winter", 1, 2, 72, common::noisy_law());
    spec.seed = None;
    let spec_path = common::write_spec(dir.path(), &spec);
    let out = dir.path().join("data");
    let code = common::fleetcal(&["synth", "--config", spec_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    // A seed on the command line is enough.
    let code =
        common::fleetcal(&["synth", "--config", spec_path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(code, 0);
}

#[test]
fn missing_reference_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &common::short_fleet(common::noisy_law(), 2, 72));
    let reference = data.join("reference.csv");
    std::fs::remove_file(&reference).unwrap();
    let out = bin()
        .args(["ingest", "--config"])
        .arg(data.join("fleetcal.toml"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(reference.to_str().unwrap()), "{stderr}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["report", "--fraction", "pm1"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("report").output().unwrap().status.code(), Some(2));
}

#[test]
fn summary_has_one_row_per_period_and_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &common::short_fleet(common::noisy_law(), 2, 168));
    let cfg = data.join("fleetcal.toml");
    common::append_config(&cfg, "fractions = [\"pm25\", \"pm10\"]");
    let out = dir.path().join("out");
    assert_eq!(common::fleetcal(&["ingest", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3 * 2);
    assert_eq!(
        summary.lines().next().unwrap(),
        "period,fraction,n_positive,n_excluded,lognormal_mu,lognormal_sigma,rh_min,rh_q25,rh_median,rh_q75,rh_max"
    );
    assert_eq!(std::fs::read_dir(out.join("aligned")).unwrap().count(), 6);
}

#[test]
fn short_protocol_smoke_and_headers() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &common::short_fleet(common::noisy_law(), 3, 504));
    let cfg = data.join("fleetcal.toml");
    common::append_config(&cfg, "[short]\nn_shuffles = 3");
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    assert_eq!(common::fleetcal(&["evaluate-short", "--config", cfg.to_str().unwrap(), "--out", o]), 0);
    assert_eq!(common::fleetcal(&["baseline", "--config", cfg.to_str().unwrap(), "--out", o]), 0);

    let short = out.join("short");
    let tensor = short.join("winter_pm25_aggregate_global_tensor.csv");
    assert_eq!(
        header(&tensor),
        "method,shuffle,period,n,mae,rmse,r2,nrmse,mae_over_range,test_devices,failed_devices,train_devices"
    );
    // 3 shuffles x 3 periods x n = 1..=3.
    assert_eq!(std::fs::read_to_string(&tensor).unwrap().lines().count(), 1 + 27);
    assert_eq!(
        header(&short.join("winter_pm25_aggregate_vs_adhoc_significance.csv")),
        "n,pairs,periods_contributing,invalid_cells,r2_paired_t_p,r2_wilcoxon_p,mae_paired_t_p,mae_wilcoxon_p,\
         r2_paired_t,r2_wilcoxon,mae_paired_t,mae_wilcoxon"
    );
    assert_eq!(
        header(&short.join("winter_pm25_aggregate_vs_adhoc_bands.csv")),
        "n,method,metric,samples,mean,sigma,sigma_low,sigma_high,ci_low,ci_high"
    );
    assert_eq!(header(&out.join("baseline.csv")), "deployment,fraction,statistic,MAE,R²,RMSE,NRMSE,MAE/RANGE");
    assert!(out.join("evaluate-short.manifest.json").exists());
}
