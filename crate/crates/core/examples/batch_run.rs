//! End-to-end batch run through the command-line entry point: synthesize a
//! fleet, ingest it, then run both protocols and the vendor baseline. Every
//! step writes a manifest with SHA-256 digests of its inputs and outputs.

use fleetcal::synth::FleetSpec;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut spec = FleetSpec::single_deployment(11, "winter", 3, 4, 504, FleetSpec::identity_law());
    spec.law.sigma_noise = 2.0;
    std::fs::write(root.join("fleet.json"), serde_json::to_string_pretty(&spec).unwrap()).unwrap();

    let p = |rel: &str| root.join(rel).to_string_lossy().into_owned();
    let run = |args: &[String]| {
        let code = fleetcal::cli::main_with(std::iter::once("fleetcal".to_string()).chain(args.iter().cloned()));
        println!("fleetcal {} -> exit {code}", args[0]);
        assert_eq!(code, 0);
    };
    run(&["synth".into(), "--config".into(), p("fleet.json"), "--out".into(), p("data")]);
    let config = p("data/fleetcal.toml");
    run(&["ingest".into(), "--config".into(), config.clone(), "--out".into(), p("out")]);
    run(&["report".into(), "--config".into(), config, "--out".into(), p("out"), "--jobs".into(), "2".into()]);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("out/report.manifest.json")).unwrap()).unwrap();
    println!("\nreport outputs:");
    for (file, digest) in manifest["outputs"].as_object().unwrap() {
        println!("  {file:<52} {}", &digest.as_str().unwrap()[..16]);
    }
}
