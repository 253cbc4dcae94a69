use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use crate::data::{
    align_with_reference, characterize, hourly_average_with, parse_device_csv, parse_reference_csv,
    write_aligned_csv, write_device_csv, write_reference_csv, Channel, Dataset, DatasetSummary,
    DeploymentLayout, DeviceSeries, PmFraction,
};
use crate::fusion::FusionKind;
use crate::long_term::{run_long_term, LongTermConfig};
use crate::manifest::RunManifest;
use crate::report::{
    write_bands_csv, write_baseline_csv, write_combined_csv, write_histogram_csv, write_quantile_csv,
    write_significance_csv, write_summary_csv, write_tensor_csv, BaselineRow,
};
use crate::short_term::{compare_methods, run_short_term, vendor_baseline_scores, ShortTermConfig};
use crate::synth::{generate_fleet, FleetSpec};

use super::config::{read_structured, IngestConfig, Protocol, RunConfig};
use super::CliError;

/// A loaded configuration and where its outputs go.
pub struct RunContext {
    /// Paths resolved to absolute.
    pub config: RunConfig,
    /// As written in the file, with overrides applied; this is what the
    /// manifest records.
    pub recorded: RunConfig,
    pub base: PathBuf,
    pub out: PathBuf,
}

impl RunContext {
    pub fn new(config_path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self, CliError> {
        let mut recorded = RunConfig::load(config_path)?;
        if seed.is_some() {
            recorded.seed = seed;
        }
        recorded.validate()?;
        let base = config_path
            .parent()
            .map(Path::to_path_buf)
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| PathBuf::from("."));
        let config = recorded.resolved(&base);
        let out = out
            .or_else(|| config.out.clone())
            .ok_or_else(|| CliError::Config("no output directory: pass --out or set `out`".into()))?;
        recorded.out = None;
        Ok(Self {
            config,
            recorded,
            base,
            out,
        })
    }

    fn manifest(&self, command: &str) -> Result<RunManifest, CliError> {
        RunManifest::new(command, self.recorded.seed, &self.recorded).map_err(|e| CliError::Config(e.to_string()))
    }

    fn label(&self, path: &Path) -> String {
        path.strip_prefix(&self.base).unwrap_or(path).display().to_string()
    }

    fn seed(&self) -> Result<u64, CliError> {
        self.config
            .seed
            .ok_or_else(|| CliError::Config("a seed is required: set `seed` or pass --seed".into()))
    }
}

/// Ingested data plus the files it came from.
pub struct Loaded {
    pub layout: DeploymentLayout,
    pub aligned: Vec<DeviceSeries>,
    pub dataset: Dataset,
    pub inputs: Vec<PathBuf>,
}

fn device_files(cfg: &IngestConfig) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let mut files = BTreeMap::new();
    if let Some(dir) = &cfg.devices {
        let entries = std::fs::read_dir(dir).map_err(|e| CliError::input(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| CliError::input(dir, e))?.path();
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                let id = stem.split('_').next().unwrap_or(stem).to_string();
                if let Some(prev) = files.insert(id.clone(), path.clone()) {
                    return Err(CliError::Config(format!(
                        "device {id} matches both {} and {}",
                        prev.display(),
                        path.display()
                    )));
                }
            }
        }
    }
    files.extend(cfg.device_files.clone());
    if files.is_empty() {
        return Err(CliError::Config("no device files configured".into()));
    }
    Ok(files)
}

/// Reads, averages, aligns and partitions everything the config points at.
pub fn load(config: &RunConfig) -> Result<Loaded, CliError> {
    let ing = &config.ingest;
    let layout: DeploymentLayout = read_structured(&ing.layout)?;
    layout.validate().map_err(|e| CliError::input(&ing.layout, e))?;
    let reference_file = File::open(&ing.reference).map_err(|e| CliError::input(&ing.reference, e))?;
    let reference = parse_reference_csv(BufReader::new(reference_file), ing.timestamp_format)
        .map_err(|e| CliError::input(&ing.reference, e))?;
    let mut inputs = vec![ing.layout.clone(), ing.reference.clone()];

    let samples_per_hour = (3600 / ing.sample_interval_s) as usize;
    let mut aligned = Vec::new();
    for (id, path) in device_files(ing)? {
        let file = File::open(&path).map_err(|e| CliError::input(&path, e))?;
        let parsed = parse_device_csv(BufReader::new(file), &ing.schema, ing.timestamp_format)
            .map_err(|e| CliError::input(&path, e))?;
        if parsed.non_monotone > 0 {
            log::warn!("{}: {} non-monotone timestamps", path.display(), parsed.non_monotone);
        }
        let hourly = hourly_average_with(&parsed.samples, ing.min_coverage, samples_per_hour);
        match align_with_reference(&id, &hourly, &reference) {
            Ok(series) => aligned.push(series),
            Err(e) => log::warn!("device {id} skipped: {e}"),
        }
        inputs.push(path);
    }
    let (dataset, discarded) = Dataset::assemble(&layout, &aligned).map_err(|e| CliError::input(&ing.layout, e))?;
    if discarded > 0 {
        log::info!("{discarded} aligned hours fall outside their device's periods");
    }
    Ok(Loaded {
        layout,
        aligned,
        dataset,
        inputs,
    })
}

/// Writes `bytes` under `out` and records it in the manifest.
fn emit(out: &Path, rel: &str, bytes: &[u8], manifest: &mut RunManifest) -> Result<(), CliError> {
    let path = out.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::output(parent, e))?;
    }
    std::fs::write(&path, bytes).map_err(|e| CliError::output(&path, e))?;
    manifest.add_output(out, rel).map_err(|e| CliError::output(&path, e))
}

fn csv_bytes<E: std::fmt::Display>(f: impl FnOnce(&mut Vec<u8>) -> Result<(), E>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::Protocol(e.to_string()))?;
    Ok(buf)
}

fn finish(ctx_out: &Path, mut manifest: RunManifest, inputs: &[PathBuf], label: impl Fn(&Path) -> String) -> Result<(), CliError> {
    for p in inputs {
        manifest.add_input(label(p), p).map_err(|e| CliError::input(p, e))?;
    }
    let rel = format!("{}.manifest.json", manifest.command);
    let json = manifest.to_json();
    let path = ctx_out.join(&rel);
    std::fs::create_dir_all(ctx_out).map_err(|e| CliError::output(ctx_out, e))?;
    std::fs::write(&path, json).map_err(|e| CliError::output(&path, e))
}

/// Aligned archive (one CSV per device) and the dataset characterization.
pub fn cmd_ingest(ctx: &RunContext) -> Result<(), CliError> {
    let loaded = load(&ctx.config)?;
    let mut manifest = ctx.manifest("ingest")?;
    for series in &loaded.aligned {
        let bytes = csv_bytes(|w| write_aligned_csv(w, series))?;
        emit(&ctx.out, &format!("aligned/{}.csv", series.device_id), &bytes, &mut manifest)?;
    }
    let summary = summarize(&loaded.dataset, &ctx.config)?;
    emit(&ctx.out, "summary.csv", &csv_bytes(|w| write_summary_csv(w, &summary))?, &mut manifest)?;
    emit(&ctx.out, "histogram.csv", &csv_bytes(|w| write_histogram_csv(w, &summary))?, &mut manifest)?;
    finish(&ctx.out, manifest, &loaded.inputs, |p| ctx.label(p))
}

fn summarize(dataset: &Dataset, config: &RunConfig) -> Result<DatasetSummary, CliError> {
    let mut summary = DatasetSummary::default();
    for d in &dataset.deployments {
        for p in &d.periods {
            for &fraction in &config.fractions {
                let name = format!("{}/{}", d.name, p.name);
                match characterize(
                    &name,
                    &p.devices,
                    fraction,
                    &config.report.concentration_edges,
                    &config.report.rh_edges,
                ) {
                    Ok(s) => summary.periods.push(s),
                    Err(e) => log::warn!("{name} {fraction}: {e}"),
                }
            }
        }
    }
    Ok(summary)
}

/// Synthetic fleet files plus a ready-to-use run config.
pub fn cmd_synth(spec_path: &Path, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let mut spec: FleetSpec = read_structured(spec_path)?;
    if seed.is_some() {
        spec.seed = seed;
    }
    let fleet = generate_fleet(&spec).map_err(|e| CliError::Config(e.to_string()))?;
    let mut manifest =
        RunManifest::new("synth", spec.seed, &spec).map_err(|e| CliError::Config(e.to_string()))?;
    for (id, samples) in &fleet.samples {
        let bytes = csv_bytes(|w| write_device_csv(w, samples))?;
        emit(out, &format!("devices/{id}.csv"), &bytes, &mut manifest)?;
    }
    emit(out, "reference.csv", &csv_bytes(|w| write_reference_csv(w, &fleet.reference))?, &mut manifest)?;
    let layout = serde_json::to_string_pretty(&fleet.layout).expect("layout serializes") + "\n";
    emit(out, "layout.json", layout.as_bytes(), &mut manifest)?;
    let truth = serde_json::to_string_pretty(&fleet.truth).expect("truth serializes") + "\n";
    emit(out, "truth.json", truth.as_bytes(), &mut manifest)?;

    let mut run = RunConfig {
        seed: spec.seed,
        ..RunConfig::default()
    };
    run.ingest.devices = Some(PathBuf::from("devices"));
    run.ingest.sample_interval_s = 3600;
    match spec.deployments.as_slice() {
        [a, b, ..] => {
            run.long.train_deployment = a.name.clone();
            run.long.test_deployment = b.name.clone();
        }
        _ => run.protocol = Protocol::Short,
    }
    let toml = toml::to_string(&run).map_err(|e| CliError::Config(e.to_string()))?;
    emit(out, "fleetcal.toml", toml.as_bytes(), &mut manifest)?;
    finish(out, manifest, &[spec_path.to_path_buf()], |p| {
        p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    })
}

fn short_deployments(ctx: &RunContext, dataset: &Dataset) -> Result<Vec<String>, CliError> {
    let names = &ctx.config.short.deployments;
    if names.is_empty() {
        return Ok(dataset
            .deployments
            .iter()
            .filter(|d| d.periods.len() >= 2)
            .map(|d| d.name.clone())
            .collect());
    }
    for n in names {
        if dataset.deployment(n).is_none() {
            return Err(CliError::Config(format!("short.deployments: unknown deployment `{n}`")));
        }
    }
    Ok(names.clone())
}

fn run_short(ctx: &RunContext, loaded: &Loaded, manifest: &mut RunManifest) -> Result<(), CliError> {
    let seed = ctx.seed()?;
    let c = &ctx.config;
    for dep_name in short_deployments(ctx, &loaded.dataset)? {
        let dep = loaded.dataset.deployment(&dep_name).expect("checked");
        for &fraction in &c.fractions {
            let mut globals = Vec::new();
            for &fusion_kind in &c.fusion {
                let cfg = ShortTermConfig {
                    n_shuffles: c.short.n_shuffles,
                    fusion_kind,
                    fraction,
                    variant: c.variant,
                    seed,
                    train_weeks_global: c.short.train_weeks_global,
                    alpha: c.short.alpha,
                    t_test: c.short.t_test,
                };
                let (global, adhoc) = run_short_term(dep, &cfg).map_err(|e| CliError::Protocol(format!("{dep_name}: {e}")))?;
                let stem = format!("short/{dep_name}_{}_{fusion_kind}", fraction.token());
                emit(&ctx.out, &format!("{stem}_global_tensor.csv"), &csv_bytes(|w| write_tensor_csv(w, &global))?, manifest)?;
                let adhoc_rel = format!("short/{dep_name}_{}_adhoc_tensor.csv", fraction.token());
                emit(&ctx.out, &adhoc_rel, &csv_bytes(|w| write_tensor_csv(w, &adhoc))?, manifest)?;
                let report = compare_methods(&global, &adhoc, cfg.alpha, cfg.t_test)
                    .map_err(|e| CliError::Protocol(e.to_string()))?;
                emit(&ctx.out, &format!("{stem}_vs_adhoc_significance.csv"), &csv_bytes(|w| write_significance_csv(w, &report))?, manifest)?;
                emit(&ctx.out, &format!("{stem}_vs_adhoc_bands.csv"), &csv_bytes(|w| write_bands_csv(w, &report))?, manifest)?;
                globals.push((fusion_kind, global));
            }
            if let [(FusionKind::Aggregate, agg), (FusionKind::Median, med)] | [(FusionKind::Median, med), (FusionKind::Aggregate, agg)] =
                globals.as_slice()
            {
                let report = compare_methods(agg, med, c.short.alpha, c.short.t_test)
                    .map_err(|e| CliError::Protocol(e.to_string()))?;
                let rel = format!("short/{dep_name}_{}_aggregate_vs_median_significance.csv", fraction.token());
                emit(&ctx.out, &rel, &csv_bytes(|w| write_significance_csv(w, &report))?, manifest)?;
            }
        }
    }
    Ok(())
}

fn run_long(ctx: &RunContext, loaded: &Loaded, manifest: &mut RunManifest) -> Result<(), CliError> {
    let c = &ctx.config;
    for &fraction in &c.fractions {
        for &fusion_kind in &c.fusion {
            let cfg = LongTermConfig {
                train_deployment: c.long.train_deployment.clone(),
                test_deployment: c.long.test_deployment.clone(),
                fusion_kind,
                fraction,
                variant: c.variant,
                max_k: c.long.max_k,
                quantiles: c.long.quantiles.clone(),
                combined_min_k: c.long.combined_min_k,
            };
            let result = run_long_term(&loaded.dataset, &cfg).map_err(|e| match e {
                crate::long_term::LongTermError::UnknownDeployment(_) | crate::long_term::LongTermError::InvalidConfig(_) => {
                    CliError::Config(e.to_string())
                }
                other => CliError::Protocol(other.to_string()),
            })?;
            let stem = format!("long/{}_{fusion_kind}", fraction.token());
            emit(&ctx.out, &format!("{stem}_global_quantiles.csv"), &csv_bytes(|w| write_quantile_csv(w, &result.global))?, manifest)?;
            emit(&ctx.out, &format!("{stem}_adhoc_quantiles.csv"), &csv_bytes(|w| write_quantile_csv(w, &result.adhoc))?, manifest)?;
            emit(&ctx.out, &format!("{stem}_combined.csv"), &csv_bytes(|w| write_combined_csv(w, &result.combined))?, manifest)?;
        }
    }
    Ok(())
}

fn run_baseline(ctx: &RunContext, loaded: &Loaded, manifest: &mut RunManifest) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for dep in &loaded.dataset.deployments {
        for &fraction in &ctx.config.fractions {
            let records = vendor_baseline_scores(dep, Channel::new(fraction, ctx.config.variant))
                .map_err(|e| CliError::Protocol(format!("{}: {e}", dep.name)))?;
            rows.push(BaselineRow {
                deployment: dep.name.clone(),
                fraction,
                records,
            });
        }
    }
    emit(&ctx.out, "baseline.csv", &csv_bytes(|w| write_baseline_csv(w, &rows))?, manifest)
}

type Step = fn(&RunContext, &Loaded, &mut RunManifest) -> Result<(), CliError>;

fn with_loaded(
    ctx: &RunContext,
    command: &str,
    steps: &[Step],
) -> Result<(), CliError> {
    let loaded = load(&ctx.config)?;
    let mut manifest = ctx.manifest(command)?;
    for step in steps {
        step(ctx, &loaded, &mut manifest)?;
    }
    finish(&ctx.out, manifest, &loaded.inputs, |p| ctx.label(p))
}

pub fn cmd_evaluate_short(ctx: &RunContext) -> Result<(), CliError> {
    with_loaded(ctx, "evaluate-short", &[run_short])
}

pub fn cmd_evaluate_long(ctx: &RunContext) -> Result<(), CliError> {
    with_loaded(ctx, "evaluate-long", &[run_long])
}

/// Vendor calibration scored per device week.
pub fn cmd_baseline(ctx: &RunContext) -> Result<(), CliError> {
    with_loaded(ctx, "baseline", &[run_baseline])
}

/// The full bundle: selected protocols plus the vendor baseline.
pub fn cmd_report(ctx: &RunContext) -> Result<(), CliError> {
    let steps: &[Step] = match ctx.config.protocol {
        Protocol::Short => &[run_short, run_baseline],
        Protocol::Long => &[run_long, run_baseline],
        Protocol::Both => &[run_short, run_long, run_baseline],
    };
    with_loaded(ctx, "report", steps)
}

/// Restricts the fractions evaluated, from `--fraction`.
pub fn override_fraction(ctx: &mut RunContext, fraction: PmFraction) {
    ctx.config.fractions = vec![fraction];
    ctx.recorded.fractions = vec![fraction];
}

/// Restricts the fusion kinds evaluated, from `--fusion`.
pub fn override_fusion(ctx: &mut RunContext, fusion: FusionKind) {
    ctx.config.fusion = vec![fusion];
    ctx.recorded.fusion = vec![fusion];
}
