use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::data::{DeviceSchema, PmFraction, TimestampFormat, VendorVariant};
use crate::fusion::FusionKind;
use crate::short_term::TTestKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Short,
    Long,
    #[default]
    Both,
}

/// Everything a run needs. Relative paths resolve against the directory of
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub protocol: Protocol,
    pub fractions: Vec<PmFraction>,
    pub fusion: Vec<FusionKind>,
    pub variant: VendorVariant,
    pub ingest: IngestConfig,
    pub short: ShortSection,
    pub long: LongSection,
    pub report: ReportSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out: None,
            protocol: Protocol::Both,
            fractions: vec![PmFraction::Pm25],
            fusion: vec![FusionKind::Aggregate],
            variant: VendorVariant::default(),
            ingest: IngestConfig::default(),
            short: ShortSection::default(),
            long: LongSection::default(),
            report: ReportSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// Deployment layout, JSON or TOML.
    pub layout: PathBuf,
    /// Directory of device CSVs; the device id is the file stem up to the
    /// first `_`.
    pub devices: Option<PathBuf>,
    /// Explicit device id to file map, merged over `devices`.
    pub device_files: BTreeMap<String, PathBuf>,
    pub reference: PathBuf,
    pub timestamp_format: TimestampFormat,
    /// Nominal device sampling interval in seconds.
    pub sample_interval_s: u32,
    pub min_coverage: f64,
    pub schema: DeviceSchema,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            layout: PathBuf::from("layout.json"),
            devices: None,
            device_files: BTreeMap::new(),
            reference: PathBuf::from("reference.csv"),
            timestamp_format: TimestampFormat::default(),
            sample_interval_s: 6,
            min_coverage: crate::data::DEFAULT_MIN_COVERAGE,
            schema: DeviceSchema::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShortSection {
    /// Deployments to evaluate; empty means every deployment with at least
    /// two periods.
    pub deployments: Vec<String>,
    pub n_shuffles: usize,
    pub train_weeks_global: [usize; 2],
    pub alpha: f64,
    pub t_test: TTestKind,
}

impl Default for ShortSection {
    fn default() -> Self {
        Self {
            deployments: Vec::new(),
            n_shuffles: 100,
            train_weeks_global: [1, 2],
            alpha: 0.05,
            t_test: TTestKind::Paired,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LongSection {
    pub train_deployment: String,
    pub test_deployment: String,
    pub max_k: Option<usize>,
    pub quantiles: Vec<f64>,
    pub combined_min_k: usize,
}

impl Default for LongSection {
    fn default() -> Self {
        let d = crate::long_term::LongTermConfig::default();
        Self {
            train_deployment: d.train_deployment,
            test_deployment: d.test_deployment,
            max_k: d.max_k,
            quantiles: d.quantiles,
            combined_min_k: d.combined_min_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Concentration bin edges of the joint histogram, µg/m³.
    pub concentration_edges: Vec<f64>,
    /// RH bin edges of the joint histogram, %.
    pub rh_edges: Vec<f64>,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            concentration_edges: vec![0.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 1000.0],
            rh_edges: (0..=10).map(|i| f64::from(i) * 10.0).collect(),
        }
    }
}

/// Reads TOML, or JSON when the extension is `.json`.
pub(crate) fn read_structured<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        read_structured(path)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.fractions.is_empty() || self.fractions.iter().any(|f| f.reference_free()) {
            return bad("fractions must be a non-empty subset of pm25, pm10");
        }
        if self.fusion.is_empty() {
            return bad("fusion must list at least one of aggregate, median");
        }
        if self.ingest.sample_interval_s == 0 || 3600 % self.ingest.sample_interval_s != 0 {
            return bad("sample_interval_s must divide 3600");
        }
        if !(0.0..=1.0).contains(&self.ingest.min_coverage) {
            return bad("min_coverage must lie in [0, 1]");
        }
        Ok(())
    }

    /// Copy with every path made absolute against `base`.
    pub fn resolved(&self, base: &Path) -> RunConfig {
        let abs = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let mut c = self.clone();
        c.ingest.layout = abs(&c.ingest.layout);
        c.ingest.reference = abs(&c.ingest.reference);
        c.ingest.devices = c.ingest.devices.as_deref().map(abs);
        for p in c.ingest.device_files.values_mut() {
            *p = abs(p);
        }
        c.out = c.out.as_deref().map(abs);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_toml() {
        let text = r#"
            seed = 7
            fractions = ["pm25", "pm10"]
            fusion = ["aggregate", "median"]

            [ingest]
            layout = "layout.json"
            devices = "devices"
            reference = "reference.csv"
            sample_interval_s = 3600

            [short]
            n_shuffles = 5

            [long]
            max_k = 3
        "#;
        let c: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.short.n_shuffles, 5);
        assert_eq!(c.long.max_k, Some(3));
        assert_eq!(c.long.quantiles, vec![0.25, 0.5, 0.75]);
        c.validate().unwrap();
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }

    #[test]
    fn paths_resolve_against_base() {
        let c = RunConfig::default().resolved(Path::new("/data/run"));
        assert_eq!(c.ingest.layout, Path::new("/data/run/layout.json"));
        assert_eq!(c.ingest.reference, Path::new("/data/run/reference.csv"));
    }
}
