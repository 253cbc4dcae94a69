//! Colocation data model: raw samples, hourly records, reference alignment and
//! the deployment/period/week structure the evaluation protocols operate on.

mod csv_io;
mod dataset;
mod hourly;
mod layout;
mod summary;
mod weeks;

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{
    parse_device_csv, parse_reference_csv, write_aligned_csv, write_device_csv,
    write_reference_csv, DeviceSchema, ParsedDevice, TimestampFormat,
};
pub use dataset::{Dataset, DeploymentData, PeriodData};
pub use hourly::{
    align_with_reference, hourly_average, hourly_average_with, HourlyRecord,
    DEFAULT_MIN_COVERAGE, SAMPLES_PER_HOUR,
};
pub use layout::{partition, Deployment, DeploymentLayout, Partitioned, Period, PeriodKey};
pub use summary::{characterize, DatasetSummary, JointHistogram, PeriodSummary};
pub use weeks::{split_weeks, WeekSlices};

/// Number of particle-count size thresholds reported by the optical counter.
pub const BIN_COUNT: usize = 6;
/// Size thresholds in µm of the particle-count channels.
pub const BIN_THRESHOLDS_UM: [f64; BIN_COUNT] = [0.3, 0.5, 1.0, 2.5, 5.0, 10.0];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: field `{field}` out of range ({value})")]
    OutOfRange {
        line: u64,
        field: &'static str,
        value: f64,
    },
    #[error("device and reference series share no hour")]
    EmptyOverlap,
    #[error("series spans {hours} h, at least 3 are needed to split it into weeks")]
    TooShort { hours: i64 },
    #[error("insufficient data: {positive} positive concentrations, at least 3 are needed")]
    InsufficientData { positive: usize },
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Particulate-matter size fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PmFraction {
    Pm1,
    Pm25,
    Pm10,
}

impl PmFraction {
    pub const ALL: [PmFraction; 3] = [PmFraction::Pm1, PmFraction::Pm25, PmFraction::Pm10];

    pub fn index(self) -> usize {
        match self {
            PmFraction::Pm1 => 0,
            PmFraction::Pm25 => 1,
            PmFraction::Pm10 => 2,
        }
    }

    /// PM1 has no reference analyzer channel.
    pub fn reference_free(self) -> bool {
        self == PmFraction::Pm1
    }

    /// Short machine token: `pm1`, `pm25`, `pm10`.
    pub fn token(self) -> &'static str {
        match self {
            PmFraction::Pm1 => "pm1",
            PmFraction::Pm25 => "pm25",
            PmFraction::Pm10 => "pm10",
        }
    }
}

impl fmt::Display for PmFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PmFraction::Pm1 => "PM1",
            PmFraction::Pm25 => "PM2.5",
            PmFraction::Pm10 => "PM10",
        })
    }
}

impl std::str::FromStr for PmFraction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['.', '_'], "").as_str() {
            "pm1" => Ok(PmFraction::Pm1),
            "pm25" => Ok(PmFraction::Pm25),
            "pm10" => Ok(PmFraction::Pm10),
            other => Err(format!("unknown PM fraction `{other}`")),
        }
    }
}

/// Which of the two vendor-calibrated mass concentrations feeds the law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VendorVariant {
    Standard,
    #[default]
    Atmospheric,
}

/// A PM fraction together with the vendor variant used as its raw estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Channel {
    pub fraction: PmFraction,
    #[serde(default)]
    pub variant: VendorVariant,
}

impl Channel {
    pub fn new(fraction: PmFraction, variant: VendorVariant) -> Self {
        Self { fraction, variant }
    }

    pub fn pm25() -> Self {
        Self::new(PmFraction::Pm25, VendorVariant::Atmospheric)
    }

    pub fn pm10() -> Self {
        Self::new(PmFraction::Pm10, VendorVariant::Atmospheric)
    }
}

/// Raw device features, either one sample or an hourly average.
///
/// Bin counts are stored verbatim; whether the vendor reports them as
/// cumulative or per-bin counts does not matter to the calibration law.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Features {
    pub bin_counts: [f64; BIN_COUNT],
    /// PM1, PM2.5, PM10 under the vendor's "standard particle" calibration.
    pub pm_standard: [f64; 3],
    /// PM1, PM2.5, PM10 under the vendor's "atmospheric environment" calibration.
    pub pm_atmospheric: [f64; 3],
    pub temperature: f64,
    pub rh: f64,
}

impl Features {
    pub fn vendor_pm(&self, fraction: PmFraction, variant: VendorVariant) -> f64 {
        match variant {
            VendorVariant::Standard => self.pm_standard[fraction.index()],
            VendorVariant::Atmospheric => self.pm_atmospheric[fraction.index()],
        }
    }

    /// The 12 raw values a device transmits per sample (6 counts, 2 x 3 PM).
    pub fn raw_payload(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        out[..6].copy_from_slice(&self.bin_counts);
        out[6..9].copy_from_slice(&self.pm_standard);
        out[9..].copy_from_slice(&self.pm_atmospheric);
        out
    }

    pub(crate) fn fields(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_counts
            .iter()
            .chain(self.pm_standard.iter())
            .chain(self.pm_atmospheric.iter())
            .copied()
            .chain([self.temperature, self.rh])
    }

    pub(crate) fn fields_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.bin_counts
            .iter_mut()
            .chain(self.pm_standard.iter_mut())
            .chain(self.pm_atmospheric.iter_mut())
            .chain([&mut self.temperature, &mut self.rh])
    }
}

/// One raw device sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub timestamp: DateTime<Utc>,
    pub features: Features,
}

/// Reference-analyzer concentrations for one hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValues {
    pub pm25: f64,
    pub pm10: f64,
}

impl ReferenceValues {
    /// The reference analyzer reports PM2.5 and PM10 only.
    pub fn get(&self, fraction: PmFraction) -> Option<f64> {
        match fraction {
            PmFraction::Pm1 => None,
            PmFraction::Pm25 => Some(self.pm25),
            PmFraction::Pm10 => Some(self.pm10),
        }
    }
}

/// A device-hour joined with the reference truth for that hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedRecord {
    pub hour: DateTime<Utc>,
    pub features: Features,
    pub coverage: f64,
    pub reference: ReferenceValues,
}

/// Time-ordered aligned records of one device.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviceSeries {
    pub device_id: String,
    pub records: Vec<AlignedRecord>,
}

impl DeviceSeries {
    pub fn new(device_id: impl Into<String>, records: Vec<AlignedRecord>) -> Self {
        Self {
            device_id: device_id.into(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn hours(&self) -> impl Iterator<Item = DateTime<Utc>> + '_ {
        self.records.iter().map(|r| r.hour)
    }

    pub fn first_hour(&self) -> Option<DateTime<Utc>> {
        self.records.first().map(|r| r.hour)
    }

    pub fn last_hour(&self) -> Option<DateTime<Utc>> {
        self.records.last().map(|r| r.hour)
    }

    /// Merges several slices of the same device back into one ordered series.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a DeviceSeries>) -> DeviceSeries {
        let mut device_id = String::new();
        let mut records = Vec::new();
        for part in parts {
            if device_id.is_empty() {
                device_id.clone_from(&part.device_id);
            }
            records.extend_from_slice(&part.records);
        }
        records.sort_by_key(|r| r.hour);
        DeviceSeries { device_id, records }
    }
}

impl AsRef<DeviceSeries> for DeviceSeries {
    fn as_ref(&self) -> &DeviceSeries {
        self
    }
}
