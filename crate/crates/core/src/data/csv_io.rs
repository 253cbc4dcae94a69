use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{AlignedRecord, DataError, DeviceSeries, Features, RawSample, ReferenceValues};
use crate::report::fmt_sig;

/// How timestamps are encoded in device and reference files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampFormat {
    /// RFC 3339 / ISO-8601 with an offset (converted to UTC), or a naive
    /// `YYYY-MM-DDTHH:MM:SS` taken as UTC.
    #[default]
    Iso8601,
    EpochSeconds,
}

/// Maps the logical device fields onto CSV column names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceSchema {
    pub timestamp: String,
    pub bin_counts: [String; 6],
    pub pm_standard: [String; 3],
    pub pm_atmospheric: [String; 3],
    pub temperature: String,
    pub rh: String,
}

impl Default for DeviceSchema {
    fn default() -> Self {
        let s = |v: &str| v.to_string();
        Self {
            timestamp: s("timestamp"),
            bin_counts: [
                s("n0_3"),
                s("n0_5"),
                s("n1_0"),
                s("n2_5"),
                s("n5_0"),
                s("n10"),
            ],
            pm_standard: [s("pm1_std"), s("pm25_std"), s("pm10_std")],
            pm_atmospheric: [s("pm1_atm"), s("pm25_atm"), s("pm10_atm")],
            temperature: s("temperature"),
            rh: s("rh"),
        }
    }
}

impl DeviceSchema {
    fn columns(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.timestamp.as_str())
            .chain(self.bin_counts.iter().map(String::as_str))
            .chain(self.pm_standard.iter().map(String::as_str))
            .chain(self.pm_atmospheric.iter().map(String::as_str))
            .chain([self.temperature.as_str(), self.rh.as_str()])
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedDevice {
    pub samples: Vec<RawSample>,
    /// Rows whose timestamp is not later than the previous one. Devices may
    /// resend buffered data, so this is only a warning.
    pub non_monotone: usize,
}

pub(crate) fn parse_timestamp(raw: &str, format: TimestampFormat) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    match format {
        TimestampFormat::Iso8601 => {
            if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
                return Some(t.with_timezone(&Utc));
            }
            ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
                .iter()
                .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
                .map(|t| t.and_utc())
        }
        TimestampFormat::EpochSeconds => {
            if let Ok(secs) = raw.parse::<i64>() {
                return DateTime::from_timestamp(secs, 0);
            }
            let secs: f64 = raw.parse().ok()?;
            if !secs.is_finite() {
                return None;
            }
            let whole = secs.floor();
            DateTime::from_timestamp(whole as i64, ((secs - whole) * 1e9) as u32)
        }
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| DataError::MissingColumn(name.to_string()))
}

fn parse_value(record: &csv::StringRecord, idx: usize, line: u64, name: &str) -> Result<f64, DataError> {
    let raw = record.get(idx).unwrap_or("").trim();
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::MalformedRow {
            line,
            reason: format!("column `{name}`: cannot parse `{raw}` as a number"),
        }),
    }
}

fn non_negative(value: f64, line: u64, field: &'static str) -> Result<f64, DataError> {
    if value < 0.0 {
        return Err(DataError::OutOfRange { line, field, value });
    }
    Ok(value)
}

/// Parses one device CSV into raw samples, in file order.
pub fn parse_device_csv<R: Read>(
    reader: R,
    schema: &DeviceSchema,
    format: TimestampFormat,
) -> Result<ParsedDevice, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = schema
        .columns()
        .map(|c| column_index(&headers, c))
        .collect::<Result<_, _>>()?;
    let names: Vec<&str> = schema.columns().collect();

    let mut out = ParsedDevice::default();
    let mut last: Option<DateTime<Utc>> = None;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let raw_ts = record.get(idx[0]).unwrap_or("");
        let timestamp = parse_timestamp(raw_ts, format).ok_or_else(|| DataError::MalformedRow {
            line,
            reason: format!("cannot parse timestamp `{raw_ts}`"),
        })?;

        let mut values = [0.0; 14];
        for (k, v) in values.iter_mut().enumerate() {
            *v = parse_value(&record, idx[k + 1], line, names[k + 1])?;
        }
        let mut features = Features::default();
        for (slot, v) in features.fields_mut().zip(values) {
            *slot = v;
        }
        for v in features.bin_counts {
            non_negative(v, line, "bin_counts")?;
        }
        for v in features.pm_standard {
            non_negative(v, line, "pm_standard")?;
        }
        for v in features.pm_atmospheric {
            non_negative(v, line, "pm_atmospheric")?;
        }
        if !(0.0..=100.0).contains(&features.rh) {
            return Err(DataError::OutOfRange {
                line,
                field: "rh",
                value: features.rh,
            });
        }

        if last.is_some_and(|prev| timestamp <= prev) {
            out.non_monotone += 1;
        }
        last = Some(timestamp);
        out.samples.push(RawSample {
            timestamp,
            features,
        });
    }
    if out.non_monotone > 0 {
        log::warn!("{} non-monotone timestamps in device file", out.non_monotone);
    }
    Ok(out)
}

/// Parses a reference CSV with columns `hour,pm25,pm10`.
///
/// Timestamps are floored to the hour. Rows with an empty concentration cell
/// are skipped; a repeated hour is a malformed row.
pub fn parse_reference_csv<R: Read>(
    reader: R,
    format: TimestampFormat,
) -> Result<BTreeMap<DateTime<Utc>, ReferenceValues>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let i_hour = column_index(&headers, "hour")?;
    let i_25 = column_index(&headers, "pm25")?;
    let i_10 = column_index(&headers, "pm10")?;

    let mut out = BTreeMap::new();
    let mut skipped = 0usize;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let raw_ts = record.get(i_hour).unwrap_or("");
        let ts = parse_timestamp(raw_ts, format).ok_or_else(|| DataError::MalformedRow {
            line,
            reason: format!("cannot parse timestamp `{raw_ts}`"),
        })?;
        if record.get(i_25).unwrap_or("").is_empty() || record.get(i_10).unwrap_or("").is_empty() {
            skipped += 1;
            continue;
        }
        let pm25 = non_negative(parse_value(&record, i_25, line, "pm25")?, line, "pm25")?;
        let pm10 = non_negative(parse_value(&record, i_10, line, "pm10")?, line, "pm10")?;
        if out.insert(super::hourly::floor_hour(ts), ReferenceValues { pm25, pm10 }).is_some() {
            return Err(DataError::MalformedRow {
                line,
                reason: format!("duplicate reference hour `{raw_ts}`"),
            });
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} reference rows with missing values skipped");
    }
    Ok(out)
}

fn ts_string(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn feature_cells(f: &Features) -> impl Iterator<Item = String> + '_ {
    f.fields().map(fmt_sig)
}

/// Writes samples in the default [`DeviceSchema`] layout.
pub fn write_device_csv<W: Write>(writer: W, samples: &[RawSample]) -> Result<(), DataError> {
    let schema = DeviceSchema::default();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(schema.columns())?;
    for s in samples {
        let row: Vec<String> = std::iter::once(ts_string(s.timestamp))
            .chain(feature_cells(&s.features))
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_reference_csv<W: Write>(
    writer: W,
    reference: &BTreeMap<DateTime<Utc>, ReferenceValues>,
) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["hour", "pm25", "pm10"])?;
    for (hour, r) in reference {
        w.write_record([ts_string(*hour), fmt_sig(r.pm25), fmt_sig(r.pm10)])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes an aligned device series: hour, coverage, raw features, reference.
pub fn write_aligned_csv<W: Write>(writer: W, series: &DeviceSeries) -> Result<(), DataError> {
    let schema = DeviceSchema::default();
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = ["hour", "coverage"]
        .into_iter()
        .chain(schema.columns().skip(1))
        .chain(["ref_pm25", "ref_pm10"])
        .collect();
    w.write_record(&header)?;
    for AlignedRecord {
        hour,
        features,
        coverage,
        reference,
    } in &series.records
    {
        let row: Vec<String> = [ts_string(*hour), fmt_sig(*coverage)]
            .into_iter()
            .chain(feature_cells(features))
            .chain([fmt_sig(reference.pm25), fmt_sig(reference.pm10)])
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
