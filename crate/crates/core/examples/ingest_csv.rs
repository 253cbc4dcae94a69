//! CSV ingestion: raw device samples at a 6 s cadence are averaged to hours
//! and inner-joined with the reference analyzer.

use std::collections::BTreeMap;

use chrono::{TimeDelta, TimeZone, Utc};
use fleetcal::data::{
    align_with_reference, hourly_average, parse_device_csv, parse_reference_csv, write_device_csv,
    write_reference_csv, DeviceSchema, RawSample, ReferenceValues, TimestampFormat,
};
use fleetcal::Features;

fn main() {
    let t0 = Utc.with_ymd_and_hms(2021, 1, 13, 0, 0, 0).unwrap();

    // Three hours of samples; the third hour is only half covered.
    let mut samples = Vec::new();
    for i in 0..(600 * 2 + 300) {
        let pm = 20.0 + (i % 60) as f64 * 0.1;
        let mut features = Features {
            rh: 65.0,
            temperature: 4.0,
            ..Features::default()
        };
        features.pm_atmospheric = [0.7 * pm, pm, 1.6 * pm];
        features.pm_standard = features.pm_atmospheric;
        samples.push(RawSample {
            timestamp: t0 + TimeDelta::seconds(6 * i),
            features,
        });
    }
    let reference: BTreeMap<_, _> = (0..3)
        .map(|h| (t0 + TimeDelta::hours(h), ReferenceValues { pm25: 18.0, pm10: 29.0 }))
        .collect();

    // Write and read back, as a real run would.
    let mut device_csv = Vec::new();
    write_device_csv(&mut device_csv, &samples).unwrap();
    let mut reference_csv = Vec::new();
    write_reference_csv(&mut reference_csv, &reference).unwrap();
    println!("device CSV header: {}", String::from_utf8_lossy(&device_csv).lines().next().unwrap());

    let parsed = parse_device_csv(device_csv.as_slice(), &DeviceSchema::default(), TimestampFormat::default()).unwrap();
    let reference = parse_reference_csv(reference_csv.as_slice(), TimestampFormat::default()).unwrap();
    println!("{} samples parsed, {} out of order", parsed.samples.len(), parsed.non_monotone);

    let hourly = hourly_average(&parsed.samples, 0.75);
    for h in &hourly {
        println!("  {}  coverage {:.2}  pm2.5 {:.3}", h.hour, h.coverage, h.features.pm_atmospheric[1]);
    }
    let aligned = align_with_reference("301", &hourly, &reference).unwrap();
    println!("{} aligned hours (the half-covered hour is dropped)", aligned.len());
}
