//! On-board use of a calibrated model: 12 raw doubles become 3 floats.

use fleetcal::calibration::{
    decode_payload_bytes, encode_payload, payload_bytes, PayloadEncoder, CALIBRATED_PAYLOAD_BYTES, RAW_PAYLOAD_BYTES,
};
use fleetcal::{CalibrationModel, Features, ModelKind, PmFraction};

fn model(fraction: PmFraction, a: f64, b: f64, c: f64) -> CalibrationModel {
    CalibrationModel {
        fraction,
        a,
        b,
        c,
        kind: ModelKind::Global,
        trained_on: Default::default(),
    }
}

fn main() {
    let encoder = PayloadEncoder::new(
        model(PmFraction::Pm25, 0.62, -0.11, 3.5),
        model(PmFraction::Pm10, 0.55, -0.08, 4.1),
    );
    let mut features = Features {
        bin_counts: [2100.0, 640.0, 120.0, 14.0, 3.0, 1.0],
        rh: 72.0,
        ..Features::default()
    };
    features.pm_atmospheric = [11.0, 19.0, 27.0];
    features.pm_standard = [12.0, 21.0, 29.0];

    let values = encode_payload(&encoder, &features).unwrap();
    let wire = payload_bytes(values);
    println!("raw payload:        {RAW_PAYLOAD_BYTES} bytes {:?}", features.raw_payload());
    println!("calibrated payload: {CALIBRATED_PAYLOAD_BYTES} bytes {values:?}");
    println!("wire: {wire:02x?}");
    assert_eq!(decode_payload_bytes(wire), values);
    println!("PM1 has no model here, so the vendor value is passed through: {}", values[0]);
}
