//! On-board output codec: 12 raw doubles in, 3 calibrated floats out.

use super::{vendor_baseline, CalibrationError, CalibrationModel};
use crate::data::{Features, PmFraction, VendorVariant};

/// 6 particle counts and 2 x 3 vendor PM estimates as `f64`.
pub const RAW_PAYLOAD_BYTES: usize = 12 * std::mem::size_of::<f64>();
/// PM1, PM2.5 and PM10 as `f32`.
pub const CALIBRATED_PAYLOAD_BYTES: usize = 3 * std::mem::size_of::<f32>();

/// Calibrated models for the three fractions a device transmits.
///
/// PM2.5 and PM10 models are mandatory. Without a PM1 model the vendor
/// estimate is passed through.
#[derive(Debug, Clone, PartialEq)]
pub struct PayloadEncoder {
    pub pm1: Option<CalibrationModel>,
    pub pm25: Option<CalibrationModel>,
    pub pm10: Option<CalibrationModel>,
    pub variant: VendorVariant,
    /// Floor outputs at zero. Meant for deployment, not for evaluation.
    pub clamp_negative: bool,
}

impl PayloadEncoder {
    pub fn new(pm25: CalibrationModel, pm10: CalibrationModel) -> Self {
        Self {
            pm1: None,
            pm25: Some(pm25),
            pm10: Some(pm10),
            variant: VendorVariant::default(),
            clamp_negative: false,
        }
    }

    fn model(&self, fraction: PmFraction) -> Result<CalibrationModel, CalibrationError> {
        let slot = match fraction {
            PmFraction::Pm1 => &self.pm1,
            PmFraction::Pm25 => &self.pm25,
            PmFraction::Pm10 => &self.pm10,
        };
        match slot {
            Some(m) if m.fraction != fraction => Err(CalibrationError::FractionMismatch {
                expected: fraction,
                found: m.fraction,
            }),
            Some(m) => Ok(m.clone()),
            None if fraction == PmFraction::Pm1 => Ok(vendor_baseline(fraction)),
            None => Err(CalibrationError::MissingModel(fraction)),
        }
    }

    pub fn encode(&self, features: &Features) -> Result<[f32; 3], CalibrationError> {
        let mut out = [0f32; 3];
        for (slot, fraction) in out.iter_mut().zip(PmFraction::ALL) {
            let mut v = self.model(fraction)?.predict_features(features, self.variant);
            if self.clamp_negative {
                v = v.max(0.0);
            }
            *slot = v as f32;
        }
        Ok(out)
    }
}

/// Calibrated PM1/PM2.5/PM10 for one raw sample.
pub fn encode_payload(encoder: &PayloadEncoder, features: &Features) -> Result<[f32; 3], CalibrationError> {
    encoder.encode(features)
}

/// Little-endian wire form of a calibrated triple.
pub fn payload_bytes(values: [f32; 3]) -> [u8; CALIBRATED_PAYLOAD_BYTES] {
    let mut out = [0u8; CALIBRATED_PAYLOAD_BYTES];
    for (chunk, v) in out.chunks_exact_mut(4).zip(values) {
        chunk.copy_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_payload_bytes(bytes: [u8; CALIBRATED_PAYLOAD_BYTES]) -> [f32; 3] {
    let mut out = [0f32; 3];
    for (v, chunk) in out.iter_mut().zip(bytes.chunks_exact(4)) {
        *v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
    }
    out
}
