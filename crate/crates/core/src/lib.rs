//! Global (multi-unit) field calibration for low-cost particulate-matter sensors.
//!
//! A single calibration law
//!
//! ```text
//! C_PMx(t) = a * PM'x(t) + b * RH(t) + c
//! ```
//!
//! is fitted on the fused colocation data of a small subset of devices and then
//! applied unchanged to every other unit of the same model, with no transfer
//! samples. The crate contains everything needed to build such a law and to
//! judge it against per-device ("ad-hoc") calibration:
//!
//! - [`data`]: CSV ingestion, hourly averaging, alignment with the reference
//!   analyzer, deployment/period partitioning and week splitting.
//! - [`fusion`]: aggregation and feature-wise median fusion of several devices.
//! - [`calibration`]: least-squares fitting of the law, prediction, vendor
//!   baseline and the on-board payload codec.
//! - [`metrics`]: MAE, RMSE, R², NRMSE and MAE/range.
//! - [`stats`]: Wilcoxon signed-rank, paired and Welch t-tests, Jarque-Bera,
//!   quantiles and the two-component confidence interval.
//! - [`short_term`] and [`long_term`]: the two evaluation protocols.
//! - [`synth`]: a synthetic colocation fleet with known ground truth.
//! - [`report`], [`manifest`] and [`cli`]: CSV reports, run manifests and the
//!   command-line front end.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod data;
pub mod fusion;
pub mod long_term;
pub mod manifest;
pub mod metrics;
pub mod report;
pub mod short_term;
pub mod stats;
pub mod synth;

pub use calibration::{fit_mlr, predict, vendor_baseline, CalibrationModel, ModelKind};
pub use data::{
    AlignedRecord, Channel, Dataset, DeploymentLayout, DeviceSeries, Features, PmFraction,
    VendorVariant,
};
pub use fusion::{fuse_aggregate, fuse_median, FusionKind, TrainingSet};
pub use metrics::{evaluate, PerformanceRecord};
