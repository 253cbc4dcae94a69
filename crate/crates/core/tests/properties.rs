//! Randomized invariants of the building blocks.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, TimeDelta, TimeZone, Utc};
use fleetcal::calibration::fit_mlr;
use fleetcal::data::{align_with_reference, hourly_average_with, split_weeks, RawSample, ReferenceValues};
use fleetcal::fusion::{fuse_aggregate, fuse_median, TrainingRow, TrainingSet};
use fleetcal::metrics::{mae, r2, rmse, score};
use fleetcal::stats::{
    confidence_interval, jarque_bera, wilcoxon_signed_rank, wilcoxon_signed_rank_with, UncertaintyModel,
    WilcoxonMethod,
};
use fleetcal::{vendor_baseline, AlignedRecord, Channel, DeviceSeries, Features, FusionKind, PmFraction};
use proptest::prelude::*;

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 1, 13, 0, 0, 0).unwrap()
}

fn record(h: i64, pm: f64, rh: f64, truth: f64) -> AlignedRecord {
    let mut features = Features {
        rh,
        ..Features::default()
    };
    features.pm_atmospheric = [0.7 * pm, pm, 1.6 * pm];
    features.pm_standard = features.pm_atmospheric;
    AlignedRecord {
        hour: t0() + TimeDelta::hours(h),
        features,
        coverage: 1.0,
        reference: ReferenceValues {
            pm25: truth,
            pm10: 1.6 * truth,
        },
    }
}

/// Reference truth depends on the hour only, as for colocated devices.
fn truth_at(h: i64) -> f64 {
    10.0 + (h % 17) as f64
}

prop_compose! {
    fn device(max_hours: i64)(hours in prop::collection::btree_set(0..max_hours, 1..40), noise in prop::collection::vec(-3.0..3.0f64, 40)) -> DeviceSeries {
        let records = hours.iter().zip(noise.iter().cycle()).map(|(&h, e)| {
            record(h, truth_at(h) * 1.1 + e, 40.0 + (h % 50) as f64, truth_at(h))
        }).collect();
        DeviceSeries::new("d", records)
    }
}

fn fleet(devices: Vec<DeviceSeries>) -> Vec<DeviceSeries> {
    devices
        .into_iter()
        .enumerate()
        .map(|(i, mut d)| {
            d.device_id = format!("{}", 301 + i);
            d
        })
        .collect()
}

fn set(rows: Vec<TrainingRow>) -> TrainingSet {
    TrainingSet {
        rows,
        fraction: PmFraction::Pm25,
        fusion_kind: FusionKind::Aggregate,
        source_devices: vec!["301".into()],
        hours_covered: 0,
        dropped_hours: 0,
        reference_conflicts: 0,
    }
}

prop_compose! {
    fn rows(min: usize)(raw in prop::collection::vec((0.0..150.0f64, 5.0..100.0f64, -5.0..5.0f64), min..120)) -> Vec<TrainingRow> {
        raw.into_iter().map(|(pm, rh, e)| TrainingRow { pm_vendor: pm, rh, target: 0.8 * pm - 0.05 * rh + 2.0 + e }).collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn single_sample_hours_average_to_themselves(values in prop::collection::vec((0.0..500.0f64, 0.0..100.0f64), 1..50)) {
        let samples: Vec<RawSample> = values.iter().enumerate().map(|(i, &(pm, rh))| {
            let mut features = Features { rh, ..Features::default() };
            features.pm_atmospheric = [pm, pm, pm];
            RawSample { timestamp: t0() + TimeDelta::hours(i as i64) + TimeDelta::minutes(7), features }
        }).collect();
        let hourly = hourly_average_with(&samples, 1.0, 1);
        prop_assert_eq!(hourly.len(), samples.len());
        for (h, s) in hourly.iter().zip(&samples) {
            prop_assert_eq!(h.features, s.features);
            prop_assert_eq!(h.coverage, 1.0);
        }
    }

    #[test]
    fn alignment_is_the_hour_intersection(dev in prop::collection::btree_set(0..200i64, 0..80), refs in prop::collection::btree_set(0..200i64, 0..80)) {
        let samples: Vec<RawSample> = dev.iter().map(|&h| RawSample { timestamp: t0() + TimeDelta::hours(h), features: Features::default() }).collect();
        let reference: BTreeMap<_, _> = refs.iter().map(|&h| (t0() + TimeDelta::hours(h), ReferenceValues { pm25: 1.0, pm10: 2.0 })).collect();
        let hourly = hourly_average_with(&samples, 1.0, 1);
        match align_with_reference("301", &hourly, &reference) {
            Ok(s) => {
                let got: BTreeSet<i64> = s.hours().map(|h| (h - t0()).num_hours()).collect();
                let want: BTreeSet<i64> = dev.intersection(&refs).copied().collect();
                prop_assert_eq!(got, want);
            }
            Err(_) => prop_assert!(dev.intersection(&refs).next().is_none()),
        }
    }

    #[test]
    fn week_slices_partition_the_series(d in device(600)) {
        prop_assume!(d.last_hour().unwrap() - d.first_hour().unwrap() >= TimeDelta::hours(2));
        let w = split_weeks(&d).unwrap();
        let joined = DeviceSeries::concat([w.week(1), w.week(2), w.week(3)]);
        prop_assert_eq!(&joined.records, &d.records);
        for (a, b) in [(1, 2), (2, 3)] {
            if let (Some(x), Some(y)) = (w.week(a).last_hour(), w.week(b).first_hour()) {
                prop_assert!(x < y);
            }
        }
    }

    #[test]
    fn aggregate_keeps_every_row(devs in prop::collection::vec(device(100), 1..6)) {
        let devs = fleet(devs);
        let total: usize = devs.iter().map(DeviceSeries::len).sum();
        let fused = fuse_aggregate(&devs, Channel::pm25()).unwrap();
        prop_assert_eq!(fused.len(), total);
        let refs: Vec<f64> = devs.iter().flat_map(|d| d.records.iter().map(|r| r.reference.pm25)).collect();
        let targets: Vec<f64> = fused.rows.iter().map(|r| r.target).collect();
        prop_assert_eq!(targets, refs);
    }

    #[test]
    fn median_uses_common_hours_and_ignores_order(devs in prop::collection::vec(device(30), 1..6)) {
        let devs = fleet(devs);
        let mut common: BTreeSet<_> = devs[0].hours().collect();
        for d in &devs[1..] {
            let hs: BTreeSet<_> = d.hours().collect();
            common = common.intersection(&hs).copied().collect();
        }
        match fuse_median(&devs, Channel::pm25()) {
            Ok(fused) => {
                prop_assert_eq!(fused.len(), common.len());
                let want: Vec<f64> = common.iter().map(|h| truth_at((*h - t0()).num_hours())).collect();
                let got: Vec<f64> = fused.rows.iter().map(|r| r.target).collect();
                prop_assert_eq!(got, want);
                let mut reversed = devs.clone();
                reversed.reverse();
                prop_assert_eq!(fuse_median(&reversed, Channel::pm25()).unwrap().rows, fused.rows);
            }
            Err(_) => prop_assert!(common.is_empty()),
        }
    }

    #[test]
    fn median_of_identical_devices_is_the_device(d in device(100), n in 1usize..6) {
        let devs = fleet(vec![d.clone(); n]);
        let one = fuse_aggregate(&devs[..1], Channel::pm25()).unwrap();
        let med = fuse_median(&devs, Channel::pm25()).unwrap();
        prop_assert_eq!(med.rows, one.rows);
    }

    #[test]
    fn residuals_are_orthogonal_to_the_design(rows in rows(4)) {
        let m = fit_mlr(&set(rows.clone())).unwrap();
        let resid: Vec<f64> = rows.iter().map(|r| r.target - m.predict(r.pm_vendor, r.rh)).collect();
        let rn = resid.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cols: [Vec<f64>; 3] = [
            rows.iter().map(|r| r.pm_vendor).collect(),
            rows.iter().map(|r| r.rh).collect(),
            vec![1.0; rows.len()],
        ];
        for c in &cols {
            let dot: f64 = c.iter().zip(&resid).map(|(a, b)| a * b).sum();
            let cn = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(dot.abs() <= 1e-8 * cn * rn.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn fit_ignores_row_order(rows in rows(4)) {
        let a = fit_mlr(&set(rows.clone())).unwrap().coefficients();
        let mut rev = rows;
        rev.reverse();
        let b = fit_mlr(&set(rev)).unwrap().coefficients();
        for (x, y) in a.iter().zip(b) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn fitted_r2_beats_vendor_on_training_rows(rows in rows(4)) {
        let m = fit_mlr(&set(rows.clone())).unwrap();
        let v = vendor_baseline(PmFraction::Pm25);
        let truth: Vec<f64> = rows.iter().map(|r| r.target).collect();
        let fitted: Vec<f64> = rows.iter().map(|r| m.predict(r.pm_vendor, r.rh)).collect();
        let vendor: Vec<f64> = rows.iter().map(|r| v.predict(r.pm_vendor, r.rh)).collect();
        let (rf, rv) = (r2(&fitted, &truth).unwrap(), r2(&vendor, &truth).unwrap());
        prop_assert!(rf >= -1e-12);
        prop_assert!(rf >= rv - 1e-12);
    }

    #[test]
    fn prediction_is_affine(rows in rows(4), x1 in (0.0..200.0f64, 0.0..100.0f64), x2 in (0.0..200.0f64, 0.0..100.0f64), alpha in 0.0..1.0f64) {
        let m = fit_mlr(&set(rows)).unwrap();
        let mixed = m.predict(alpha * x1.0 + (1.0 - alpha) * x2.0, alpha * x1.1 + (1.0 - alpha) * x2.1);
        let want = alpha * m.predict(x1.0, x1.1) + (1.0 - alpha) * m.predict(x2.0, x2.1);
        prop_assert!((mixed - want).abs() <= 1e-9 * want.abs().max(1.0));
    }

    #[test]
    fn constant_target_shift_moves_only_the_intercept(rows in rows(4), k in -50.0..50.0f64) {
        let a = fit_mlr(&set(rows.clone())).unwrap().coefficients();
        let shifted: Vec<TrainingRow> = rows.iter().map(|r| TrainingRow { target: r.target + k, ..*r }).collect();
        let b = fit_mlr(&set(shifted)).unwrap().coefficients();
        prop_assert!((a[0] - b[0]).abs() <= 1e-9 * a[0].abs().max(1.0));
        prop_assert!((a[1] - b[1]).abs() <= 1e-9 * a[1].abs().max(1.0));
        prop_assert!((b[2] - a[2] - k).abs() <= 1e-8 * (a[2].abs() + k.abs()).max(1.0));
    }

    #[test]
    fn metric_invariants(pairs in prop::collection::vec((0.0..200.0f64, 0.0..200.0f64), 2..80), shift in -100.0..100.0f64) {
        let (pred, truth): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let s = score(&pred, &truth).unwrap();
        prop_assert!(s.mae <= s.rmse);

        let (rp, rt): (Vec<f64>, Vec<f64>) = pairs.iter().rev().copied().unzip();
        let r = score(&rp, &rt).unwrap();
        for (a, b) in [(s.mae, r.mae), (s.rmse, r.rmse), (s.r2, r.r2), (s.nrmse, r.nrmse), (s.mae_over_range, r.mae_over_range)] {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        let mean = truth.iter().sum::<f64>() / truth.len() as f64;
        let sst: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
        prop_assume!(sst > 1e-6);
        let consistent = 1.0 - s.rmse.powi(2) * truth.len() as f64 / sst;
        prop_assert!((s.r2 - consistent).abs() <= 1e-12 * consistent.abs().max(1.0));

        let sp: Vec<f64> = pred.iter().map(|x| x + shift).collect();
        let st: Vec<f64> = truth.iter().map(|x| x + shift).collect();
        prop_assert!((mae(&sp, &st).unwrap() - s.mae).abs() <= 1e-9);
        prop_assert!((rmse(&sp, &st).unwrap() - s.rmse).abs() <= 1e-9);
    }

    #[test]
    fn wilcoxon_normal_tracks_exact_at_twelve(d in prop::collection::vec(-10.0..10.0f64, 12)) {
        prop_assume!(d.iter().all(|x| *x != 0.0));
        let zeros = [0.0; 12];
        let exact = wilcoxon_signed_rank_with(&d, &zeros, true, WilcoxonMethod::Exact).unwrap();
        let normal = wilcoxon_signed_rank_with(&d, &zeros, true, WilcoxonMethod::Normal).unwrap();
        prop_assert!((exact.p_value - normal.p_value).abs() <= 0.02, "exact {} normal {}", exact.p_value, normal.p_value);
    }

    #[test]
    fn p_values_are_probabilities(x in prop::collection::vec(-5i32..5, 1..40), two_sided in any::<bool>()) {
        let d: Vec<f64> = x.iter().map(|v| f64::from(*v)).collect();
        if let Ok(r) = wilcoxon_signed_rank(&d, &vec![0.0; d.len()], two_sided) {
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            prop_assert!(r.n_effective <= d.len());
        }
    }

    #[test]
    fn ci_widens_with_each_variance(theta in -10.0..10.0f64, vp in 0.0..5.0f64, vc in 0.0..5.0f64, dp in 0.0..5.0f64, dc in 0.0..5.0f64, c in 1u64..500) {
        let width = |vp, vc| {
            let (lo, hi) = confidence_interval(&UncertaintyModel::new(theta, vp, vc, c));
            hi - lo
        };
        let base = width(vp, vc);
        prop_assert!(width(vp + dp, vc) >= base - 1e-12);
        prop_assert!(width(vp, vc + dc) >= base - 1e-12);
    }

    #[test]
    fn jarque_bera_is_affine_invariant(xs in prop::collection::vec(-50.0..50.0f64, 4..200), scale in 0.01..100.0f64, loc in -1e3..1e3f64) {
        let a = jarque_bera(&xs);
        prop_assume!(a.is_ok());
        let a = a.unwrap();
        prop_assume!(a.statistic.is_finite());
        let ys: Vec<f64> = xs.iter().map(|x| scale * x + loc).collect();
        let b = jarque_bera(&ys).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() <= 1e-6 * a.statistic.max(1.0), "{} vs {}", a.statistic, b.statistic);
    }
}
