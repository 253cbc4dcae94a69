//! Plot-ready CSV reports.
//!
//! Every float goes through [`fmt_sig`], so reports are stable text and
//! re-reading a value then writing it again reproduces the same bytes.

use std::io::Write;

use csv::Writer;

use crate::data::{DatasetSummary, PmFraction};
use crate::long_term::{CombinedTable, QuantileTable};
use crate::metrics::{Metric, PerformanceRecord};
use crate::short_term::{ComparisonReport, PerfTensor, TTestKind};
use crate::stats::sample_variance;

/// Significant digits of every float in a report.
pub const SIGNIFICANT_DIGITS: usize = 6;

/// Formats `v` rounded to 6 significant digits in its shortest form.
/// NaN prints as `nan`.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.into();
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
        .parse()
        .expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    rounded.to_string()
}

/// Header token of a quantile probability: `0.25` → `q25`.
pub fn quantile_header(p: f64) -> String {
    let pct = p * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("q{}", pct.round() as i64)
    } else {
        format!("q{}", fmt_sig(pct).replace('.', "_"))
    }
}

fn record_cells(r: Option<&PerformanceRecord>) -> [String; 5] {
    match r {
        Some(r) => [r.mae, r.rmse, r.r2, r.nrmse, r.mae_over_range].map(fmt_sig),
        None => std::array::from_fn(|_| "nan".to_string()),
    }
}

/// One row per `(l, p, n)` cell.
pub fn write_tensor_csv<W: Write>(writer: W, tensor: &PerfTensor) -> csv::Result<()> {
    let mut w = Writer::from_writer(writer);
    w.write_record([
        "method",
        "shuffle",
        "period",
        "n",
        "mae",
        "rmse",
        "r2",
        "nrmse",
        "mae_over_range",
        "test_devices",
        "failed_devices",
        "train_devices",
    ])?;
    for (l, by_period) in tensor.cells.iter().enumerate() {
        for (p, by_n) in by_period.iter().enumerate() {
            for (i, cell) in by_n.iter().enumerate() {
                let mut row = vec![
                    tensor.kind.to_string(),
                    (l + 1).to_string(),
                    tensor.period_names[p].clone(),
                    (i + 1).to_string(),
                ];
                row.extend(record_cells(cell.record.as_ref()));
                row.push(cell.device_scores.len().to_string());
                row.push(cell.failed_devices.to_string());
                row.push(cell.train_devices.join(" "));
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-size significance table: p-values and `p<α` / `p>α` labels.
pub fn write_significance_csv<W: Write>(writer: W, report: &ComparisonReport) -> csv::Result<()> {
    let t_name = match report.t_test {
        TTestKind::Paired => "paired_t",
        TTestKind::Welch => "welch_t",
    };
    let mut w = Writer::from_writer(writer);
    w.write_record([
        "n".to_string(),
        "pairs".into(),
        "periods_contributing".into(),
        "invalid_cells".into(),
        format!("r2_{t_name}_p"),
        "r2_wilcoxon_p".into(),
        format!("mae_{t_name}_p"),
        "mae_wilcoxon_p".into(),
        format!("r2_{t_name}"),
        "r2_wilcoxon".into(),
        format!("mae_{t_name}"),
        "mae_wilcoxon".into(),
    ])?;
    for r in &report.rows {
        let tests = [&r.r2_t, &r.r2_wilcoxon, &r.mae_t, &r.mae_wilcoxon];
        let mut row = vec![
            r.n.to_string(),
            r.pairs.to_string(),
            r.periods_contributing.to_string(),
            r.invalid_cells.to_string(),
        ];
        row.extend(tests.iter().map(|t| fmt_sig(t.p_value().unwrap_or(f64::NAN))));
        row.extend(tests.iter().map(|t| t.label(report.alpha)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean curves with 1-σ and confidence bands per size, method and metric.
pub fn write_bands_csv<W: Write>(writer: W, report: &ComparisonReport) -> csv::Result<()> {
    let mut w = Writer::from_writer(writer);
    w.write_record([
        "n", "method", "metric", "samples", "mean", "sigma", "sigma_low", "sigma_high", "ci_low", "ci_high",
    ])?;
    for b in &report.bands {
        w.write_record([
            b.n.to_string(),
            b.method.to_string(),
            b.metric.token().to_string(),
            b.samples.to_string(),
            fmt_sig(b.mean),
            fmt_sig(b.sigma),
            fmt_sig(b.mean - b.sigma),
            fmt_sig(b.mean + b.sigma),
            fmt_sig(b.ci_low),
            fmt_sig(b.ci_high),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `batch,k,metric,q25,q50,q75` for the default probabilities.
pub fn write_quantile_csv<W: Write>(writer: W, table: &QuantileTable) -> csv::Result<()> {
    let mut w = Writer::from_writer(writer);
    let mut header = vec!["batch".to_string(), "k".into(), "metric".into()];
    header.extend(table.probs.iter().map(|p| quantile_header(*p)));
    w.write_record(&header)?;
    for r in &table.rows {
        let mut row = vec![r.batch.clone(), r.k.to_string(), r.metric.token().to_string()];
        row.extend(r.values.iter().map(|v| fmt_sig(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Global versus ad-hoc quantiles pooled across batches.
pub fn write_combined_csv<W: Write>(writer: W, table: &CombinedTable) -> csv::Result<()> {
    let mut w = Writer::from_writer(writer);
    let mut header = vec!["method".to_string(), "metric".into()];
    header.extend(table.probs.iter().map(|p| quantile_header(*p)));
    w.write_record(&header)?;
    for r in &table.rows {
        let mut row = vec![r.method.to_string(), r.metric.token().to_string()];
        row.extend(r.values.iter().map(|v| fmt_sig(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Vendor-calibration scores of one deployment and fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub deployment: String,
    pub fraction: PmFraction,
    pub records: Vec<PerformanceRecord>,
}

pub const BASELINE_COLUMNS: [&str; 5] = ["MAE", "R²", "RMSE", "NRMSE", "MAE/RANGE"];

/// Mean and sample standard deviation of each indicator.
pub fn write_baseline_csv<W: Write>(writer: W, rows: &[BaselineRow]) -> csv::Result<()> {
    const ORDER: [Metric; 5] = [Metric::Mae, Metric::R2, Metric::Rmse, Metric::Nrmse, Metric::MaeOverRange];
    let mut w = Writer::from_writer(writer);
    let mut header = vec!["deployment", "fraction", "statistic"];
    header.extend(BASELINE_COLUMNS);
    w.write_record(&header)?;
    for r in rows {
        let columns: Vec<Vec<f64>> = ORDER
            .iter()
            .map(|m| r.records.iter().map(|x| x.get(*m)).collect())
            .collect();
        let stat = |name: &str, f: &dyn Fn(&[f64]) -> f64| {
            let mut row = vec![r.deployment.clone(), r.fraction.token().to_string(), name.to_string()];
            row.extend(columns.iter().map(|c| fmt_sig(f(c))));
            row
        };
        let mean = |c: &[f64]| {
            if c.is_empty() {
                f64::NAN
            } else {
                c.iter().sum::<f64>() / c.len() as f64
            }
        };
        let std = |c: &[f64]| {
            if c.len() < 2 {
                f64::NAN
            } else {
                sample_variance(c).sqrt()
            }
        };
        w.write_record(stat("mean", &mean))?;
        w.write_record(stat("std", &std))?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (period, fraction).
pub fn write_summary_csv<W: Write>(writer: W, summary: &DatasetSummary) -> csv::Result<()> {
    let mut w = Writer::from_writer(writer);
    w.write_record([
        "period",
        "fraction",
        "n_positive",
        "n_excluded",
        "lognormal_mu",
        "lognormal_sigma",
        "rh_min",
        "rh_q25",
        "rh_median",
        "rh_q75",
        "rh_max",
    ])?;
    for s in &summary.periods {
        let mut row = vec![
            s.period.clone(),
            s.fraction.token().to_string(),
            s.n_positive.to_string(),
            s.n_excluded.to_string(),
        ];
        row.extend(
            [s.lognormal_mu, s.lognormal_sigma, s.rh_min, s.rh_q25, s.rh_median, s.rh_q75, s.rh_max].map(fmt_sig),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: one row per nonempty (concentration bin, RH bin).
pub fn write_histogram_csv<W: Write>(writer: W, summary: &DatasetSummary) -> csv::Result<()> {
    let mut w = Writer::from_writer(writer);
    w.write_record(["period", "fraction", "conc_lo", "conc_hi", "rh_lo", "rh_hi", "count"])?;
    for s in &summary.periods {
        let h = &s.histogram;
        for (i, row) in h.counts.iter().enumerate() {
            for (j, &count) in row.iter().enumerate() {
                w.write_record([
                    s.period.clone(),
                    s.fraction.token().to_string(),
                    fmt_sig(h.concentration_edges[i]),
                    fmt_sig(h.concentration_edges[i + 1]),
                    fmt_sig(h.rh_edges[j]),
                    fmt_sig(h.rh_edges[j + 1]),
                    count.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
