//! Tab-separated results tables and plot data.

use std::fmt::Write;

use super::Bundle;
use crate::curation::GroupTag;
use crate::evaluation::{Metric, MetricReport, MetricSummary, MetricValue};
use crate::models::ModelKind;

pub const UNDEFINED_CELL: &str = "NA(single-class)";
const REFERENCE_AUC: f64 = 0.5;

/// `"0.6726 [0.5512, 0.7890]"` with the given number of decimals.
pub fn format_cell(summary: &MetricSummary, decimals: usize) -> String {
    let point = match summary.point.value() {
        Some(v) => format!("{v:.decimals$}"),
        None => return UNDEFINED_CELL.to_string(),
    };
    let bound = |b: Option<f64>| b.map_or_else(|| "NA".to_string(), |v| format!("{v:.decimals$}"));
    format!("{point} [{}, {}]", bound(summary.ci_low), bound(summary.ci_high))
}

fn plot_number(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

fn rows(bundle: &Bundle, group: GroupTag) -> impl Iterator<Item = (ModelKind, &MetricReport)> {
    bundle
        .models
        .iter()
        .map(move |&m| (m, &bundle.reports[&(group, m)]))
}

fn zero_division_notes(bundle: &Bundle, group: GroupTag, metrics: &[Metric]) -> Vec<String> {
    let mut notes = Vec::new();
    for (model, report) in rows(bundle, group) {
        for &metric in metrics {
            if let MetricValue::ZeroDivision(v) = report.get(metric).point {
                notes.push(format!(
                    "# {} {}: zero denominator, reported as {v}",
                    model.table_label(),
                    metric
                ));
            }
        }
    }
    notes
}

/// Main table for one feature group: AUC, precision and F1 with intervals.
pub fn group_table(bundle: &Bundle, group: GroupTag) -> String {
    let p = &bundle.protocol;
    let mut out = String::new();
    let ci = 100.0 * (1.0 - p.alpha);
    writeln!(
        out,
        "# {group}: out-of-fold predictions ({}-fold, seed {}, threshold {}); {ci}% percentile bootstrap CIs ({} resamples)",
        p.k, p.seed, p.threshold, p.resamples
    )
    .unwrap();
    if bundle.models.contains(&ModelKind::Gbt) {
        writeln!(out, "# XGB: gradient-boosted trees implemented in this tool, not the XGBoost library").unwrap();
    }
    for note in zero_division_notes(bundle, group, &[Metric::Precision, Metric::F1]) {
        writeln!(out, "{note}").unwrap();
    }
    writeln!(out, "model\tAUC [{ci}% CI]\tPrecision [{ci}% CI]\tF1 [{ci}% CI]").unwrap();
    for (model, r) in rows(bundle, group) {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            model.table_label(),
            format_cell(r.get(Metric::Auc), 4),
            format_cell(r.get(Metric::Precision), 3),
            format_cell(r.get(Metric::F1), 3),
        )
        .unwrap();
    }
    out
}

/// Sensitivity, specificity and confusion counts for one feature group.
pub fn extended_table(bundle: &Bundle, group: GroupTag) -> String {
    let ci = 100.0 * (1.0 - bundle.protocol.alpha);
    let mut out = String::new();
    writeln!(out, "# {group}: threshold metrics at p >= {}", bundle.protocol.threshold).unwrap();
    writeln!(out, "model\tSensitivity [{ci}% CI]\tSpecificity [{ci}% CI]\tTP\tFP\tTN\tFN").unwrap();
    for (model, r) in rows(bundle, group) {
        let c = r.confusion;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            model.table_label(),
            format_cell(r.get(Metric::Sensitivity), 3),
            format_cell(r.get(Metric::Specificity), 3),
            c.tp,
            c.fp,
            c.tn,
            c.fn_
        )
        .unwrap();
    }
    out
}

/// AUC point estimates and intervals for every cell, with the reference line.
pub fn auc_plot_data(bundle: &Bundle) -> String {
    let mut out = format!("# reference_auc\t{REFERENCE_AUC}\nmodel\tgroup\tauc\tci_low\tci_high\n");
    for &group in &bundle.groups {
        for (model, r) in rows(bundle, group) {
            let s = r.get(Metric::Auc);
            writeln!(
                out,
                "{}\t{group}\t{}\t{}\t{}",
                model.table_label(),
                plot_number(s.point.value()),
                plot_number(s.ci_low),
                plot_number(s.ci_high)
            )
            .unwrap();
        }
    }
    out
}

pub fn sens_spec_plot_data(bundle: &Bundle) -> String {
    let mut out = String::from(
        "model\tgroup\tsensitivity\tsensitivity_low\tsensitivity_high\tspecificity\tspecificity_low\tspecificity_high\n",
    );
    for &group in &bundle.groups {
        for (model, r) in rows(bundle, group) {
            let se = r.get(Metric::Sensitivity);
            let sp = r.get(Metric::Specificity);
            writeln!(
                out,
                "{}\t{group}\t{}\t{}\t{}\t{}\t{}\t{}",
                model.table_label(),
                plot_number(se.point.value()),
                plot_number(se.ci_low),
                plot_number(se.ci_high),
                plot_number(sp.point.value()),
                plot_number(sp.ci_low),
                plot_number(sp.ci_high)
            )
            .unwrap();
        }
    }
    out
}

pub fn age_histogram_data(bundle: &Bundle) -> String {
    let mut out = String::new();
    match &bundle.summary.age_histogram {
        Some(bins) => {
            writeln!(out, "# n\t{}", bundle.summary.n).unwrap();
            out.push_str("bin_start\tbin_end\tcount\n");
            for b in bins {
                writeln!(out, "{}\t{}\t{}", b.start, b.end, b.count).unwrap();
            }
        }
        None => {
            out.push_str("# age column absent\nbin_start\tbin_end\tcount\n");
        }
    }
    out
}
