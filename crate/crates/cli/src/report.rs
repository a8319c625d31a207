//! Report emission: a machine-readable CSV and a text table with models as
//! columns and metrics as rows, one block per partition.

use std::fmt::Write as _;

use twostage::metrics::{format_percent, MetricsReport};

use crate::config::Recipe;
use crate::error::{CliError, CliResult};
use crate::experiment::{Partition, RecipeStatus, RunReport};

pub const METRICS: [&str; 4] = ["auROC", "acc", "fn", "fp"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Text,
}

fn metric_value(m: &MetricsReport, metric: &str) -> Option<f64> {
    match metric {
        "auROC" => m.auroc,
        "acc" => m.accuracy,
        "fn" => m.fn_rate,
        "fp" => m.fp_rate,
        _ => None,
    }
}

/// One CSV line: a percentage with two decimals, or `NA`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub recipe: Recipe,
    pub partition: Partition,
    pub metric: String,
    pub value: Option<f64>,
    pub status: String,
}

pub fn report_rows(report: &RunReport) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for entry in &report.entries {
        for p in Partition::ALL {
            for metric in METRICS {
                let (value, status) = match &entry.status {
                    RecipeStatus::Ok(m) => {
                        let text = format_percent(m.get(&p).and_then(|m| metric_value(m, metric)));
                        (text.parse::<f64>().ok(), "ok".to_string())
                    }
                    RecipeStatus::Failed(reason) => (None, format!("failed: {reason}")),
                };
                rows.push(ReportRow {
                    recipe: entry.recipe,
                    partition: p,
                    metric: metric.to_string(),
                    value,
                    status,
                });
            }
        }
    }
    rows
}

fn value_text(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.2}"),
        None => "NA".into(),
    }
}

pub fn to_csv(report: &RunReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["recipe", "partition", "metric", "percent", "status"])
        .expect("in-memory write");
    for row in report_rows(report) {
        w.write_record([
            row.recipe.as_str(),
            row.partition.as_str(),
            &row.metric,
            &value_text(row.value),
            &row.status,
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn parse_csv(text: &str) -> CliResult<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(twostage::Error::from)?;
        let bad = |m: String| CliError::Core(twostage::Error::MalformedRow { line: k + 2, message: m });
        if rec.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", rec.len())));
        }
        let recipe = rec[0].parse::<Recipe>().map_err(bad)?;
        let partition = Partition::parse(&rec[1]).ok_or_else(|| bad(format!("unknown partition `{}`", &rec[1])))?;
        let value = match &rec[3] {
            "NA" => None,
            v => Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
        };
        rows.push(ReportRow {
            recipe,
            partition,
            metric: rec[2].to_string(),
            value,
            status: rec[4].to_string(),
        });
    }
    Ok(rows)
}

pub fn to_text(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Two-stage experiment report");
    let _ = writeln!(out, "config sha256: {}", report.config_hash);
    let _ = writeln!(out, "seed: {}", report.seed);
    let _ = writeln!(out, "twostage version: {}", report.version);
    let _ = writeln!(out, "gate features: {}", report.gate_features);

    let names: Vec<&str> = report.entries.iter().map(|e| e.recipe.as_str()).collect();
    let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(8);
    let rows = report_rows(report);
    for p in Partition::ALL {
        let n = report.sample_counts.get(&p).copied().unwrap_or(0);
        let _ = writeln!(out, "\n{} (n = {n}), percent", p.title());
        let _ = write!(out, "{:<8}", "metric");
        for name in &names {
            let _ = write!(out, "  {name:>width$}");
        }
        out.push('\n');
        for metric in METRICS {
            let _ = write!(out, "{metric:<8}");
            for entry in &report.entries {
                let cell = rows
                    .iter()
                    .find(|r| r.recipe == entry.recipe && r.partition == p && r.metric == metric)
                    .map(|r| match &entry.status {
                        RecipeStatus::Ok(_) => value_text(r.value),
                        RecipeStatus::Failed(_) => "failed".into(),
                    })
                    .unwrap_or_default();
                let _ = write!(out, "  {cell:>width$}");
            }
            out.push('\n');
        }
        if let Some(counts) = report.routing.get(&p) {
            let parts: Vec<String> = counts.iter().map(|(s, c)| format!("{s} {c}")).collect();
            let _ = writeln!(out, "gate routing: {}", parts.join(", "));
        }
    }

    let failed: Vec<_> = report
        .entries
        .iter()
        .filter_map(|e| match &e.status {
            RecipeStatus::Failed(reason) => Some((e.recipe, reason)),
            RecipeStatus::Ok(_) => None,
        })
        .collect();
    if !failed.is_empty() {
        let _ = writeln!(out, "\nFailures");
        for (r, reason) in failed {
            let _ = writeln!(out, "  {r}: {reason}");
        }
    }
    if !report.notes.is_empty() {
        let _ = writeln!(out, "\nNotes");
        for note in &report.notes {
            let _ = writeln!(out, "  {note}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::RecipeEntry;
    use std::collections::BTreeMap;

    fn sample_report() -> RunReport {
        let m = MetricsReport {
            auroc: Some(0.8125),
            accuracy: Some(2.0 / 3.0),
            fn_rate: None,
            fp_rate: Some(0.00125),
            n_pos: 0,
            n_neg: 3,
        };
        let ok: BTreeMap<_, _> = Partition::ALL.into_iter().map(|p| (p, m)).collect();
        RunReport {
            config_hash: "abc".into(),
            seed: 3,
            version: "0.0.0".into(),
            gate_features: "x+z".into(),
            sample_counts: Partition::ALL.into_iter().map(|p| (p, 3)).collect(),
            entries: vec![
                RecipeEntry {
                    recipe: Recipe::Clinical,
                    status: RecipeStatus::Ok(ok),
                },
                RecipeEntry {
                    recipe: Recipe::Composite,
                    status: RecipeStatus::Failed("rank-deficient, x1".into()),
                },
            ],
            routing: BTreeMap::new(),
            notes: vec!["a note".into()],
        }
    }

    #[test]
    fn csv_shape_and_round_trip() {
        let report = sample_report();
        let text = to_csv(&report);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.len(), 2 * 2 * 4);
        assert_eq!(parsed, report_rows(&report));
        let auroc = &parsed[0];
        assert_eq!((auroc.metric.as_str(), auroc.value), ("auROC", Some(81.25)));
        assert_eq!(parsed[1].value, Some(66.67));
        assert_eq!(parsed[2].value, None);
        assert_eq!(parsed[3].value, Some(0.12));
        assert!(parsed[8].status.starts_with("failed: rank-deficient"));
    }

    #[test]
    fn text_table_marks_failures() {
        let text = to_text(&sample_report());
        assert!(text.contains("Training/Test samples (n = 3)"));
        assert!(text.contains("failed"));
        assert!(text.contains("composite: rank-deficient, x1"));
        assert!(text.contains("81.25"));
    }
}
