//! Subcommand implementations, kept separate from argument parsing so they
//! can be driven from tests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use twostage::dataset::{generate_synthetic, load_csv, save_csv, Schema, SyntheticConfig};
use twostage::ensemble::PredictionSet;
use twostage::glm::LogisticModel;
use twostage::logicreg::{Family, LogicModel};
use twostage::metrics::{evaluate as evaluate_scores, format_percent, MetricsReport, DEFAULT_THRESHOLD};
use twostage::svm::{KernelSpec, SvmModel};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::experiment::{default_schema_path, prepare_data, run_experiment, RunOutcome};
use crate::randomization::{run_randomization, RandKind, RandOutcome};
use crate::report::{self, ReportFormat};

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Generate a synthetic dataset and write it with its schema
/// (`<out>.schema.toml`). Returns the schema path.
pub fn simulate(cfg: &SyntheticConfig, out: &Path) -> CliResult<PathBuf> {
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let ds = generate_synthetic(cfg)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    save_csv(&ds, out)?;
    let schema_path = default_schema_path(out);
    Schema::for_dataset(&ds).write(&schema_path)?;
    Ok(schema_path)
}

pub fn load_synthetic_config(path: Option<&Path>) -> CliResult<SyntheticConfig> {
    match path {
        None => Ok(SyntheticConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
        }
    }
}

/// Run an experiment and write its outputs under `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path, formats: &[ReportFormat]) -> CliResult<RunOutcome> {
    let outcome = run_experiment(cfg)?;
    write_outputs(&outcome, cfg, out_dir, formats)?;
    Ok(outcome)
}

pub fn write_outputs(outcome: &RunOutcome, cfg: &ExperimentConfig, out_dir: &Path, formats: &[ReportFormat]) -> CliResult<()> {
    for f in formats {
        match f {
            ReportFormat::Csv => write_file(&out_dir.join("report.csv"), &report::to_csv(&outcome.report))?,
            ReportFormat::Text => write_file(&out_dir.join("report.txt"), &report::to_text(&outcome.report))?,
        }
    }
    write_file(&out_dir.join("config.toml"), &cfg.to_toml())?;
    let pred_dir = out_dir.join("predictions");
    std::fs::create_dir_all(&pred_dir).map_err(|e| CliError::io(&pred_dir, e))?;
    for ((recipe, partition), preds) in &outcome.predictions {
        preds.write_csv(pred_dir.join(format!("{partition}_{recipe}.csv")))?;
    }
    for (partition, preds) in &outcome.oracle {
        preds.write_csv(pred_dir.join(format!("{partition}_oracle.csv")))?;
    }
    for (stem, text) in &outcome.models {
        write_file(&out_dir.join("models").join(format!("{stem}.toml")), text)?;
    }
    Ok(())
}

pub fn randtest(cfg: &ExperimentConfig, kind: RandKind, family: Family, out_dir: &Path) -> CliResult<RandOutcome> {
    cfg.validate()?;
    let ds = prepare_data(cfg)?;
    run_randomization(&ds, kind, family, cfg, out_dir)
}

/// Metrics of a prediction CSV against the labels of a dataset.
pub fn evaluate(predictions: &Path, data: &Path, schema: Option<&Path>) -> CliResult<MetricsReport> {
    let preds = PredictionSet::read_csv(predictions)?;
    let schema_path = schema.map(Path::to_path_buf).unwrap_or_else(|| default_schema_path(data));
    let (ds, _) = load_csv(data, &Schema::from_file(&schema_path)?)?;
    // Match by id so the prediction file may list samples in any order or
    // cover only a subset.
    let index: std::collections::HashMap<&str, usize> =
        ds.samples().iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let labels = ds.labels();
    let truth = preds
        .ids()
        .iter()
        .map(|id| {
            index
                .get(id.as_str())
                .map(|&i| labels[i])
                .ok_or_else(|| twostage::Error::SampleMismatch(format!("sample `{id}` is not in the data")))
        })
        .collect::<twostage::Result<Vec<u8>>>()?;
    Ok(evaluate_scores(preds.scores(), &truth, DEFAULT_THRESHOLD)?)
}

pub fn format_metrics(m: &MetricsReport, format: ReportFormat) -> String {
    let rows = [
        ("auROC", m.auroc),
        ("acc", m.accuracy),
        ("fn", m.fn_rate),
        ("fp", m.fp_rate),
    ];
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str("metric,percent\n");
            for (name, v) in rows {
                let _ = writeln!(out, "{name},{}", format_percent(v));
            }
        }
        ReportFormat::Text => {
            let _ = writeln!(out, "samples: {} positive, {} negative", m.n_pos, m.n_neg);
            for (name, v) in rows {
                let _ = writeln!(out, "{name:<6} {:>7}", format_percent(v));
            }
        }
    }
    out
}

/// Human-readable rendering of a saved model file.
pub fn inspect(path: &Path) -> CliResult<String> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| twostage::Error::Parse(e.to_string()))?;
    let kind = table.get("model").and_then(|v| v.as_str()).unwrap_or_default();
    let mut out = String::new();
    match kind {
        "logistic" => {
            let m = LogisticModel::from_text(&text)?;
            let _ = writeln!(out, "logistic model ({} weighting)", m.weighting);
            let _ = writeln!(out, "  {:<24} {:>12.6}", "(intercept)", m.intercept);
            for (n, b) in m.names.iter().zip(&m.coefficients) {
                let _ = writeln!(out, "  {n:<24} {b:>12.6}");
            }
            let d = &m.diagnostics;
            let _ = writeln!(
                out,
                "  deviance {:.6}, {} iterations, converged {}, separated {}",
                d.deviance, d.iterations, d.converged, d.separated
            );
        }
        "logic" => {
            let m = LogicModel::from_text(&text)?;
            let _ = writeln!(out, "logic model, {} family, score {:.6}", m.family.name(), m.score);
            let _ = writeln!(out, "  intercept {:.6}", m.coefficients[0]);
            for (t, b) in m.trees.iter().zip(&m.coefficients[1..]) {
                let _ = writeln!(out, "  {b:>10.6} * [{}]  ({} leaves)", t.to_prefix(), t.leaf_count());
            }
        }
        "svm" => {
            let m = SvmModel::from_text(&text)?;
            let kernel = match m.kernel {
                KernelSpec::Linear => "linear".to_string(),
                KernelSpec::Polynomial { degree, gamma, coef0 } => {
                    format!("polynomial (degree {degree}, gamma {gamma:.6}, coef0 {coef0})")
                }
                KernelSpec::Rbf { gamma } => format!("rbf (gamma {gamma:.6})"),
                KernelSpec::Sigmoid { gamma, coef0 } => format!("sigmoid (gamma {gamma:.6}, coef0 {coef0})"),
            };
            let _ = writeln!(out, "svm, {kernel} kernel, C = {}", m.c);
            let _ = writeln!(out, "  {} features, {} support vectors, bias {:.6}", m.n_features(), m.support_vectors.len(), m.bias);
        }
        other => {
            return Err(twostage::Error::Parse(format!("unknown model kind `{other}`")).into());
        }
    }
    Ok(out)
}
