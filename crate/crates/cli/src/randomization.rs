//! Driver for the logic-regression permutation tests: runs them on the
//! prepared data and writes the results plus per-size score histograms.

use std::path::{Path, PathBuf};

use serde::Serialize;

use twostage::dataset::Dataset;
use twostage::glm::WeightSpec;
use twostage::logicreg::{model_size_test, null_signal_test, Family, LogicData, RandTestResult};
use twostage::seed;
use twostage::textfmt::{format_f64, sig17, sig17_vec};
use twostage::Error as CoreError;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandKind {
    NullSignal,
    ModelSize,
}

impl std::str::FromStr for RandKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "null_signal" => Ok(RandKind::NullSignal),
            "model_size" => Ok(RandKind::ModelSize),
            other => Err(format!("unknown randomization test `{other}`")),
        }
    }
}

#[derive(Serialize)]
struct TestDoc {
    k: Option<usize>,
    #[serde(with = "sig17")]
    observed_score: f64,
    #[serde(with = "sig17")]
    reference_score: f64,
    #[serde(with = "sig17")]
    p_value: f64,
    #[serde(with = "sig17_vec")]
    permuted_scores: Vec<f64>,
}

impl From<&RandTestResult> for TestDoc {
    fn from(r: &RandTestResult) -> Self {
        Self {
            k: r.k,
            observed_score: r.observed_score,
            reference_score: r.reference_score,
            p_value: r.p_value,
            permuted_scores: r.permuted_scores.clone(),
        }
    }
}

#[derive(Serialize)]
struct ResultDoc {
    test: String,
    family: Family,
    permutations: usize,
    samples: usize,
    chosen_size: Option<usize>,
    threshold: Option<f64>,
    tests: Vec<TestDoc>,
}

/// What a randomization run wrote.
#[derive(Clone, Debug)]
pub struct RandOutcome {
    pub results: Vec<RandTestResult>,
    pub chosen_size: Option<usize>,
    pub result_file: PathBuf,
    pub histogram_files: Vec<PathBuf>,
}

/// Equal-width bins over the permuted scores (one bin when they coincide).
pub fn histogram(scores: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if scores.is_empty() {
        return Vec::new();
    }
    let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![(lo, hi, scores.len())];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in scores {
        let b = (((s - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (lo + width * b as f64, if b + 1 == bins { hi } else { lo + width * (b + 1) as f64 }, c))
        .collect()
}

fn write_histogram(path: &Path, result: &RandTestResult) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(CoreError::from)?;
    let k = result.k.map(|k| k.to_string()).unwrap_or_else(|| "null".into());
    w.write_record(["k", "bin", "lower", "upper", "count"]).map_err(CoreError::from)?;
    for (b, (lo, hi, c)) in histogram(&result.permuted_scores, HISTOGRAM_BINS).into_iter().enumerate() {
        w.write_record([k.clone(), b.to_string(), format_f64(lo), format_f64(hi), c.to_string()])
            .map_err(CoreError::from)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn run_randomization(
    ds: &Dataset,
    kind: RandKind,
    family: Family,
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> CliResult<RandOutcome> {
    if ds.p() == 0 {
        return Err(CoreError::InvalidDataset("randomization tests need X columns".into()).into());
    }
    let mut data = LogicData::from_dataset(ds)?;
    if cfg.logic.weights != WeightSpec::Unweighted {
        data = data.with_weights(cfg.logic.weights.resolve(&ds.labels())?)?;
    }
    let mut anneal = cfg.logic.anneal.clone();
    anneal.seed = seed::derive(cfg.seed, "randtest");
    let rt = &cfg.randtest;
    let (results, chosen) = match kind {
        RandKind::NullSignal => (vec![null_signal_test(&data, family, &anneal, rt.permutations)?], None),
        RandKind::ModelSize => {
            let r = model_size_test(&data, family, rt.max_size, &anneal, rt.permutations, rt.threshold)?;
            (r.per_size, Some(r.chosen))
        }
    };

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let doc = ResultDoc {
        test: match kind {
            RandKind::NullSignal => "null_signal".into(),
            RandKind::ModelSize => "model_size".into(),
        },
        family,
        permutations: rt.permutations,
        samples: ds.n(),
        chosen_size: chosen,
        threshold: chosen.map(|_| rt.threshold),
        tests: results.iter().map(TestDoc::from).collect(),
    };
    let result_file = out_dir.join("randtest.toml");
    let text = toml::to_string(&doc).expect("randomization result serializes");
    std::fs::write(&result_file, text).map_err(|e| CliError::io(&result_file, e))?;

    let mut histogram_files = Vec::new();
    for r in &results {
        let name = match r.k {
            Some(k) => format!("histogram_k{k}.csv"),
            None => "histogram_null.csv".into(),
        };
        let path = out_dir.join(name);
        write_histogram(&path, r)?;
        histogram_files.push(path);
    }
    Ok(RandOutcome {
        results,
        chosen_size: chosen,
        result_file,
        histogram_files,
    })
}
