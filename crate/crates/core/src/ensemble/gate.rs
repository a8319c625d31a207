use serde::{Deserialize, Serialize};

use super::predictions::PredictionSet;
use super::{BaseModel, Source};
use crate::dataset::split::split_labels;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::glm::classify;
use crate::metrics::DEFAULT_THRESHOLD;
use crate::seed;
use crate::svm::{auto_gamma, smo_fit, KernelChoice, Scaling, SvmConfig, SvmModel};

/// Covariates fed to the gate SVM.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GateFeatures {
    /// Every `X` and `Z` column.
    #[default]
    All,
    XOnly,
    ZOnly,
    Named { columns: Vec<String> },
}

impl GateFeatures {
    pub fn label(&self) -> String {
        match self {
            GateFeatures::All => "x+z".into(),
            GateFeatures::XOnly => "x".into(),
            GateFeatures::ZOnly => "z".into(),
            GateFeatures::Named { columns } => columns.join("+"),
        }
    }

    pub fn resolve(&self, ds: &Dataset) -> Result<Vec<String>> {
        let names: Vec<String> = match self {
            GateFeatures::All => ds.x_names().iter().cloned().chain(ds.z_names()).collect(),
            GateFeatures::XOnly => ds.x_names().to_vec(),
            GateFeatures::ZOnly => ds.z_names(),
            GateFeatures::Named { columns } => {
                for c in columns {
                    if ds.column(c).is_none() {
                        return Err(Error::UnknownColumn(c.clone()));
                    }
                }
                columns.clone()
            }
        };
        if names.is_empty() {
            return Err(Error::Config(format!("gate features `{}` select no columns", self.label())));
        }
        Ok(names)
    }
}

/// Cross-validated choice of `C` and a multiplier on the automatic kernel
/// width, scored by balanced accuracy on the held-out folds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateSearch {
    pub c_values: Vec<f64>,
    pub gamma_scales: Vec<f64>,
    pub folds: usize,
}

impl Default for GateSearch {
    fn default() -> Self {
        Self {
            c_values: vec![0.1, 1.0, 10.0],
            gamma_scales: vec![0.1, 1.0, 10.0],
            folds: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    pub features: GateFeatures,
    pub svm: SvmConfig,
    pub search: Option<GateSearch>,
    pub seed: u64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            features: GateFeatures::All,
            svm: SvmConfig {
                class_balanced: true,
                ..SvmConfig::default()
            },
            search: None,
            seed: 1,
        }
    }
}

/// A trained gate: +1 means the base (existing) model is expected to be
/// right for the sample.
#[derive(Clone, Debug, PartialEq)]
pub struct GateModel {
    pub svm: SvmModel,
    pub features: GateFeatures,
    pub feature_names: Vec<String>,
    pub base: Source,
}

impl GateModel {
    pub fn decisions(&self, ds: &Dataset) -> Result<Vec<i8>> {
        let rows = ds.feature_rows(&self.feature_names)?;
        rows.iter().map(|r| self.svm.classify(r)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    Svm(GateModel),
    /// Sends every sample to the existing model.
    PassThrough,
}

impl Gate {
    /// Per-sample decision: +1 routes to the existing model, -1 to the other.
    pub fn decisions(&self, ds: &Dataset) -> Result<Vec<i8>> {
        match self {
            Gate::Svm(g) => g.decisions(ds),
            Gate::PassThrough => Ok(vec![1; ds.n()]),
        }
    }
}

/// +1 where the base prediction is right at the 0.5 threshold, -1 where
/// it is wrong.
pub fn gate_labels(base: &PredictionSet, ds: &Dataset) -> Result<Vec<i8>> {
    base.check_dataset(ds)?;
    Ok(base
        .scores()
        .iter()
        .zip(ds.labels())
        .map(|(&s, y)| if classify(s, DEFAULT_THRESHOLD) == y { 1 } else { -1 })
        .collect())
}

pub fn train_gate(base: &BaseModel, train: &Dataset, cfg: &GateConfig) -> Result<GateModel> {
    let preds = base.predict(train)?;
    train_gate_on(&preds, train, cfg)
}

/// Fit the gate from precomputed base predictions on the training data.
pub fn train_gate_on(base: &PredictionSet, train: &Dataset, cfg: &GateConfig) -> Result<GateModel> {
    let labels = gate_labels(base, train)?;
    let correct = labels.iter().filter(|&&v| v == 1).count();
    let incorrect = labels.len() - correct;
    if correct < 2 || incorrect < 2 {
        return Err(Error::GateDegenerate { correct, incorrect });
    }
    let names = cfg.features.resolve(train)?;
    let rows = train.feature_rows(&names)?;
    let svm_cfg = match &cfg.search {
        Some(search) => search_config(&rows, &labels, &cfg.svm, search, cfg.seed)?,
        None => cfg.svm.clone(),
    };
    let fit = smo_fit(&rows, &labels, &svm_cfg)?;
    Ok(GateModel {
        svm: fit.model,
        features: cfg.features.clone(),
        feature_names: names,
        base: base.kind(),
    })
}

fn with_gamma(kernel: KernelChoice, gamma: f64) -> KernelChoice {
    match kernel {
        KernelChoice::Linear => KernelChoice::Linear,
        KernelChoice::Rbf { .. } => KernelChoice::Rbf { gamma: Some(gamma) },
        KernelChoice::Polynomial { degree, coef0, .. } => KernelChoice::Polynomial {
            degree,
            gamma: Some(gamma),
            coef0,
        },
        KernelChoice::Sigmoid { coef0, .. } => KernelChoice::Sigmoid {
            gamma: Some(gamma),
            coef0,
        },
    }
}

fn base_gamma(kernel: KernelChoice, rows: &[Vec<f64>], standardize: bool) -> f64 {
    let explicit = match kernel {
        KernelChoice::Linear => None,
        KernelChoice::Rbf { gamma }
        | KernelChoice::Polynomial { gamma, .. }
        | KernelChoice::Sigmoid { gamma, .. } => gamma,
    };
    explicit.unwrap_or_else(|| {
        if standardize {
            let s = Scaling::fit(rows);
            auto_gamma(&rows.iter().map(|r| s.apply(r)).collect::<Vec<_>>())
        } else {
            auto_gamma(rows)
        }
    })
}

fn balanced_accuracy(pred: &[i8], truth: &[i8]) -> f64 {
    let mut hit = [0usize; 2];
    let mut total = [0usize; 2];
    for (&p, &t) in pred.iter().zip(truth) {
        let k = usize::from(t == 1);
        total[k] += 1;
        hit[k] += usize::from(p == t);
    }
    let recall = |k: usize| if total[k] == 0 { 0.0 } else { hit[k] as f64 / total[k] as f64 };
    (recall(0) + recall(1)) / 2.0
}

fn search_config(
    rows: &[Vec<f64>],
    labels: &[i8],
    base: &SvmConfig,
    search: &GateSearch,
    seed_value: u64,
) -> Result<SvmConfig> {
    if search.c_values.is_empty() || search.gamma_scales.is_empty() || search.folds < 2 {
        return Err(Error::Config("gate search needs C values, gamma scales and >= 2 folds".into()));
    }
    let gamma0 = base_gamma(base.kernel, rows, base.standardize);
    let as_u8: Vec<u8> = labels.iter().map(|&v| u8::from(v == 1)).collect();
    let fractions = vec![1.0 / search.folds as f64; search.folds];
    let folds = split_labels(&as_u8, &fractions, seed::derive(seed_value, "gate-folds"))?;
    let scales: &[f64] = if base.kernel == KernelChoice::Linear { &[1.0] } else { &search.gamma_scales };

    let mut best: Option<(f64, SvmConfig)> = None;
    for &c in &search.c_values {
        for &scale in scales {
            let cfg = SvmConfig {
                c,
                kernel: with_gamma(base.kernel, gamma0 * scale),
                ..base.clone()
            };
            let mut total = 0.0;
            for held in &folds.parts {
                let train_idx: Vec<usize> = (0..rows.len()).filter(|i| folds.part_of[*i] != folds.part_of[held[0]]).collect();
                let tr_rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| rows[i].clone()).collect();
                let tr_y: Vec<i8> = train_idx.iter().map(|&i| labels[i]).collect();
                let model = match smo_fit(&tr_rows, &tr_y, &cfg) {
                    Ok(f) => f.model,
                    Err(Error::SingleClass) => continue,
                    Err(e) => return Err(e),
                };
                let pred = held.iter().map(|&i| model.classify(&rows[i])).collect::<Result<Vec<_>>>()?;
                let truth: Vec<i8> = held.iter().map(|&i| labels[i]).collect();
                total += balanced_accuracy(&pred, &truth);
            }
            let score = total / folds.parts.len() as f64;
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, cfg));
            }
        }
    }
    let (score, cfg) = best.expect("non-empty grid");
    log::debug!("gate search picked C = {} ({:?}), cv balanced accuracy {score:.4}", cfg.c, cfg.kernel);
    Ok(cfg)
}
