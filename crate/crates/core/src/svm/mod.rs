//! Soft-margin support vector machine, trained in the dual by SMO.
//!
//! Features are standardized with training statistics before training:
//! continuous columns are z-scored, 0/1 columns are left alone. The fitted
//! [`SvmModel`] applies the same transform at prediction time.

mod kernel;
mod smo;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textfmt::{sig17, sig17_matrix, sig17_vec};

pub use kernel::{kernel_eval, KernelSpec};

/// Kernel as configured; unset `gamma` values are chosen from the training
/// data as `1 / (d * variance of the standardized features)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelChoice {
    Linear,
    Polynomial {
        degree: u32,
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        coef0: f64,
    },
    Rbf {
        #[serde(default)]
        gamma: Option<f64>,
    },
    Sigmoid {
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        coef0: f64,
    },
}

impl Default for KernelChoice {
    fn default() -> Self {
        KernelChoice::Rbf { gamma: None }
    }
}

impl KernelChoice {
    pub fn resolve(&self, scaled: &[Vec<f64>]) -> KernelSpec {
        let auto = || auto_gamma(scaled);
        match *self {
            KernelChoice::Linear => KernelSpec::Linear,
            KernelChoice::Polynomial { degree, gamma, coef0 } => KernelSpec::Polynomial {
                degree,
                gamma: gamma.unwrap_or_else(auto),
                coef0,
            },
            KernelChoice::Rbf { gamma } => KernelSpec::Rbf {
                gamma: gamma.unwrap_or_else(auto),
            },
            KernelChoice::Sigmoid { gamma, coef0 } => KernelSpec::Sigmoid {
                gamma: gamma.unwrap_or_else(auto),
                coef0,
            },
        }
    }
}

/// `1 / (d * var)` over all entries of the standardized design; 1 when
/// that is undefined.
pub fn auto_gamma(scaled: &[Vec<f64>]) -> f64 {
    let d = scaled.first().map_or(0, Vec::len);
    let count = (scaled.len() * d) as f64;
    if count == 0.0 {
        return 1.0;
    }
    let mean = scaled.iter().flatten().sum::<f64>() / count;
    let var = scaled.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    if var > 0.0 {
        1.0 / (d as f64 * var)
    } else {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c: f64,
    pub kernel: KernelChoice,
    /// Stop when the maximal KKT violation `m - M` falls below this.
    pub tolerance: f64,
    pub max_iter: usize,
    pub standardize: bool,
    /// Scale `C` per class by `n / (2 n_c)`.
    pub class_balanced: bool,
    /// Record the dual objective after every SMO step.
    pub track_objective: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            kernel: KernelChoice::default(),
            tolerance: 1e-3,
            max_iter: 100_000,
            standardize: true,
            class_balanced: false,
            track_objective: false,
        }
    }
}

/// Per-column affine transform `(v - mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    #[serde(with = "sig17_vec")]
    pub mean: Vec<f64>,
    #[serde(with = "sig17_vec")]
    pub scale: Vec<f64>,
}

impl Scaling {
    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    /// z-score continuous columns; columns holding only 0 and 1 pass through.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut out = Self::identity(d);
        for j in 0..d {
            if rows.iter().all(|r| r[j] == 0.0 || r[j] == 1.0) {
                continue;
            }
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / n;
            out.mean[j] = mean;
            out.scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        out
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub c: f64,
    pub scaling: Scaling,
    /// Support vectors in standardized coordinates.
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.scaling.mean.len()
    }

    pub fn decision(&self, sample: &[f64]) -> Result<f64> {
        if sample.len() != self.n_features() {
            return Err(Error::ArityMismatch {
                expected: self.n_features(),
                got: sample.len(),
            });
        }
        let z = self.scaling.apply(sample);
        let sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * self.kernel.apply(sv, &z))
            .sum();
        Ok(sum + self.bias)
    }

    /// Sign of the decision value; exactly 0 counts as +1.
    pub fn classify(&self, sample: &[f64]) -> Result<i8> {
        Ok(if self.decision(sample)? >= 0.0 { 1 } else { -1 })
    }

    pub fn to_text(&self) -> String {
        let doc = SvmDoc {
            model: "svm".into(),
            kernel: self.kernel,
            c: self.c,
            bias: self.bias,
            scaling: self.scaling.clone(),
            dual_coef: self.dual_coef.clone(),
            support_vectors: self.support_vectors.clone(),
        };
        toml::to_string(&doc).expect("svm model serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc: SvmDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.model != "svm" {
            return Err(Error::Parse(format!("expected an svm model, found `{}`", doc.model)));
        }
        let d = doc.scaling.mean.len();
        if doc.scaling.scale.len() != d
            || doc.support_vectors.len() != doc.dual_coef.len()
            || doc.support_vectors.iter().any(|sv| sv.len() != d)
        {
            return Err(Error::Parse("inconsistent svm dimensions".into()));
        }
        Ok(Self {
            kernel: doc.kernel,
            c: doc.c,
            scaling: doc.scaling,
            support_vectors: doc.support_vectors,
            dual_coef: doc.dual_coef,
            bias: doc.bias,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SvmDoc {
    model: String,
    #[serde(with = "sig17")]
    c: f64,
    #[serde(with = "sig17")]
    bias: f64,
    #[serde(with = "sig17_vec")]
    dual_coef: Vec<f64>,
    #[serde(with = "sig17_matrix")]
    support_vectors: Vec<Vec<f64>>,
    kernel: KernelSpec,
    scaling: Scaling,
}

/// A trained model plus the full dual solution.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmFit {
    pub model: SvmModel,
    /// Dual variable of every training sample.
    pub alphas: Vec<f64>,
    /// Box bound `C_i` of every training sample.
    pub upper: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Dual objective after each step (empty unless tracked).
    pub objective_trace: Vec<f64>,
}

/// Train on rows `x` with labels in {-1, +1}.
pub fn smo_fit(x: &[Vec<f64>], y: &[i8], cfg: &SvmConfig) -> Result<SvmFit> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidDataset("no training samples".into()));
    }
    if y.len() != n {
        return Err(Error::ArityMismatch { expected: n, got: y.len() });
    }
    let d = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(Error::ArityMismatch { expected: d, got: bad.len() });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("features must be finite".into()));
    }
    if y.iter().any(|&v| v != 1 && v != -1) {
        return Err(Error::Precondition("labels must be -1 or +1".into()));
    }
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::SingleClass);
    }
    if !(cfg.c.is_finite() && cfg.c > 0.0) {
        return Err(Error::Config(format!("C must be positive, got {}", cfg.c)));
    }
    if !(cfg.tolerance > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }

    let scaling = if cfg.standardize { Scaling::fit(x) } else { Scaling::identity(d) };
    let scaled: Vec<Vec<f64>> = x.iter().map(|r| scaling.apply(r)).collect();
    let kernel = cfg.kernel.resolve(&scaled);
    kernel.validate()?;
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let upper: Vec<f64> = if cfg.class_balanced {
        let w_pos = n as f64 / (2.0 * n_pos as f64);
        let w_neg = n as f64 / (2.0 * (n - n_pos) as f64);
        y.iter().map(|&v| cfg.c * if v == 1 { w_pos } else { w_neg }).collect()
    } else {
        vec![cfg.c; n]
    };

    let out = smo::solve(&smo::SmoProblem {
        x: &scaled,
        y: &yf,
        upper: &upper,
        kernel,
        tolerance: cfg.tolerance,
        max_iter: cfg.max_iter,
        track_objective: cfg.track_objective,
    });
    if !out.converged {
        log::warn!("SMO stopped at the iteration cap ({}) before convergence", cfg.max_iter);
    }
    let support: Vec<usize> = (0..n).filter(|&i| out.alpha[i] > 0.0).collect();
    let model = SvmModel {
        kernel,
        c: cfg.c,
        scaling,
        support_vectors: support.iter().map(|&i| scaled[i].clone()).collect(),
        dual_coef: support.iter().map(|&i| out.alpha[i] * yf[i]).collect(),
        bias: out.bias,
    };
    Ok(SvmFit {
        model,
        alphas: out.alpha,
        upper,
        iterations: out.iterations,
        converged: out.converged,
        objective_trace: out.objective_trace,
    })
}
