//! Weighted logistic regression by iteratively reweighted least squares.
//!
//! Linear predictors are clamped to `[-35, 35]` before the inverse logit.
//! IRLS stops when the relative deviance change drops below `1e-9` (and the
//! score vector is negligible) or after 100 iterations. A coefficient whose
//! magnitude passes 30 is taken as a sign of complete separation; the fit is
//! then redone with a `1e-4` ridge penalty and flagged `separated`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textfmt::{sig17, sig17_vec};

pub const ETA_CLAMP: f64 = 35.0;
pub const SEPARATION_LIMIT: f64 = 30.0;
pub const SEPARATION_RIDGE: f64 = 1e-4;

#[inline]
pub fn sigmoid(eta: f64) -> f64 {
    let eta = eta.clamp(-ETA_CLAMP, ETA_CLAMP);
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(p / (1 - p))`, clamped to the same range as linear predictors.
pub fn logit(p: f64) -> f64 {
    if p <= 0.0 {
        -ETA_CLAMP
    } else if p >= 1.0 {
        ETA_CLAMP
    } else {
        (p / (1.0 - p)).ln().clamp(-ETA_CLAMP, ETA_CLAMP)
    }
}

/// 1 iff `probability >= threshold`.
pub fn classify(probability: f64, threshold: f64) -> u8 {
    u8::from(probability >= threshold)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", content = "weights", rename_all = "snake_case")]
pub enum WeightSpec {
    #[default]
    Unweighted,
    /// Each class receives total weight `n / 2`: weight `n / (2 n_c)` per sample.
    ClassBalanced,
    Explicit(Vec<f64>),
}

impl WeightSpec {
    pub fn resolve(&self, y: &[u8]) -> Result<Vec<f64>> {
        let n = y.len();
        match self {
            WeightSpec::Unweighted => Ok(vec![1.0; n]),
            WeightSpec::ClassBalanced => {
                let n1 = y.iter().filter(|&&v| v == 1).count();
                let n0 = n - n1;
                if n0 == 0 || n1 == 0 {
                    return Err(Error::SingleClass);
                }
                let w0 = n as f64 / (2.0 * n0 as f64);
                let w1 = n as f64 / (2.0 * n1 as f64);
                Ok(y.iter().map(|&v| if v == 1 { w1 } else { w0 }).collect())
            }
            WeightSpec::Explicit(w) => {
                if w.len() != n {
                    return Err(Error::ArityMismatch {
                        expected: n,
                        got: w.len(),
                    });
                }
                if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::Precondition("weights must be positive".into()));
                }
                Ok(w.clone())
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            WeightSpec::Unweighted => "unweighted",
            WeightSpec::ClassBalanced => "class_balanced",
            WeightSpec::Explicit(_) => "explicit",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub separated: bool,
    #[serde(with = "sig17")]
    pub deviance: f64,
    #[serde(with = "sig17")]
    pub gradient_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    pub names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub weighting: String,
    pub diagnostics: FitDiagnostics,
}

impl LogisticModel {
    /// Model with given coefficients and no fitting history.
    pub fn from_coefficients(names: Vec<String>, intercept: f64, coefficients: Vec<f64>) -> Self {
        Self {
            names,
            intercept,
            coefficients,
            weighting: "unweighted".into(),
            diagnostics: FitDiagnostics {
                iterations: 0,
                converged: true,
                separated: false,
                deviance: f64::NAN,
                gradient_norm: f64::NAN,
            },
        }
    }

    pub fn linear_predictor(&self, sample: &[f64]) -> Result<f64> {
        if sample.len() != self.coefficients.len() {
            return Err(Error::ArityMismatch {
                expected: self.coefficients.len(),
                got: sample.len(),
            });
        }
        Ok(self.intercept
            + sample
                .iter()
                .zip(&self.coefficients)
                .map(|(a, b)| a * b)
                .sum::<f64>())
    }

    pub fn predict_design(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.coefficients.len() {
            return Err(Error::ArityMismatch {
                expected: self.coefficients.len(),
                got: x.ncols(),
            });
        }
        Ok((0..x.nrows())
            .map(|i| {
                let eta = self.intercept
                    + (0..x.ncols()).map(|j| x[(i, j)] * self.coefficients[j]).sum::<f64>();
                sigmoid(eta)
            })
            .collect())
    }

    /// Parameter count including the intercept.
    pub fn n_params(&self) -> usize {
        self.coefficients.len() + 1
    }

    pub fn to_text(&self) -> String {
        let doc = LogisticDoc {
            model: "logistic".into(),
            names: self.names.clone(),
            intercept: self.intercept,
            coefficients: self.coefficients.clone(),
            weighting: self.weighting.clone(),
            diagnostics: self.diagnostics.clone(),
        };
        toml::to_string(&doc).expect("logistic model serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc: LogisticDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.model != "logistic" {
            return Err(Error::Parse(format!("expected a logistic model, found `{}`", doc.model)));
        }
        if doc.names.len() != doc.coefficients.len() {
            return Err(Error::Parse("names and coefficients differ in length".into()));
        }
        Ok(Self {
            names: doc.names,
            intercept: doc.intercept,
            coefficients: doc.coefficients,
            weighting: doc.weighting,
            diagnostics: doc.diagnostics,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LogisticDoc {
    model: String,
    names: Vec<String>,
    #[serde(with = "sig17")]
    intercept: f64,
    #[serde(with = "sig17_vec")]
    coefficients: Vec<f64>,
    weighting: String,
    diagnostics: FitDiagnostics,
}

/// Inverse logit of the model's linear predictor for one sample.
pub fn predict_prob(model: &LogisticModel, sample: &[f64]) -> Result<f64> {
    Ok(sigmoid(model.linear_predictor(sample)?))
}

/// Weighted binomial log-likelihood; `beta[0]` is the intercept and `x` has
/// no intercept column. `y` may hold proportions in `[0, 1]`.
pub fn log_likelihood(beta: &[f64], x: &DMatrix<f64>, y: &[f64], w: &[f64]) -> f64 {
    (0..x.nrows())
        .map(|i| {
            let eta = beta[0] + (0..x.ncols()).map(|j| x[(i, j)] * beta[j + 1]).sum::<f64>();
            // log p = -log(1 + e^-eta), log(1-p) = -log(1 + e^eta)
            let log_p = -softplus(-eta);
            let log_q = -softplus(eta);
            w[i] * (y[i] * log_p + (1.0 - y[i]) * log_q)
        })
        .sum()
}

/// Analytic gradient of [`log_likelihood`]: `sum_i w_i (y_i - p_i) [1, x_i]`.
pub fn gradient(beta: &[f64], x: &DMatrix<f64>, y: &[f64], w: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.ncols() + 1];
    for i in 0..x.nrows() {
        let eta = beta[0] + (0..x.ncols()).map(|j| x[(i, j)] * beta[j + 1]).sum::<f64>();
        let r = w[i] * (y[i] - 1.0 / (1.0 + (-eta).exp()));
        g[0] += r;
        for j in 0..x.ncols() {
            g[j + 1] += r * x[(i, j)];
        }
    }
    g
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `-2 [y ln p + (1 - y) ln(1 - p)]` with `p` kept inside the link clamp.
pub(crate) fn binomial_loss(y: f64, p: f64) -> f64 {
    let lo = sigmoid(-ETA_CLAMP);
    let p = p.clamp(lo, 1.0 - lo);
    let mut d = 0.0;
    if y > 0.0 {
        d -= y * p.ln();
    }
    if y < 1.0 {
        d -= (1.0 - y) * (1.0 - p).ln();
    }
    2.0 * d
}

/// Binomial deviance contribution with `p` already clamped away from 0/1.
#[inline]
pub(crate) fn unit_deviance(y: f64, p: f64) -> f64 {
    let mut d = 0.0;
    if y > 0.0 {
        d += y * (y / p).ln();
    }
    if y < 1.0 {
        d += (1.0 - y) * ((1.0 - y) / (1.0 - p)).ln();
    }
    2.0 * d
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct IrlsOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub ridge: f64,
    /// Penalize the intercept as well (only used for separated refits).
    pub ridge_intercept: bool,
    /// Stop early when any coefficient exceeds this magnitude.
    pub divergence_limit: Option<f64>,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            rel_tol: 1e-9,
            ridge: 0.0,
            ridge_intercept: false,
            divergence_limit: Some(SEPARATION_LIMIT),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct IrlsOutcome {
    pub beta: Vec<f64>,
    /// Unpenalized weighted deviance.
    pub deviance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub gradient_norm: f64,
}

/// Row-major design `x` (`n × k`, column 0 is the intercept).
pub(crate) fn irls(x: &[f64], n: usize, k: usize, y: &[f64], w: &[f64], opts: IrlsOptions) -> IrlsOutcome {
    let wsum: f64 = w.iter().sum();
    let ybar = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wsum.max(f64::MIN_POSITIVE);
    let mut beta = vec![0.0; k];
    beta[0] = logit(ybar);
    let penalized = |j: usize| opts.ridge > 0.0 && (j > 0 || opts.ridge_intercept);

    let objective = |beta: &[f64]| -> (f64, f64) {
        let mut dev = 0.0;
        for i in 0..n {
            let row = &x[i * k..(i + 1) * k];
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            dev += w[i] * unit_deviance(y[i], sigmoid(eta));
        }
        let pen: f64 = (0..k).filter(|&j| penalized(j)).map(|j| beta[j] * beta[j]).sum();
        (dev, dev + opts.ridge * pen)
    };

    let (mut dev, mut obj) = objective(&beta);
    let mut iterations = 0;
    let mut converged = false;
    let mut diverged = false;
    let mut grad = vec![0.0; k];
    let mut hess = vec![0.0; k * k];
    let mut grad_norm = f64::INFINITY;
    let mut factor = vec![0.0; k * k];
    let mut step = vec![0.0; k];
    let mut candidate = beta.clone();

    while iterations < opts.max_iter {
        iterations += 1;
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.iter_mut().for_each(|h| *h = 0.0);
        for i in 0..n {
            let row = &x[i * k..(i + 1) * k];
            let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let p = sigmoid(eta);
            let r = w[i] * (y[i] - p);
            let v = w[i] * p * (1.0 - p);
            for a in 0..k {
                grad[a] += r * row[a];
                if v > 0.0 {
                    for b in 0..=a {
                        hess[a * k + b] += v * row[a] * row[b];
                    }
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                hess[b * k + a] = hess[a * k + b];
            }
            if penalized(a) {
                grad[a] -= opts.ridge * beta[a];
                hess[a * k + a] += opts.ridge;
            }
        }
        grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !solve_spd_into(&hess, &grad, k, &mut factor, &mut step) {
            break;
        }

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            for j in 0..k {
                candidate[j] = beta[j] + t * step[j];
            }
            let (d_new, o_new) = objective(&candidate);
            if o_new <= obj + 1e-12 * obj.abs().max(1.0) {
                let rel = (obj - o_new).abs() / (o_new.abs() + 0.1);
                beta.copy_from_slice(&candidate);
                dev = d_new;
                obj = o_new;
                accepted = true;
                if rel < opts.rel_tol && grad_norm < 1e-7 * wsum.max(1.0) {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if let Some(limit) = opts.divergence_limit {
            if beta.iter().any(|b| b.abs() > limit) {
                diverged = true;
                break;
            }
        }
        if !accepted {
            // No descent possible at machine precision: we are at the optimum.
            converged = grad_norm < 1e-6 * wsum.max(1.0);
            break;
        }
        if converged {
            break;
        }
    }
    IrlsOutcome {
        beta,
        deviance: dev,
        iterations,
        converged,
        diverged,
        gradient_norm: grad_norm,
    }
}

/// Solve `a x = b` for symmetric positive (semi)definite `a` by Cholesky,
/// adding diagonal jitter when the factorization breaks down.
pub(crate) fn solve_spd(a: &[f64], b: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; k * k];
    let mut z = vec![0.0; k];
    solve_spd_into(a, b, k, &mut l, &mut z).then_some(z)
}

/// [`solve_spd`] with caller-provided factor (`k * k`) and solution (`k`)
/// buffers, for hot loops.
pub(crate) fn solve_spd_into(a: &[f64], b: &[f64], k: usize, l: &mut [f64], z: &mut [f64]) -> bool {
    let scale = (0..k).map(|i| a[i * k + i].abs()).fold(0.0, f64::max).max(1e-300);
    for jitter in [0.0, 1e-12, 1e-10, 1e-8, 1e-6] {
        if cholesky(a, k, jitter * scale, l) {
            z.copy_from_slice(b);
            for i in 0..k {
                let s: f64 = (0..i).map(|j| l[i * k + j] * z[j]).sum();
                z[i] = (z[i] - s) / l[i * k + i];
            }
            for i in (0..k).rev() {
                let s: f64 = (i + 1..k).map(|j| l[j * k + i] * z[j]).sum();
                z[i] = (z[i] - s) / l[i * k + i];
            }
            if z.iter().all(|v| v.is_finite()) {
                return true;
            }
        }
    }
    false
}

fn cholesky(a: &[f64], k: usize, jitter: f64, l: &mut [f64]) -> bool {
    l.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            if i == j {
                s += jitter;
            }
            for m in 0..j {
                s -= l[i * k + m] * l[j * k + m];
            }
            if i == j {
                if s <= 1e-14 * (a[i * k + i].abs() + jitter).max(1e-300) {
                    return false;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    true
}

fn with_intercept(x: &DMatrix<f64>) -> Vec<f64> {
    let (n, p) = x.shape();
    let k = p + 1;
    let mut out = vec![0.0; n * k];
    for i in 0..n {
        out[i * k] = 1.0;
        for j in 0..p {
            out[i * k + j + 1] = x[(i, j)];
        }
    }
    out
}

/// Check that `[1, x]` has full column rank; name the first dependent column.
pub fn check_rank(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let (n, p) = x.shape();
    for j in 0..p {
        if (0..n).all(|i| x[(i, j)] == 0.0) {
            return Err(Error::ZeroColumn(names[j].clone()));
        }
    }
    let mut label = vec!["(intercept)".to_string()];
    label.extend(names.iter().cloned());
    let cols: Vec<Vec<f64>> = std::iter::once(vec![1.0; n])
        .chain((0..p).map(|j| (0..n).map(|i| x[(i, j)]).collect()))
        .collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    for (c, col) in cols.iter().enumerate() {
        let norm0 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = col.clone();
        // Two passes of modified Gram-Schmidt for stability.
        for _ in 0..2 {
            for q in &basis {
                let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm <= 1e-9 * norm0.max(1e-300) {
            // Express the column in terms of the kept ones to name the culprits.
            let k = kept.len();
            let mut gram = vec![0.0; k * k];
            let mut rhs = vec![0.0; k];
            for (a, &ca) in kept.iter().enumerate() {
                rhs[a] = cols[ca].iter().zip(col).map(|(u, w)| u * w).sum();
                for (b, &cb) in kept.iter().enumerate() {
                    gram[a * k + b] = cols[ca].iter().zip(&cols[cb]).map(|(u, w)| u * w).sum();
                }
            }
            let coef = solve_spd(&gram, &rhs, k).unwrap_or_else(|| vec![1.0; k]);
            let with = kept
                .iter()
                .zip(&coef)
                .filter(|(_, c)| c.abs() > 1e-6)
                .map(|(&i, _)| label[i].clone())
                .collect();
            return Err(Error::RankDeficient {
                column: label[c].clone(),
                with,
            });
        }
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
        kept.push(c);
    }
    Ok(())
}

/// Maximize the weighted binomial log-likelihood of `y` on `[1, x]`.
pub fn fit_weighted_logistic(
    x: &DMatrix<f64>,
    names: &[String],
    y: &[u8],
    weights: &WeightSpec,
) -> Result<LogisticModel> {
    let (n, p) = x.shape();
    if names.len() != p {
        return Err(Error::ArityMismatch {
            expected: p,
            got: names.len(),
        });
    }
    if y.len() != n {
        return Err(Error::ArityMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n < p + 1 {
        return Err(Error::Precondition(format!(
            "{n} samples cannot support {} parameters",
            p + 1
        )));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::Precondition("labels must be 0 or 1".into()));
    }
    check_rank(x, names)?;
    let w = weights.resolve(y)?;
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let rows = with_intercept(x);
    let k = p + 1;

    let mut out = irls(&rows, n, k, &yf, &w, IrlsOptions::default());
    let mut separated = false;
    if out.diverged {
        separated = true;
        out = irls(
            &rows,
            n,
            k,
            &yf,
            &w,
            IrlsOptions {
                ridge: SEPARATION_RIDGE,
                ridge_intercept: true,
                divergence_limit: None,
                ..IrlsOptions::default()
            },
        );
    }
    Ok(LogisticModel {
        names: names.to_vec(),
        intercept: out.beta[0],
        coefficients: out.beta[1..].to_vec(),
        weighting: weights.label().into(),
        diagnostics: FitDiagnostics {
            iterations: out.iterations,
            converged: out.converged,
            separated,
            deviance: out.deviance,
            gradient_norm: out.gradient_norm,
        },
    })
}
