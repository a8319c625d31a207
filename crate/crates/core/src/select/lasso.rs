//! Logistic regression under an L1 bound on the slopes.
//!
//! The bound form `min deviance s.t. sum |b_j| <= bound` is solved through
//! the penalized form `min -loglik + lambda sum |b_j|`: a proximal-Newton
//! coordinate descent handles a fixed `lambda`, and bisection on `lambda`
//! finds the penalty whose solution meets the bound.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{logit, sigmoid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoOptions {
    /// Coordinate-descent tolerance on the largest coefficient change.
    pub tolerance: f64,
    /// Cap on coordinate sweeps per penalized fit.
    pub max_sweeps: usize,
    /// Cap on bisection steps when matching a bound.
    pub max_bisections: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_sweeps: 10_000,
            max_bisections: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub bound: f64,
    /// Penalty whose solution this is.
    pub lambda: f64,
    pub converged: bool,
    /// Binomial deviance of the fit.
    pub objective: f64,
}

impl LassoFit {
    pub fn l1_norm(&self) -> f64 {
        self.coefficients.iter().map(|b| b.abs()).sum()
    }

    pub fn predict_design(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                sigmoid(
                    self.intercept
                        + (0..x.ncols()).map(|j| x[(i, j)] * self.coefficients[j]).sum::<f64>(),
                )
            })
            .collect()
    }
}

/// Column-major design with responses as floats.
pub(crate) struct Problem {
    n: usize,
    p: usize,
    cols: Vec<f64>,
    y: Vec<f64>,
}

impl Problem {
    pub(crate) fn new(x: &DMatrix<f64>, y: &[u8]) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(Error::ArityMismatch { expected: n, got: y.len() });
        }
        if n == 0 {
            return Err(Error::InvalidDataset("no samples".into()));
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::Precondition("labels must be 0 or 1".into()));
        }
        Ok(Self {
            n,
            p,
            cols: x.as_slice().to_vec(),
            y: y.iter().map(|&v| f64::from(v)).collect(),
        })
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    fn eta(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![b0; self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (e, x) in eta.iter_mut().zip(self.col(j)) {
                    *e += b * x;
                }
            }
        }
        eta
    }

    fn deviance(&self, eta: &[f64]) -> f64 {
        eta.iter()
            .zip(&self.y)
            .map(|(&e, &y)| crate::glm::binomial_loss(y, sigmoid(e)))
            .sum()
    }

    fn lambda_max(&self) -> f64 {
        let ybar = self.y.iter().sum::<f64>() / self.n as f64;
        (0..self.p)
            .map(|j| {
                self.col(j)
                    .iter()
                    .zip(&self.y)
                    .map(|(x, y)| x * (y - ybar))
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    fn null_fit(&self, bound: f64) -> LassoFit {
        let ybar = self.y.iter().sum::<f64>() / self.n as f64;
        let b0 = logit(ybar);
        LassoFit {
            intercept: b0,
            coefficients: vec![0.0; self.p],
            bound,
            lambda: f64::INFINITY,
            converged: true,
            objective: self.deviance(&vec![b0; self.n]),
        }
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

struct Penalized {
    b0: f64,
    beta: Vec<f64>,
    converged: bool,
    deviance: f64,
}

/// Minimize `-loglik + lambda * sum |b_j|` from the warm start `(b0, beta)`.
fn penalized(prob: &Problem, lambda: f64, b0: f64, beta: &[f64], opts: &LassoOptions, max_outer: usize) -> Penalized {
    let (n, p) = (prob.n, prob.p);
    let mut b0 = b0;
    let mut beta = beta.to_vec();
    let mut eta = prob.eta(b0, &beta);
    let objective = |dev: f64, beta: &[f64]| 0.5 * dev + lambda * beta.iter().map(|b| b.abs()).sum::<f64>();
    let mut dev = prob.deviance(&eta);
    let mut sweeps = 0;
    let mut converged = false;
    let mut w = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut xw2 = vec![0.0; p];

    for _ in 0..max_outer {
        for i in 0..n {
            let pi = sigmoid(eta[i]);
            w[i] = (pi * (1.0 - pi)).max(1e-5);
            r[i] = (prob.y[i] - pi) / w[i];
        }
        for (j, v) in xw2.iter_mut().enumerate() {
            *v = prob.col(j).iter().zip(&w).map(|(x, wi)| wi * x * x).sum();
        }
        let wsum: f64 = w.iter().sum();
        let (old_b0, old_beta) = (b0, beta.clone());

        // Coordinate descent on the weighted least-squares surrogate, cycling
        // over the active set until it settles, then verifying with a full sweep.
        let mut full = true;
        loop {
            let mut max_change: f64 = 0.0;
            let d0 = r.iter().zip(&w).map(|(ri, wi)| ri * wi).sum::<f64>() / wsum;
            if d0 != 0.0 {
                b0 += d0;
                r.iter_mut().for_each(|ri| *ri -= d0);
                max_change = max_change.max(d0.abs());
            }
            for j in 0..p {
                if xw2[j] == 0.0 || (!full && beta[j] == 0.0) {
                    continue;
                }
                let col = prob.col(j);
                let g: f64 = col.iter().zip(&r).zip(&w).map(|((x, ri), wi)| wi * x * ri).sum::<f64>()
                    + xw2[j] * beta[j];
                let new = soft_threshold(g, lambda) / xw2[j];
                let d = new - beta[j];
                if d != 0.0 {
                    for (ri, x) in r.iter_mut().zip(col) {
                        *ri -= d * x;
                    }
                    beta[j] = new;
                    max_change = max_change.max(d.abs());
                }
            }
            sweeps += 1;
            if sweeps >= opts.max_sweeps {
                break;
            }
            if max_change < opts.tolerance {
                if full {
                    break;
                }
                full = true;
            } else {
                full = false;
            }
        }

        // Backtrack towards the previous iterate if the true objective rose.
        let old_obj = objective(dev, &old_beta);
        let (mut nb0, mut nbeta) = (b0, beta.clone());
        let mut t = 1.0;
        let mut new_eta = prob.eta(nb0, &nbeta);
        let mut new_dev = prob.deviance(&new_eta);
        for _ in 0..30 {
            if objective(new_dev, &nbeta) <= old_obj + 1e-12 * old_obj.abs().max(1.0) {
                break;
            }
            t *= 0.5;
            nb0 = old_b0 + t * (b0 - old_b0);
            for j in 0..p {
                nbeta[j] = old_beta[j] + t * (beta[j] - old_beta[j]);
            }
            new_eta = prob.eta(nb0, &nbeta);
            new_dev = prob.deviance(&new_eta);
        }
        b0 = nb0;
        beta = nbeta;
        eta = new_eta;
        dev = new_dev;

        let change = (b0 - old_b0)
            .abs()
            .max(beta.iter().zip(&old_beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        if change < opts.tolerance {
            converged = true;
            break;
        }
        if sweeps >= opts.max_sweeps {
            break;
        }
    }
    Penalized {
        b0,
        beta,
        converged,
        deviance: dev,
    }
}

/// Best penalized fit whose slopes satisfy `sum |b_j| <= bound`.
pub(crate) fn fit_bound(prob: &Problem, bound: f64, opts: &LassoOptions) -> LassoFit {
    let null = prob.null_fit(bound);
    let lambda_max = prob.lambda_max();
    if bound == 0.0 || prob.p == 0 || lambda_max == 0.0 {
        return null;
    }
    let l1 = |b: &[f64]| b.iter().map(|v| v.abs()).sum::<f64>();
    let finish = |pf: Penalized, lambda: f64| LassoFit {
        intercept: pf.b0,
        coefficients: pf.beta,
        bound,
        lambda,
        converged: pf.converged,
        objective: pf.deviance,
    };

    // Unpenalized fit first: if it already meets the bound it is the answer.
    let free = penalized(prob, 0.0, null.intercept, &null.coefficients, opts, 50);
    if free.converged && l1(&free.beta) <= bound {
        return finish(free, 0.0);
    }

    // Invariant: the fit at `hi` is feasible, the one at `lo` is not.
    let mut hi = lambda_max;
    let mut hi_fit = Penalized {
        b0: null.intercept,
        beta: null.coefficients.clone(),
        converged: true,
        deviance: null.objective,
    };
    let mut lo = 0.0;
    for _ in 0..opts.max_bisections {
        let mid = if lo == 0.0 { hi / 10.0 } else { (lo * hi).sqrt() };
        let fit = penalized(prob, mid, hi_fit.b0, &hi_fit.beta, opts, 100);
        if l1(&fit.beta) <= bound {
            hi = mid;
            hi_fit = fit;
        } else {
            lo = mid;
        }
        let gap = bound - l1(&hi_fit.beta);
        if gap <= 1e-7 * bound.max(1.0) || (lo > 0.0 && hi / lo < 1.0 + 1e-10) {
            break;
        }
    }
    finish(hi_fit, hi)
}

/// L1-constrained logistic regression with default solver options.
pub fn lasso_logistic(x: &DMatrix<f64>, y: &[u8], bound: f64) -> Result<LassoFit> {
    lasso_logistic_with(x, y, bound, &LassoOptions::default())
}

pub fn lasso_logistic_with(x: &DMatrix<f64>, y: &[u8], bound: f64, opts: &LassoOptions) -> Result<LassoFit> {
    if !(bound.is_finite() || bound == f64::INFINITY) || bound < 0.0 {
        return Err(Error::Precondition(format!("bound must be non-negative, got {bound}")));
    }
    let prob = Problem::new(x, y)?;
    Ok(fit_bound(&prob, bound, opts))
}

/// Slope L1 norms along a decreasing penalty path, used to build bound grids.
pub(crate) fn path_norm(prob: &Problem, lambda_ratio: f64, opts: &LassoOptions) -> f64 {
    let lambda_max = prob.lambda_max();
    if lambda_max == 0.0 || prob.p == 0 {
        return 0.0;
    }
    let null = prob.null_fit(0.0);
    let (mut b0, mut beta) = (null.intercept, null.coefficients);
    let steps = 20;
    for s in 1..=steps {
        let lambda = lambda_max * lambda_ratio.powf(s as f64 / steps as f64);
        let fit = penalized(prob, lambda, b0, &beta, opts, 100);
        b0 = fit.b0;
        beta = fit.beta;
    }
    beta.iter().map(|b| b.abs()).sum()
}

/// Held-out deviance of `fit` on rows `idx` of `x`.
pub(crate) fn holdout_deviance(fit: &LassoFit, x: &DMatrix<f64>, y: &[u8], idx: &[usize]) -> f64 {
    idx.iter()
        .map(|&i| {
            let eta = fit.intercept + (0..x.ncols()).map(|j| x[(i, j)] * fit.coefficients[j]).sum::<f64>();
            crate::glm::binomial_loss(f64::from(y[i]), sigmoid(eta))
        })
        .sum()
}
