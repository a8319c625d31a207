//! Iterative L1 selection down to fewer covariates than samples.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lasso::{fit_bound, holdout_deviance, path_norm, LassoOptions, Problem};
use crate::dataset::split::split_labels;
use crate::error::{Error, Result};

/// How the L1 bound is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundChoice {
    Fixed { bound: f64 },
    /// K-fold cross-validated deviance over a logarithmic grid of bounds.
    CrossValidated { folds: usize, grid_size: usize },
}

impl Default for BoundChoice {
    fn default() -> Self {
        BoundChoice::CrossValidated {
            folds: 5,
            grid_size: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    pub bound: BoundChoice,
    pub solver: LassoOptions,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    ZeroCoefficient,
    SmallestCoefficientFallback,
}

impl RemovalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RemovalReason::ZeroCoefficient => "zero_coefficient",
            RemovalReason::SmallestCoefficientFallback => "smallest_coefficient_fallback",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    /// Column indices (into the original design) active at this fit.
    pub active_before: Vec<usize>,
    /// One coefficient per active column.
    pub coefficients: Vec<f64>,
    pub removed: Vec<usize>,
    pub reason: Option<RemovalReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub bound: f64,
    pub records: Vec<SelectionRecord>,
    pub selected: Vec<usize>,
}

impl SelectionTrace {
    /// One line per iteration, naming columns through `names`.
    pub fn to_log(&self, names: &[String]) -> String {
        let name_list = |idx: &[usize]| idx.iter().map(|&j| names[j].as_str()).collect::<Vec<_>>().join(",");
        let mut out = format!("bound {}\n", crate::textfmt::format_f64(self.bound));
        for (k, r) in self.records.iter().enumerate() {
            let _ = writeln!(
                out,
                "iteration {}: active {} [{}] removed [{}] reason {}",
                k + 1,
                r.active_before.len(),
                name_list(&r.active_before),
                name_list(&r.removed),
                r.reason.map_or("none", RemovalReason::as_str)
            );
        }
        let _ = writeln!(out, "selected {} [{}]", self.selected.len(), name_list(&self.selected));
        out
    }
}

fn columns(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    x.select_columns(idx)
}

/// Cross-validated choice among `grid_size` bounds spaced logarithmically
/// below the L1 norm of a lightly penalized fit. Ties go to the smaller bound.
pub fn choose_bound(x: &DMatrix<f64>, y: &[u8], folds: usize, grid_size: usize, solver: &LassoOptions, seed: u64) -> Result<f64> {
    if folds < 2 || grid_size < 1 {
        return Err(Error::Config("cross-validation needs at least 2 folds and 1 bound".into()));
    }
    let prob = Problem::new(x, y)?;
    let top = path_norm(&prob, 1e-3, solver);
    if top == 0.0 {
        return Ok(0.0);
    }
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| {
            let t = if grid_size == 1 { 1.0 } else { i as f64 / (grid_size - 1) as f64 };
            top * 10f64.powf(-2.0 + 2.0 * t)
        })
        .collect();
    let split = split_labels(y, &vec![1.0 / folds as f64; folds], seed)?;
    let mut loss = vec![0.0; grid.len()];
    for held in &split.parts {
        let train: Vec<usize> = (0..y.len()).filter(|i| held.binary_search(i).is_err()).collect();
        let xt = x.select_rows(&train);
        let yt: Vec<u8> = train.iter().map(|&i| y[i]).collect();
        let fold = Problem::new(&xt, &yt)?;
        for (g, &bound) in grid.iter().enumerate() {
            let fit = fit_bound(&fold, bound, solver);
            loss[g] += holdout_deviance(&fit, x, y, held);
        }
    }
    let mut best = 0;
    for g in 1..grid.len() {
        if loss[g] < loss[best] - 1e-12 * loss[best].abs() {
            best = g;
        }
    }
    log::debug!("bound grid {grid:?}, cv deviance {loss:?}");
    Ok(grid[best])
}

/// Repeat L1-constrained fits, dropping covariates whose coefficient is
/// zero, until the active set is stable. While the stable set still has at
/// least `n` members, the covariate with the smallest absolute coefficient
/// (lowest index on ties) is dropped and a single fit is re-run.
pub fn iterative_select(x: &DMatrix<f64>, y: &[u8], config: &SelectConfig) -> Result<SelectionTrace> {
    let (n, p) = x.shape();
    if p == 0 {
        return Err(Error::Precondition("no covariates to select from".into()));
    }
    let bound = match config.bound {
        BoundChoice::Fixed { bound } => {
            if !(bound >= 0.0) {
                return Err(Error::Config(format!("bound must be non-negative, got {bound}")));
            }
            bound
        }
        BoundChoice::CrossValidated { folds, grid_size } => {
            choose_bound(x, y, folds, grid_size, &config.solver, config.seed)?
        }
    };

    let mut active: Vec<usize> = (0..p).collect();
    let mut records = Vec::new();
    while !active.is_empty() {
        let prob = Problem::new(&columns(x, &active), y)?;
        let fit = fit_bound(&prob, bound, &config.solver);
        if !fit.converged {
            log::warn!("L1 fit on {} covariates did not converge", active.len());
        }
        let zero: Vec<usize> = active
            .iter()
            .zip(&fit.coefficients)
            .filter(|(_, &b)| b == 0.0)
            .map(|(&j, _)| j)
            .collect();
        let (removed, reason) = if !zero.is_empty() {
            (zero, Some(RemovalReason::ZeroCoefficient))
        } else if active.len() >= n {
            let mut smallest = 0;
            for k in 1..active.len() {
                if fit.coefficients[k].abs() < fit.coefficients[smallest].abs() {
                    smallest = k;
                }
            }
            (vec![active[smallest]], Some(RemovalReason::SmallestCoefficientFallback))
        } else {
            (Vec::new(), None)
        };
        records.push(SelectionRecord {
            active_before: active.clone(),
            coefficients: fit.coefficients,
            removed: removed.clone(),
            reason,
        });
        if removed.is_empty() {
            break;
        }
        active.retain(|j| !removed.contains(j));
    }
    Ok(SelectionTrace {
        bound,
        records,
        selected: active,
    })
}
