//! Stepwise logistic regression on an information criterion.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{fit_weighted_logistic, LogisticModel, WeightSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Deviance + 2 k.
    #[default]
    Aic,
    /// Deviance + k ln n.
    Bic,
}

impl Criterion {
    pub fn value(self, model: &LogisticModel, n: usize) -> f64 {
        let k = model.n_params() as f64;
        let penalty = match self {
            Criterion::Aic => 2.0 * k,
            Criterion::Bic => k * (n as f64).ln(),
        };
        model.diagnostics.deviance + penalty
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Start from all covariates and drop one at a time.
    #[default]
    Backward,
    /// Start from the intercept and add one at a time.
    Forward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Covariate dropped (backward) or added (forward); `None` for the start.
    pub changed: Option<String>,
    pub criterion: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepwiseResult {
    pub model: LogisticModel,
    pub steps: Vec<StepRecord>,
    /// Columns removed before the search as duplicates or constants.
    pub discarded: Vec<String>,
}

/// Drop constant columns and all but the first of identical columns.
fn dedupe(x: &DMatrix<f64>, names: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut kept: Vec<usize> = Vec::new();
    let mut discarded = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j);
        let constant = col.iter().all(|&v| v == col[0]);
        let duplicate = kept.iter().any(|&k| x.column(k) == col);
        if constant || duplicate {
            discarded.push(names[j].clone());
        } else {
            kept.push(j);
        }
    }
    (kept, discarded)
}

fn fit_subset(
    x: &DMatrix<f64>,
    names: &[String],
    subset: &[usize],
    y: &[u8],
    weights: &WeightSpec,
) -> Result<LogisticModel> {
    let sub_names: Vec<String> = subset.iter().map(|&j| names[j].clone()).collect();
    fit_weighted_logistic(&x.select_columns(subset), &sub_names, y, weights)
}

/// Candidate fit usable for comparison, or `None` (with a warning) when the
/// fit fails or diverges.
fn try_fit(
    x: &DMatrix<f64>,
    names: &[String],
    subset: &[usize],
    y: &[u8],
    weights: &WeightSpec,
) -> Option<LogisticModel> {
    match fit_subset(x, names, subset, y, weights) {
        Ok(m) if m.diagnostics.separated || !m.diagnostics.deviance.is_finite() => {
            log::warn!("stepwise: skipping diverging submodel {:?}", m.names);
            None
        }
        Ok(m) => Some(m),
        Err(e) => {
            log::warn!("stepwise: skipping submodel: {e}");
            None
        }
    }
}

/// Stepwise search over the columns of `x`, returning the final fit.
pub fn stepwise_logistic(
    x: &DMatrix<f64>,
    names: &[String],
    y: &[u8],
    weights: &WeightSpec,
    direction: Direction,
    criterion: Criterion,
) -> Result<StepwiseResult> {
    if names.len() != x.ncols() {
        return Err(Error::ArityMismatch {
            expected: x.ncols(),
            got: names.len(),
        });
    }
    let n = x.nrows();
    let (candidates, discarded) = dedupe(x, names);
    if candidates.len() >= n {
        return Err(Error::Precondition(format!(
            "{} covariates for {n} samples",
            candidates.len()
        )));
    }

    let mut current: Vec<usize> = match direction {
        Direction::Backward => candidates.clone(),
        Direction::Forward => Vec::new(),
    };
    let mut model = fit_subset(x, names, &current, y, weights)?;
    let mut value = criterion.value(&model, n);
    let mut steps = vec![StepRecord {
        changed: None,
        criterion: value,
    }];

    loop {
        let moves: Vec<(usize, Vec<usize>)> = match direction {
            Direction::Backward => (0..current.len())
                .map(|k| {
                    let mut s = current.clone();
                    let gone = s.remove(k);
                    (gone, s)
                })
                .collect(),
            Direction::Forward => candidates
                .iter()
                .filter(|j| !current.contains(j))
                .map(|&j| {
                    let mut s = current.clone();
                    s.push(j);
                    s.sort_unstable();
                    (j, s)
                })
                .collect(),
        };
        let mut best: Option<(usize, Vec<usize>, LogisticModel, f64)> = None;
        for (changed, subset) in moves {
            if let Some(m) = try_fit(x, names, &subset, y, weights) {
                let v = criterion.value(&m, n);
                if best.as_ref().is_none_or(|b| v < b.3) {
                    best = Some((changed, subset, m, v));
                }
            }
        }
        match best {
            Some((changed, subset, m, v)) if v < value - 1e-10 * value.abs().max(1.0) => {
                steps.push(StepRecord {
                    changed: Some(names[changed].clone()),
                    criterion: v,
                });
                current = subset;
                model = m;
                value = v;
            }
            _ => break,
        }
    }
    Ok(StepwiseResult {
        model,
        steps,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::sigmoid;
    use crate::seed;
    use rand::Rng;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("v{j}")).collect()
    }

    #[test]
    fn noise_covariate_is_eliminated() {
        let mut rng = seed::rng(1);
        let x = DMatrix::from_fn(200, 2, |_, _| f64::from(u8::from(rng.random::<bool>())));
        let y: Vec<u8> = (0..200)
            .map(|i| u8::from(rng.random::<f64>() < sigmoid(-1.5 + 3.0 * x[(i, 0)])))
            .collect();
        let r = stepwise_logistic(&x, &names(2), &y, &WeightSpec::Unweighted, Direction::Backward, Criterion::Aic).unwrap();
        assert_eq!(r.model.names, vec!["v0".to_string()]);
        for pair in r.steps.windows(2) {
            assert!(pair[1].criterion <= pair[0].criterion);
        }
        let f = stepwise_logistic(&x, &names(2), &y, &WeightSpec::Unweighted, Direction::Forward, Criterion::Bic).unwrap();
        assert_eq!(f.model.names, vec!["v0".to_string()]);
    }

    #[test]
    fn empty_design_gives_intercept_only() {
        let x = DMatrix::<f64>::zeros(10, 0);
        let y = [0, 1, 0, 1, 1, 0, 0, 0, 1, 0];
        let r = stepwise_logistic(&x, &[], &y, &WeightSpec::Unweighted, Direction::Backward, Criterion::Aic).unwrap();
        assert!(r.model.coefficients.is_empty());
        assert!((r.model.intercept - (0.4f64 / 0.6).ln()).abs() < 1e-9);
    }

    #[test]
    fn identical_columns_are_deduplicated() {
        let mut rng = seed::rng(2);
        let col: Vec<f64> = (0..50).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
        let x = DMatrix::from_fn(50, 3, |i, _| col[i]);
        let y: Vec<u8> = col.iter().enumerate().map(|(i, &v)| (v as u8) ^ u8::from(i % 5 == 0)).collect();
        let r = stepwise_logistic(&x, &names(3), &y, &WeightSpec::ClassBalanced, Direction::Backward, Criterion::Aic).unwrap();
        assert_eq!(r.discarded, vec!["v1".to_string(), "v2".to_string()]);
        assert_eq!(r.model.names, vec!["v0".to_string()]);
    }
}
