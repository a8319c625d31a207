//! Permutation tests on annealing results.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::anneal::{anneal_fit, AnnealConfig};
use super::{Family, LogicData, LogicModel};
use crate::error::{Error, Result};
use crate::seed;

pub const MIN_PERMUTATIONS: usize = 19;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandTestResult {
    /// Model size under test; `None` for the null-signal test.
    pub k: Option<usize>,
    /// Score of the fit on the original responses (`s_k` for size tests).
    pub observed_score: f64,
    /// Score the permuted refits are compared against.
    pub reference_score: f64,
    pub permuted_scores: Vec<f64>,
    /// `(#{s* <= reference} + 1) / (n_perm + 1)`.
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSizeResult {
    pub chosen: usize,
    pub threshold: f64,
    /// Unrestricted best score on the original responses.
    pub best_score: f64,
    pub per_size: Vec<RandTestResult>,
}

fn at_least_as_good(candidate: f64, reference: f64) -> bool {
    candidate <= reference + 1e-12 * reference.abs().max(1.0)
}

fn p_value(permuted: &[f64], reference: f64) -> f64 {
    let hits = permuted.iter().filter(|&&s| at_least_as_good(s, reference)).count();
    (hits + 1) as f64 / (permuted.len() + 1) as f64
}

fn check_perms(n_perm: usize) -> Result<()> {
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::Precondition(format!(
            "at least {MIN_PERMUTATIONS} permutations are required, got {n_perm}"
        )));
    }
    Ok(())
}

/// Shuffle responses within each group of samples sharing a fitted value,
/// then refit without a size restriction, once per replicate.
fn permuted_refits(
    data: &LogicData,
    family: Family,
    cfg: &AnnealConfig,
    groups: &[Vec<usize>],
    k: usize,
    n_perm: usize,
) -> Result<Vec<f64>> {
    let perm_label = format!("perm-k{k}");
    let refit_label = format!("refit-k{k}");
    (0..n_perm)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed::derive_indexed(cfg.seed, &perm_label, r));
            let mut perm: Vec<usize> = (0..data.n()).collect();
            for members in groups {
                let mut shuffled = members.clone();
                shuffled.shuffle(&mut rng);
                for (&dst, &src) in members.iter().zip(&shuffled) {
                    perm[dst] = src;
                }
            }
            let refit_cfg = AnnealConfig {
                seed: seed::derive_indexed(cfg.seed, &refit_label, r),
                ..cfg.clone()
            };
            Ok(anneal_fit(&data.permuted(&perm), family, &refit_cfg)?.score)
        })
        .collect()
}

/// Is there any association between the response and `X`? Compares the
/// best score on the data with best scores after permuting the responses.
pub fn null_signal_test(
    data: &LogicData,
    family: Family,
    cfg: &AnnealConfig,
    n_perm: usize,
) -> Result<RandTestResult> {
    check_perms(n_perm)?;
    let observed = anneal_fit(data, family, cfg)?.score;
    let all: Vec<Vec<usize>> = vec![(0..data.n()).collect()];
    let permuted = permuted_refits(data, family, cfg, &all, 0, n_perm)?;
    Ok(RandTestResult {
        k: None,
        observed_score: observed,
        reference_score: observed,
        p_value: p_value(&permuted, observed),
        permuted_scores: permuted,
    })
}

fn fitted_groups(model: &LogicModel, data: &LogicData) -> Result<Vec<Vec<usize>>> {
    let fitted = model.predict_bits(data.x())?;
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, v) in fitted.iter().enumerate() {
        groups.entry(v.to_bits()).or_default().push(i);
    }
    Ok(groups.into_values().collect())
}

/// Choose the number of leaves (summed over trees) between 0 and
/// `max_size`.
///
/// For each size `k` the best model with at most `k` leaves is fitted and
/// responses are permuted within its fitted classes. If `k` leaves capture
/// the signal, unrestricted refits on such permutations score as well as the
/// best fit on the real data reasonably often; if they miss part of it, they
/// almost never do. Size `k` is rejected when that proportion (as a
/// permutation p-value) is at most `threshold`; the smallest size not
/// rejected is chosen, or `max_size` when all are.
pub fn model_size_test(
    data: &LogicData,
    family: Family,
    max_size: usize,
    cfg: &AnnealConfig,
    n_perm: usize,
    threshold: f64,
) -> Result<ModelSizeResult> {
    if family == Family::Linear {
        return Err(Error::Unsupported(
            "the model-size test needs a family with discrete fitted classes".into(),
        ));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("threshold {threshold} outside (0, 1)")));
    }
    check_perms(n_perm)?;
    if max_size == 0 {
        let null = null_signal_test(data, family, cfg, n_perm)?;
        return Ok(ModelSizeResult {
            chosen: 0,
            threshold,
            best_score: null.observed_score,
            per_size: vec![null],
        });
    }

    let best = anneal_fit(data, family, cfg)?;
    let restricted = (0..=max_size)
        .map(|k| {
            let c = AnnealConfig {
                max_total_leaves: Some(k),
                seed: seed::derive_indexed(cfg.seed, "size", k),
                ..cfg.clone()
            };
            anneal_fit(data, family, &c)
        })
        .collect::<Result<Vec<_>>>()?;
    let reference = restricted.iter().map(|m| m.score).fold(best.score, f64::min);

    let mut per_size = Vec::with_capacity(max_size + 1);
    for (k, model) in restricted.iter().enumerate() {
        let groups = fitted_groups(model, data)?;
        let permuted = permuted_refits(data, family, cfg, &groups, k, n_perm)?;
        log::info!("model size {k}: score {}, {} fitted classes", model.score, groups.len());
        per_size.push(RandTestResult {
            k: Some(k),
            observed_score: model.score,
            reference_score: reference,
            p_value: p_value(&permuted, reference),
            permuted_scores: permuted,
        });
    }
    let chosen = per_size
        .iter()
        .position(|r| r.p_value > threshold)
        .unwrap_or(max_size);
    Ok(ModelSizeResult {
        chosen,
        threshold,
        best_score: best.score,
        per_size,
    })
}
