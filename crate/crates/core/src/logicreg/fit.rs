//! Coefficient estimation for a fixed set of trees.
//!
//! Given the trees, every sample falls into one of `2^t` cells (the pattern
//! of tree values), and all three scores depend on the data only through
//! per-cell weight and response totals. Fitting therefore works on at most
//! `2^t` aggregated rows regardless of `n`.

use super::{Family, LogicData, LogicModel, LogicTree};
use crate::dataset::{count_ones, get_bit, tail_mask};
use crate::error::{Error, Result};
use crate::glm::{binomial_loss, irls, logit, solve_spd, IrlsOptions, SEPARATION_RIDGE};

/// Largest number of trees a model may hold.
pub(crate) const MAX_TREES: usize = 12;

struct Cells {
    /// Pattern of tree values of every non-empty cell.
    pattern: Vec<usize>,
    weight: Vec<f64>,
    /// Weighted response total.
    response: Vec<f64>,
    /// Weighted sum of squared responses over all samples.
    sum_sq: f64,
}

/// Per-class weight when weights depend on the label only.
fn class_weights(data: &LogicData) -> Option<[f64; 2]> {
    let y = data.y();
    match data.weights() {
        None => Some([1.0, 1.0]),
        Some(w) => {
            let mut cw = [f64::NAN; 2];
            for (&yi, &wi) in y.iter().zip(w) {
                let c = usize::from(yi == 1.0);
                if cw[c].is_nan() {
                    cw[c] = wi;
                } else if cw[c] != wi {
                    return None;
                }
            }
            Some(cw.map(|v| if v.is_nan() { 0.0 } else { v }))
        }
    }
}

fn cell_stats(bits: &[Vec<u64>], data: &LogicData) -> Cells {
    let t = bits.len();
    let n = data.n();
    let n_cells = 1usize << t;
    let mut weight = vec![0.0; n_cells];
    let mut response = vec![0.0; n_cells];
    let mut sum_sq = 0.0;

    match (data.y_bits(), class_weights(data)) {
        (Some(yb), Some([w0, w1])) => {
            let words = yb.len();
            let last = tail_mask(n);
            let mut mask = vec![0u64; words];
            for c in 0..n_cells {
                for (k, m) in mask.iter_mut().enumerate() {
                    let mut v = if k + 1 == words { last } else { u64::MAX };
                    for (i, b) in bits.iter().enumerate() {
                        v &= if c >> i & 1 == 1 { b[k] } else { !b[k] };
                    }
                    *m = v;
                }
                let ones = mask.iter().zip(yb).map(|(m, y)| (m & y).count_ones() as usize).sum::<usize>();
                let all = count_ones(&mask);
                weight[c] = w1 * ones as f64 + w0 * (all - ones) as f64;
                response[c] = w1 * ones as f64;
            }
            sum_sq = response.iter().sum();
        }
        _ => {
            for i in 0..n {
                let c = bits
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (k, b)| acc | usize::from(get_bit(b, i)) << k);
                let w = data.weight(i);
                let y = data.y()[i];
                weight[c] += w;
                response[c] += w * y;
                sum_sq += w * y * y;
            }
        }
    }

    let keep: Vec<usize> = (0..n_cells).filter(|&c| weight[c] > 0.0).collect();
    Cells {
        weight: keep.iter().map(|&c| weight[c]).collect(),
        response: keep.iter().map(|&c| response[c]).collect(),
        pattern: keep,
        sum_sq,
    }
}

/// Indices (0 = intercept, `i + 1` = tree `i`) of a maximal linearly
/// independent set of design columns over the occupied cells.
fn independent_columns(cells: &Cells, t: usize) -> Vec<usize> {
    let m = cells.pattern.len();
    let column = |j: usize| -> Vec<f64> {
        (0..m)
            .map(|r| {
                let v = if j == 0 { 1.0 } else { f64::from(u8::from(cells.pattern[r] >> (j - 1) & 1 == 1)) };
                v * cells.weight[r].sqrt()
            })
            .collect()
    };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    for j in 0..=t {
        let mut v = column(j);
        let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for _ in 0..2 {
            for q in &basis {
                let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm0 > 0.0 && norm > 1e-9 * norm0 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
            kept.push(j);
        }
    }
    kept
}

fn design_row(pattern: usize, cols: &[usize]) -> impl Iterator<Item = f64> + '_ {
    cols.iter().map(move |&j| {
        if j == 0 {
            1.0
        } else {
            f64::from(u8::from(pattern >> (j - 1) & 1 == 1))
        }
    })
}

/// Estimate the coefficients of `family` for the fixed `trees` and return
/// the fitted model with its training score.
pub fn fit_given_trees(trees: Vec<LogicTree>, family: Family, data: &LogicData) -> Result<LogicModel> {
    if trees.len() > MAX_TREES {
        return Err(Error::Precondition(format!("at most {MAX_TREES} trees are supported")));
    }
    if family == Family::Classification && trees.len() > 1 {
        return Err(Error::Precondition("classification models hold at most one tree".into()));
    }
    if family != Family::Linear && data.y().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Precondition(format!("{} family needs responses in [0, 1]", family.name())));
    }
    if family == Family::Classification && !data.is_binary() {
        return Err(Error::Precondition("classification family needs 0/1 responses".into()));
    }
    if data.n() == 0 {
        return Err(Error::InvalidDataset("no samples".into()));
    }
    let bits = trees
        .iter()
        .map(|t| t.eval_bits(data.x()))
        .collect::<Result<Vec<_>>>()?;
    let cells = cell_stats(&bits, data);
    let t = trees.len();

    let (coefficients, score) = match family {
        Family::Classification => classification(&cells, t),
        Family::Linear => linear(&cells, t),
        Family::Logistic => logistic(&cells, t),
    };
    Ok(LogicModel {
        family,
        trees,
        coefficients,
        score,
    })
}

fn classification(cells: &Cells, t: usize) -> (Vec<f64>, f64) {
    let total_w: f64 = cells.weight.iter().sum();
    let total_y: f64 = cells.response.iter().sum();
    if t == 0 {
        let ones = total_y;
        let zeros = total_w - total_y;
        let class = if ones > zeros { 1.0 } else { 0.0 };
        return (vec![class], ones.min(zeros));
    }
    let mut errors = 0.0;
    for (r, &c) in cells.pattern.iter().enumerate() {
        errors += if c & 1 == 1 {
            cells.weight[r] - cells.response[r]
        } else {
            cells.response[r]
        };
    }
    (vec![0.0, 1.0], errors)
}

fn linear(cells: &Cells, t: usize) -> (Vec<f64>, f64) {
    let cols = independent_columns(cells, t);
    let k = cols.len();
    let mut a = vec![0.0; k * k];
    let mut b = vec![0.0; k];
    for (r, &c) in cells.pattern.iter().enumerate() {
        let x: Vec<f64> = design_row(c, &cols).collect();
        for i in 0..k {
            b[i] += cells.response[r] * x[i];
            for j in 0..k {
                a[i * k + j] += cells.weight[r] * x[i] * x[j];
            }
        }
    }
    let beta = solve_spd(&a, &b, k).unwrap_or_else(|| vec![0.0; k]);
    let quad: f64 = (0..k)
        .map(|i| (0..k).map(|j| beta[i] * a[i * k + j] * beta[j]).sum::<f64>())
        .sum();
    let cross: f64 = beta.iter().zip(&b).map(|(x, y)| x * y).sum();
    let rss = (cells.sum_sq - 2.0 * cross + quad).max(0.0);
    (expand(&beta, &cols, t), rss)
}

fn logistic(cells: &Cells, t: usize) -> (Vec<f64>, f64) {
    let cols = independent_columns(cells, t);
    let k = cols.len();
    let m = cells.pattern.len();
    let rows: Vec<f64> = cells.pattern.iter().flat_map(|&c| design_row(c, &cols)).collect();
    let prop: Vec<f64> = (0..m)
        .map(|r| (cells.response[r] / cells.weight[r]).clamp(0.0, 1.0))
        .collect();
    // A saturated design reproduces every cell proportion, so the estimate
    // solves logit(prop) = X beta directly. Annealing hits this case often.
    if m == k && prop.iter().all(|&q| q > 0.0 && q < 1.0) {
        let z: Vec<f64> = prop.iter().map(|&q| logit(q)).collect();
        let mut a = vec![0.0; k * k];
        let mut b = vec![0.0; k];
        for r in 0..m {
            let x = &rows[r * k..(r + 1) * k];
            for i in 0..k {
                b[i] += x[i] * z[r];
                for j in 0..k {
                    a[i * k + j] += x[i] * x[j];
                }
            }
        }
        if let Some(beta) = solve_spd(&a, &b, k) {
            let deviance = (0..m).map(|r| cells.weight[r] * binomial_loss(prop[r], prop[r])).sum();
            return (expand(&beta, &cols, t), deviance);
        }
    }
    // A pure cell in a saturated design always diverges, so skip the
    // unpenalized attempt.
    let doomed = m == k && prop.iter().any(|&q| q == 0.0 || q == 1.0);
    let mut out = irls(
        &rows,
        m,
        k,
        &prop,
        &cells.weight,
        IrlsOptions {
            max_iter: if doomed { 0 } else { IrlsOptions::default().max_iter },
            ..IrlsOptions::default()
        },
    );
    if doomed || out.diverged {
        out = irls(
            &rows,
            m,
            k,
            &prop,
            &cells.weight,
            IrlsOptions {
                ridge: SEPARATION_RIDGE,
                ridge_intercept: true,
                divergence_limit: None,
                ..IrlsOptions::default()
            },
        );
    }
    let deviance: f64 = (0..m)
        .map(|r| {
            let eta: f64 = rows[r * k..(r + 1) * k].iter().zip(&out.beta).map(|(a, b)| a * b).sum();
            cells.weight[r] * binomial_loss(prop[r], crate::glm::sigmoid(eta))
        })
        .sum();
    (expand(&out.beta, &cols, t), deviance)
}

fn expand(beta: &[f64], cols: &[usize], t: usize) -> Vec<f64> {
    let mut full = vec![0.0; t + 1];
    for (b, &j) in beta.iter().zip(cols) {
        full[j] = *b;
    }
    full
}
