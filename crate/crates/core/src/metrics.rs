//! Accuracy, error rates and the area under the ROC curve.
//!
//! A sample is called positive when its score is at least the threshold.
//! The auROC is the Mann-Whitney probability that a random positive
//! outscores a random negative, with ties counting one half.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn n_pos(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn n_neg(&self) -> usize {
        self.fp + self.tn
    }
}

/// Ratios derived from [`ConfusionCounts`]; `None` marks an empty
/// denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub accuracy: Option<f64>,
    pub fn_rate: Option<f64>,
    pub fp_rate: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub auroc: Option<f64>,
    pub accuracy: Option<f64>,
    pub fn_rate: Option<f64>,
    pub fp_rate: Option<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
}

fn check_inputs(scores: &[f64], truth: &[u8]) -> Result<()> {
    if scores.len() != truth.len() {
        return Err(Error::SampleMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if let Some(&y) = truth.iter().find(|&&y| y > 1) {
        return Err(Error::Precondition(format!("label {y} is not binary")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Precondition("scores contain NaN".into()));
    }
    Ok(())
}

pub fn confusion(scores: &[f64], truth: &[u8], threshold: f64) -> Result<ConfusionCounts> {
    check_inputs(scores, truth)?;
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(truth) {
        match (s >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn rates(c: &ConfusionCounts) -> Rates {
    Rates {
        accuracy: ratio(c.tp + c.tn, c.total()),
        fn_rate: ratio(c.fn_, c.n_pos()),
        fp_rate: ratio(c.fp, c.n_neg()),
    }
}

/// Mann-Whitney auROC computed by sorting; the pair count is kept in
/// integers (doubled, so ties stay integral) until the final division.
pub fn auroc(scores: &[f64], truth: &[u8]) -> Result<f64> {
    check_inputs(scores, truth)?;
    let n_pos = truth.iter().filter(|&&y| y == 1).count() as u128;
    let n_neg = truth.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut twice_wins: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let value = scores[order[start]];
        let mut end = start;
        let (mut pos_here, mut neg_here) = (0u128, 0u128);
        // -0.0 and 0.0 compare equal as scores but sort apart under
        // total_cmp; group by `==` so they tie.
        while end < order.len() && scores[order[end]] == value {
            if truth[order[end]] == 1 {
                pos_here += 1;
            } else {
                neg_here += 1;
            }
            end += 1;
        }
        twice_wins += pos_here * (2 * neg_below + neg_here);
        neg_below += neg_here;
        start = end;
    }
    Ok(twice_wins as f64 / (2 * n_pos * n_neg) as f64)
}

pub fn evaluate(scores: &[f64], truth: &[u8], threshold: f64) -> Result<MetricsReport> {
    let c = confusion(scores, truth, threshold)?;
    let r = rates(&c);
    let auroc = match auroc(scores, truth) {
        Ok(v) => Some(v),
        Err(Error::SingleClass) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        auroc,
        accuracy: r.accuracy,
        fn_rate: r.fn_rate,
        fp_rate: r.fp_rate,
        n_pos: c.n_pos(),
        n_neg: c.n_neg(),
    })
}

/// A proportion as a percentage with two decimals, rounding half to even
/// on the binary value of `100 * v`; `None` renders as `NA`.
pub fn format_percent(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.2}", 100.0 * v),
        None => "NA".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn pairwise(scores: &[f64], truth: &[u8]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in truth.iter().enumerate() {
            for (j, &yj) in truth.iter().enumerate() {
                if yi == 1 && yj == 0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        total += 1.0;
                    } else if scores[i] == scores[j] {
                        total += 0.5;
                    }
                }
            }
        }
        total / pairs
    }

    #[test]
    fn confusion_examples() {
        let truth = [1, 0, 1, 0];
        let c = confusion(&[1.0, 0.0, 1.0, 0.0], &truth, 0.5).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let c = confusion(&[0.5; 4], &truth, 0.5).unwrap();
        assert_eq!((c.fn_, c.fp), (0, 2));

        // Hand tally: (score, truth) -> cell.
        let scores = [0.9, 0.2, 0.5, 0.49, 0.7, 0.1, 0.6, 0.3, 0.51, 0.0];
        let truth = [1, 1, 0, 1, 0, 0, 1, 0, 1, 0];
        // positives: 0.9 tp, 0.2 fn, 0.49 fn, 0.6 tp, 0.51 tp
        // negatives: 0.5 fp, 0.7 fp, 0.1 tn, 0.3 tn, 0.0 tn
        let c = confusion(&scores, &truth, 0.5).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 3, fp: 2, tn: 3, fn_: 2 });
        assert!(confusion(&[0.1], &[1, 0], 0.5).is_err());
    }

    #[test]
    fn rate_examples() {
        let r = rates(&ConfusionCounts { tp: 3, fn_: 1, fp: 2, tn: 4 });
        assert_eq!(r.accuracy, Some(0.7));
        assert_eq!(r.fn_rate, Some(0.25));
        assert!((r.fp_rate.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let r = rates(&ConfusionCounts { tp: 2, fn_: 0, fp: 0, tn: 5 });
        assert_eq!((r.accuracy, r.fn_rate, r.fp_rate), (Some(1.0), Some(0.0), Some(0.0)));
        let r = rates(&ConfusionCounts { tp: 0, fn_: 0, fp: 1, tn: 5 });
        assert_eq!(r.fn_rate, None);
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8, 0.1, 0.2], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.4; 5], &[1, 0, 1, 0, 0]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.7, 0.3, 0.5], &[1, 1, 0]).unwrap(), 0.5);
        assert!(matches!(auroc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
        assert_eq!(auroc(&[0.0, -0.0], &[1, 0]).unwrap(), 0.5);
    }

    #[test]
    fn auroc_matches_pairwise_oracle_on_random_instances() {
        let mut rng = seed::rng(17);
        for case in 0..500 {
            let n = rng.random_range(2..=200);
            let levels = if case % 2 == 0 { 5 } else { 1_000_000 };
            let mut truth: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
            truth[0] = 1;
            truth[1] = 0;
            let scores: Vec<f64> = (0..n)
                .map(|_| f64::from(rng.random_range(0..levels)) / f64::from(levels))
                .collect();
            assert_eq!(auroc(&scores, &truth).unwrap(), pairwise(&scores, &truth));
            let squashed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
            assert_eq!(auroc(&squashed, &truth).unwrap(), auroc(&scores, &truth).unwrap());
        }
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(format_percent(Some(0.7)), "70.00");
        assert_eq!(format_percent(Some(1.0 / 3.0)), "33.33");
        assert_eq!(format_percent(None), "NA");
        // 0.00125 * 100 is exactly 0.125, a true tie, which rounds to even.
        assert_eq!(100.0 * 0.00125, 0.125);
        assert_eq!(format_percent(Some(0.00125)), "0.12");
        assert_eq!(format_percent(Some(0.00375)), "0.38");
    }

    fn labelled(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2..max).prop_flat_map(|n| {
            (
                proptest::collection::hash_set(-1_000_000i32..1_000_000, n),
                proptest::collection::vec(0u8..2, n),
            )
                .prop_map(|(s, mut y)| {
                    y[0] = 1;
                    y[1] = 0;
                    (s.into_iter().map(|v| f64::from(v) / 1000.0).collect(), y)
                })
        })
    }

    proptest! {
        #[test]
        fn flipping_truth_or_negating_scores_complements((scores, truth) in labelled(60)) {
            let a = auroc(&scores, &truth).unwrap();
            let flipped: Vec<u8> = truth.iter().map(|y| 1 - y).collect();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            prop_assert!((a + auroc(&scores, &flipped).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((a + auroc(&neg, &truth).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn accuracy_reconstructs_from_rates((scores, truth) in labelled(60), t in 0.0f64..1.0) {
            let scores: Vec<f64> = scores.iter().map(|s| 0.5 + s / 2000.0).collect();
            let c = confusion(&scores, &truth, t).unwrap();
            let r = rates(&c);
            let n = c.total() as f64;
            let rebuilt = 1.0
                - (r.fn_rate.unwrap() * c.n_pos() as f64 + r.fp_rate.unwrap() * c.n_neg() as f64) / n;
            prop_assert!((rebuilt - r.accuracy.unwrap()).abs() < 1e-12);
        }
    }
}
