//! Simulated-annealing search over tree sets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fit::fit_given_trees;
use super::moves::{propose_move, MoveKind, MoveLimits};
use super::{Family, LogicData, LogicModel, LogicTree};
use crate::error::{Error, Result};
use crate::seed;

/// Relative proposal frequency of each move kind.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoveWeights {
    pub grow: f64,
    pub prune: f64,
    pub split: f64,
    pub delete: f64,
    pub relabel: f64,
    pub flip_operator: f64,
}

impl Default for MoveWeights {
    fn default() -> Self {
        Self {
            grow: 1.0,
            prune: 1.0,
            split: 1.0,
            delete: 1.0,
            relabel: 2.0,
            flip_operator: 1.0,
        }
    }
}

impl MoveWeights {
    pub fn weight(&self, kind: MoveKind) -> f64 {
        match kind {
            MoveKind::Grow => self.grow,
            MoveKind::Prune => self.prune,
            MoveKind::Split => self.split,
            MoveKind::Delete => self.delete,
            MoveKind::Relabel => self.relabel,
            MoveKind::FlipOperator => self.flip_operator,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealConfig {
    /// `None` calibrates the start so that about 90% of worsening moves
    /// from the initial state would be accepted.
    pub start_temperature: Option<f64>,
    /// `None` means `1e-4` times the start temperature.
    pub end_temperature: Option<f64>,
    pub iterations: usize,
    pub moves: MoveWeights,
    /// Leaves per tree.
    pub max_leaves: usize,
    /// Forced to 1 for the classification family.
    pub max_trees: usize,
    /// Optional bound on leaves summed over all trees.
    pub max_total_leaves: Option<usize>,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            start_temperature: None,
            end_temperature: None,
            iterations: 50_000,
            moves: MoveWeights::default(),
            max_leaves: 8,
            max_trees: 2,
            max_total_leaves: None,
            seed: 1,
        }
    }
}

const PILOT_STEPS: usize = 100;
const END_RATIO: f64 = 1e-4;

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if self.max_leaves == 0 || self.max_trees == 0 {
            return bad("max_leaves and max_trees must be at least 1");
        }
        let w: Vec<f64> = MoveKind::ALL.iter().map(|&k| self.moves.weight(k)).collect();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("move weights must be non-negative");
        }
        if w.iter().all(|&v| v == 0.0) {
            return bad("at least one move weight must be positive");
        }
        for t in [self.start_temperature, self.end_temperature].into_iter().flatten() {
            if !(t.is_finite() && t > 0.0) {
                return bad("temperatures must be positive");
            }
        }
        if let (Some(s), Some(e)) = (self.start_temperature, self.end_temperature) {
            if s <= e {
                return bad("start_temperature must exceed end_temperature");
            }
        }
        Ok(())
    }

    pub(crate) fn limits(&self, family: Family, n_vars: usize) -> MoveLimits {
        MoveLimits {
            n_vars,
            max_leaves: self.max_leaves,
            max_trees: if family == Family::Classification { 1 } else { self.max_trees },
            max_total_leaves: self.max_total_leaves,
        }
    }
}

fn draw_kind<R: Rng + ?Sized>(weights: &[f64; 6], rng: &mut R) -> Option<MoveKind> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return Some(MoveKind::ALL[k]);
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).map(|k| MoveKind::ALL[k])
}

/// Draw a neighbour of `trees`, resampling the move kind whenever the drawn
/// kind has no applicable target.
fn neighbour<R: Rng + ?Sized>(
    trees: &[LogicTree],
    moves: &MoveWeights,
    limits: &MoveLimits,
    rng: &mut R,
) -> Result<Option<Vec<LogicTree>>> {
    let mut weights = MoveKind::ALL.map(|k| moves.weight(k));
    while let Some(kind) = draw_kind(&weights, rng) {
        match propose_move(trees, kind, limits, rng) {
            Ok(mv) => return Ok(Some(mv.apply(trees)?.0)),
            Err(Error::NoApplicableMove(_)) => weights[kind as usize] = 0.0,
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

fn calibrate(data: &LogicData, family: Family, cfg: &AnnealConfig, limits: &MoveLimits, start: &LogicModel) -> Result<f64> {
    let mut rng = seed::rng(seed::derive(cfg.seed, "pilot"));
    let mut current = start.clone();
    let mut rises = Vec::new();
    for _ in 0..PILOT_STEPS {
        let Some(trees) = neighbour(&current.trees, &cfg.moves, limits, &mut rng)? else {
            break;
        };
        let next = fit_given_trees(trees, family, data)?;
        let delta = next.score - current.score;
        if delta > 0.0 {
            rises.push(delta);
        }
        current = next;
    }
    if rises.is_empty() {
        return Ok(1.0);
    }
    let mean = rises.iter().sum::<f64>() / rises.len() as f64;
    Ok(-mean / 0.9f64.ln())
}

/// Search for the tree set minimizing the family's score on `data`.
///
/// The search starts from the intercept-only model, cools geometrically and
/// returns the best state visited; ties keep the earlier state.
pub fn anneal_fit(data: &LogicData, family: Family, cfg: &AnnealConfig) -> Result<LogicModel> {
    cfg.validate()?;
    if data.n() == 0 {
        return Err(Error::InvalidDataset("no samples".into()));
    }
    let y = data.y();
    if y.iter().all(|&v| v == y[0]) {
        let b0 = match family {
            Family::Logistic => crate::glm::logit(y[0]),
            _ => y[0],
        };
        let mut m = LogicModel {
            family,
            trees: Vec::new(),
            coefficients: vec![b0],
            score: 0.0,
        };
        m.score = super::score(&m, data)?;
        return Ok(m);
    }
    let null = fit_given_trees(Vec::new(), family, data)?;
    let limits = cfg.limits(family, data.p());
    if data.p() == 0 || limits.max_total_leaves == Some(0) {
        return Ok(null);
    }

    let start_t = match cfg.start_temperature {
        Some(t) => t,
        None => {
            let t = calibrate(data, family, cfg, &limits, &null)?;
            match cfg.end_temperature {
                Some(e) if t <= e => e / END_RATIO,
                _ => t,
            }
        }
    };
    let end_t = cfg.end_temperature.unwrap_or(start_t * END_RATIO);
    let ratio = (end_t / start_t).ln();
    let steps = (cfg.iterations.max(2) - 1) as f64;

    let mut rng = seed::rng(cfg.seed);
    let mut current = null.clone();
    let mut best = null;
    for it in 0..cfg.iterations {
        let temperature = start_t * (ratio * it as f64 / steps).exp();
        let Some(trees) = neighbour(&current.trees, &cfg.moves, &limits, &mut rng)? else {
            break;
        };
        let candidate = fit_given_trees(trees, family, data)?;
        let delta = candidate.score - current.score;
        let accept = delta <= 0.0 || rng.random::<f64>() < (-delta / temperature).exp();
        if accept {
            current = candidate;
            if current.score < best.score - 1e-12 * best.score.abs() {
                best = current.clone();
            }
        }
    }
    log::debug!(
        "anneal: {} iterations, best score {} with {} trees",
        cfg.iterations,
        best.score,
        best.trees.len()
    );
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticConfig};
    use crate::logicreg::score;

    fn planted(n: usize, p: usize, expr: &str, noise: f64, seed_value: u64) -> LogicData {
        let cfg = SyntheticConfig {
            n_samples: n,
            p,
            p_prime: 0,
            subgroup_fraction: 0.0,
            planted_logic_expression: expr.into(),
            planted_linear_coefficients: vec![],
            label_noise_rate: noise,
            marker_separation: None,
            seed: seed_value,
            ..SyntheticConfig::default()
        };
        LogicData::from_dataset(&generate_synthetic(&cfg).unwrap()).unwrap()
    }

    fn quick(seed_value: u64) -> AnnealConfig {
        AnnealConfig {
            iterations: 4000,
            seed: seed_value,
            ..AnnealConfig::default()
        }
    }

    #[test]
    fn noiseless_single_tree_is_recovered() {
        let data = planted(500, 30, "OR AND x3 !x7 x12", 0.0, 11);
        let m = anneal_fit(&data, Family::Classification, &quick(5)).unwrap();
        assert_eq!(m.score, 0.0);
        assert_eq!(score(&m, &data).unwrap(), 0.0);
    }

    #[test]
    fn constant_response_gives_null_model() {
        let data = planted(60, 5, "OR x0 !x0", 0.0, 1);
        assert!(data.y().iter().all(|&v| v == 1.0));
        let m = anneal_fit(&data, Family::Logistic, &quick(1)).unwrap();
        assert!(m.trees.is_empty());
        assert_eq!(m.coefficients[0], crate::glm::logit(1.0));
        let lin = anneal_fit(&data, Family::Linear, &quick(1)).unwrap();
        assert_eq!(lin.coefficients, vec![1.0]);
        assert_eq!(lin.score, 0.0);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let data = planted(200, 10, "AND x1 x2", 0.1, 3);
        let a = anneal_fit(&data, Family::Logistic, &quick(9)).unwrap();
        let b = anneal_fit(&data, Family::Logistic, &quick(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn result_respects_limits_and_beats_start() {
        let data = planted(300, 12, "OR AND x0 x1 AND x2 !x3", 0.15, 8);
        for family in [Family::Linear, Family::Logistic, Family::Classification] {
            for (leaves, trees, total) in [(2, 2, None), (3, 1, None), (8, 2, Some(3))] {
                let cfg = AnnealConfig {
                    iterations: 1500,
                    max_leaves: leaves,
                    max_trees: trees,
                    max_total_leaves: total,
                    ..quick(2)
                };
                let m = anneal_fit(&data, family, &cfg).unwrap();
                assert!(cfg.limits(family, 12).admits(&m.trees));
                let null = fit_given_trees(vec![], family, &data).unwrap();
                assert!(m.score <= null.score);
                assert!((score(&m, &data).unwrap() - m.score).abs() < 1e-8 * m.score.max(1.0));
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let data = planted(40, 4, "x0", 0.0, 1);
        let bad = [
            AnnealConfig { iterations: 0, ..AnnealConfig::default() },
            AnnealConfig { start_temperature: Some(1.0), end_temperature: Some(2.0), ..AnnealConfig::default() },
            AnnealConfig {
                moves: MoveWeights { grow: 0.0, prune: 0.0, split: 0.0, delete: 0.0, relabel: 0.0, flip_operator: 0.0 },
                ..AnnealConfig::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(anneal_fit(&data, Family::Logistic, &cfg), Err(Error::Config(_))));
        }
    }
}
