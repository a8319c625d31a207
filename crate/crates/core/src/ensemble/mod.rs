//! Combining an existing-covariate model with a model over the new binary
//! covariates: weighted averaging, a composite model over both covariate
//! sets, and per-sample routing by an SVM gate.
//!
//! `e` below is the existing model and `m` the new-data model.

mod gate;
mod predictions;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::split::split_labels;
use crate::dataset::{BitMatrix, Dataset};
use crate::error::{Error, Result};
use crate::glm::{classify, fit_weighted_logistic, LogisticModel, WeightSpec};
use crate::logicreg::LogicModel;
use crate::metrics::{auroc, DEFAULT_THRESHOLD};
use crate::seed;

pub use gate::{gate_labels, train_gate, train_gate_on, Gate, GateConfig, GateFeatures, GateModel, GateSearch};
pub use predictions::{PredictionSet, Source};

/// A fitted model that can score a [`Dataset`].
#[derive(Clone, Debug, PartialEq)]
pub enum BaseModel {
    /// Logistic model over named `X`/`Z` columns.
    Logistic { source: Source, model: LogisticModel },
    /// Logic model whose leaf `j` refers to `x_names[j]`.
    Logic { model: LogicModel, x_names: Vec<String> },
}

impl BaseModel {
    /// Fit a logistic model on the named columns of `train`.
    pub fn fit_logistic(train: &Dataset, names: &[String], weights: &WeightSpec, source: Source) -> Result<Self> {
        let x = train.design(names)?;
        let model = fit_weighted_logistic(&x, names, &train.labels(), weights)?;
        Ok(BaseModel::Logistic { source, model })
    }

    pub fn source(&self) -> Source {
        match self {
            BaseModel::Logistic { source, .. } => *source,
            BaseModel::Logic { .. } => Source::GeneticLogic,
        }
    }

    /// Columns the model reads.
    pub fn covariates(&self) -> Vec<String> {
        match self {
            BaseModel::Logistic { model, .. } => model.names.clone(),
            BaseModel::Logic { model, x_names } => {
                let used: BTreeSet<usize> = model
                    .trees
                    .iter()
                    .flat_map(|t| t.leaves())
                    .map(|l| l.index)
                    .collect();
                used.into_iter().map(|j| x_names[j].clone()).collect()
            }
        }
    }

    pub fn predict(&self, ds: &Dataset) -> Result<PredictionSet> {
        let scores = match self {
            BaseModel::Logistic { model, .. } => model.predict_design(&ds.design(&model.names)?)?,
            BaseModel::Logic { model, x_names } => {
                let refs = x_names
                    .iter()
                    .map(|name| match ds.column(name) {
                        Some(crate::dataset::ColumnRef::X(j)) => Ok(j),
                        _ => Err(Error::UnknownColumn(name.clone())),
                    })
                    .collect::<Result<Vec<usize>>>()?;
                let rows: Vec<Vec<bool>> = ds
                    .samples()
                    .iter()
                    .map(|s| refs.iter().map(|&j| s.x[j]).collect())
                    .collect();
                let scores = model.predict_bits(&BitMatrix::from_rows(&rows, refs.len()))?;
                if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
                    return Err(Error::Unsupported(
                        "linear-family logic models do not produce probabilities".into(),
                    ));
                }
                scores
            }
        };
        PredictionSet::new(self.source(), ds.ids(), scores)
    }
}

/// `alpha * e + (1 - alpha) * m` per sample.
pub fn weighted_average(e: &PredictionSet, m: &PredictionSet, alpha: f64) -> Result<PredictionSet> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Precondition(format!("alpha {alpha} outside [0, 1]")));
    }
    e.check_same_samples(m)?;
    let scores = e
        .scores()
        .iter()
        .zip(m.scores())
        .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
        .collect();
    PredictionSet::new(Source::Averaged, e.ids().to_vec(), scores)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaConfig {
    pub grid: Vec<f64>,
    pub n_repeats: usize,
    /// Share of each repeat held out for scoring.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self {
            grid: (0..=10).map(|k| f64::from(k) / 10.0).collect(),
            n_repeats: 20,
            test_fraction: 0.3,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaSelection {
    pub alpha: f64,
    pub grid: Vec<f64>,
    /// Mean held-out auROC per grid value.
    pub mean_auroc: Vec<f64>,
    /// `per_split[r][g]`: auROC of grid value `g` on repeat `r`.
    pub per_split: Vec<Vec<f64>>,
    pub seed: u64,
}

/// Choose the averaging weight by repeated stratified train/test splits;
/// the models are fixed, so only the held-out part of each split is
/// scored. Ties (within 1e-12) go to the smaller alpha.
pub fn select_alpha(e: &PredictionSet, m: &PredictionSet, truth: &[u8], cfg: &AlphaConfig) -> Result<AlphaSelection> {
    if cfg.grid.is_empty() || cfg.grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::Config("alpha grid must be a non-empty subset of [0, 1]".into()));
    }
    if cfg.n_repeats == 0 {
        return Err(Error::Config("alpha selection needs at least one repeat".into()));
    }
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(Error::Config("test_fraction must lie in (0, 1)".into()));
    }
    e.check_same_samples(m)?;
    if truth.len() != e.len() {
        return Err(Error::SampleMismatch(format!("{} labels for {} predictions", truth.len(), e.len())));
    }
    let averaged = cfg
        .grid
        .iter()
        .map(|&a| weighted_average(e, m, a))
        .collect::<Result<Vec<_>>>()?;
    let fractions = [1.0 - cfg.test_fraction, cfg.test_fraction];
    let mut per_split = Vec::with_capacity(cfg.n_repeats);
    for r in 0..cfg.n_repeats {
        let split = split_labels(truth, &fractions, seed::derive_indexed(cfg.seed, "alpha-split", r))?;
        let held = &split.parts[1];
        let y: Vec<u8> = held.iter().map(|&i| truth[i]).collect();
        let row = averaged
            .iter()
            .map(|p| auroc(&held.iter().map(|&i| p.scores()[i]).collect::<Vec<_>>(), &y))
            .collect::<Result<Vec<_>>>()?;
        per_split.push(row);
    }
    let mean_auroc: Vec<f64> = (0..cfg.grid.len())
        .map(|g| per_split.iter().map(|r| r[g]).sum::<f64>() / cfg.n_repeats as f64)
        .collect();
    let top = mean_auroc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let alpha = cfg
        .grid
        .iter()
        .zip(&mean_auroc)
        .filter(|(_, &s)| s >= top - 1e-12 * top.abs().max(1.0))
        .map(|(&a, _)| a)
        .fold(f64::INFINITY, f64::min);
    Ok(AlphaSelection {
        alpha,
        grid: cfg.grid.clone(),
        mean_auroc,
        per_split,
        seed: cfg.seed,
    })
}

/// Logistic model over the `X` columns used by `genetic` plus every `Z`
/// column of `train`.
pub fn fit_composite(train: &Dataset, genetic: &BaseModel, weights: &WeightSpec) -> Result<BaseModel> {
    let used: BTreeSet<String> = genetic.covariates().into_iter().collect();
    let mut names: Vec<String> = train.x_names().iter().filter(|n| used.contains(*n)).cloned().collect();
    names.extend(train.z_names());
    if names.is_empty() {
        return Err(Error::Precondition("composite model has no covariates".into()));
    }
    BaseModel::fit_logistic(train, &names, weights, Source::Composite)
}

/// Route each sample to `e` where the gate says +1, otherwise to `m`.
pub fn two_stage_predict(gate: &Gate, e: &PredictionSet, m: &PredictionSet, ds: &Dataset) -> Result<PredictionSet> {
    e.check_same_samples(m)?;
    e.check_dataset(ds)?;
    let decisions = gate.decisions(ds)?;
    let mut scores = Vec::with_capacity(e.len());
    let mut sources = Vec::with_capacity(e.len());
    for (i, &d) in decisions.iter().enumerate() {
        let from = if d == 1 { e } else { m };
        scores.push(from.scores()[i]);
        sources.push(from.sources()[i]);
    }
    PredictionSet::with_routing(
        Source::TwoStageGated,
        e.ids().to_vec(),
        scores,
        sources,
        decisions.into_iter().map(Some).collect(),
    )
}

/// `e` where `e` is right, otherwise `m`; needs the true labels and is only
/// a reference ceiling for gated routing.
pub fn two_stage_oracle(e: &PredictionSet, m: &PredictionSet, truth: &[u8]) -> Result<PredictionSet> {
    e.check_same_samples(m)?;
    if truth.len() != e.len() {
        return Err(Error::SampleMismatch(format!("{} labels for {} predictions", truth.len(), e.len())));
    }
    let mut scores = Vec::with_capacity(e.len());
    let mut sources = Vec::with_capacity(e.len());
    for i in 0..e.len() {
        let from = if classify(e.scores()[i], DEFAULT_THRESHOLD) == truth[i] { e } else { m };
        scores.push(from.scores()[i]);
        sources.push(from.sources()[i]);
    }
    let n = e.len();
    PredictionSet::with_routing(Source::TwoStageOracle, e.ids().to_vec(), scores, sources, vec![None; n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticConfig, SUBGROUP_A};
    use crate::dataset::{CohortTag, SampleRecord, ZColumn};
    use crate::logicreg::{Family, LogicTree};
    use crate::metrics::{self, evaluate};
    use crate::svm::{KernelSpec, Scaling, SvmConfig, SvmModel};
    use proptest::prelude::*;
    use rand::Rng;

    fn set(kind: Source, scores: &[f64]) -> PredictionSet {
        let ids = (0..scores.len()).map(|i| format!("s{i}")).collect();
        PredictionSet::new(kind, ids, scores.to_vec()).unwrap()
    }

    fn accuracy(p: &PredictionSet, truth: &[u8]) -> f64 {
        let c = metrics::confusion(p.scores(), truth, DEFAULT_THRESHOLD).unwrap();
        metrics::rates(&c).accuracy.unwrap()
    }

    fn in_subgroup_a(s: &SampleRecord) -> bool {
        s.cohort == Some(CohortTag::Subgroup(SUBGROUP_A.into()))
    }

    /// A linear gate on the marker column: positive marker routes to `e`.
    fn marker_gate(sign: f64, bias: f64) -> Gate {
        Gate::Svm(GateModel {
            svm: SvmModel {
                kernel: KernelSpec::Linear,
                c: 1.0,
                scaling: Scaling::identity(1),
                support_vectors: vec![vec![1.0]],
                dual_coef: vec![sign],
                bias,
            },
            features: GateFeatures::Named { columns: vec!["marker".into()] },
            feature_names: vec!["marker".into()],
            base: Source::Existing,
        })
    }

    fn heterogeneous(seed_value: u64) -> (Dataset, Dataset) {
        let ds = generate_synthetic(&SyntheticConfig {
            seed: seed_value,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let half = ds.n() / 2;
        let train: Vec<usize> = (0..half).collect();
        let test: Vec<usize> = (half..ds.n()).collect();
        (ds.subset(&train), ds.subset(&test))
    }

    #[test]
    fn weighted_average_boundaries() {
        let e = set(Source::Existing, &[0.8, 0.1, 0.3]);
        let m = set(Source::GeneticLogic, &[0.2, 0.9, 0.3]);
        assert_eq!(weighted_average(&e, &m, 1.0).unwrap().scores(), e.scores());
        assert_eq!(weighted_average(&e, &m, 0.0).unwrap().scores(), m.scores());
        assert_eq!(weighted_average(&e, &m, 0.5).unwrap().scores()[0], 0.5);
        let other = PredictionSet::new(Source::GeneticLogic, vec!["a".into(); 3], vec![0.5; 3]).unwrap();
        assert!(matches!(weighted_average(&e, &other, 0.5), Err(Error::SampleMismatch(_))));
        assert!(weighted_average(&e, &m, 1.5).is_err());
    }

    #[test]
    fn alpha_selection_examples() {
        let mut rng = crate::seed::rng(2);
        let n = 200;
        let truth: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        let informative: Vec<f64> = truth
            .iter()
            .map(|&y| (0.5 * f64::from(y) + 0.5 * rng.random::<f64>()).clamp(0.0, 1.0))
            .collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let e = set(Source::Existing, &informative);
        let m = set(Source::GeneticLogistic, &noise);
        let cfg = AlphaConfig::default();
        let sel = select_alpha(&e, &m, &truth, &cfg).unwrap();
        assert_eq!(sel.alpha, 1.0);
        assert_eq!(sel.per_split.len(), 20);

        let same = select_alpha(&e, &e, &truth, &cfg).unwrap();
        assert_eq!(same.alpha, 0.0);

        let single = AlphaConfig { grid: vec![0.5], ..cfg.clone() };
        assert_eq!(select_alpha(&e, &m, &truth, &single).unwrap().alpha, 0.5);
        assert_eq!(select_alpha(&e, &m, &truth, &cfg).unwrap(), sel);
        assert!(select_alpha(&e, &m, &truth, &AlphaConfig { grid: vec![], ..cfg }).is_err());
    }

    #[test]
    fn composite_design_is_the_union() {
        let ds = generate_synthetic(&SyntheticConfig { n_samples: 300, ..SyntheticConfig::default() }).unwrap();
        let empty = BaseModel::Logic {
            model: LogicModel {
                family: Family::Logistic,
                trees: vec![],
                coefficients: vec![0.0],
                score: 0.0,
            },
            x_names: ds.x_names().to_vec(),
        };
        let c = fit_composite(&ds, &empty, &WeightSpec::ClassBalanced).unwrap();
        assert_eq!(c.covariates(), ds.z_names());

        let tree = LogicTree::parse_prefix("OR x3 !x7").unwrap();
        let genetic = BaseModel::Logic {
            model: LogicModel {
                family: Family::Logistic,
                trees: vec![tree],
                coefficients: vec![-0.2, 0.4],
                score: 0.0,
            },
            x_names: ds.x_names().to_vec(),
        };
        let c = fit_composite(&ds, &genetic, &WeightSpec::ClassBalanced).unwrap();
        assert_eq!(c.covariates().len(), ds.p_prime() + 2);
        assert_eq!(&c.covariates()[..2], &["x3".to_string(), "x7".to_string()]);
        assert_eq!(c.source(), Source::Composite);
    }

    #[test]
    fn composite_beats_single_sources_when_signals_are_complementary() {
        // y depends additively on one SNP and one clinical covariate.
        let mut rng = crate::seed::rng(9);
        let samples: Vec<SampleRecord> = (0..400)
            .map(|i| {
                let x0 = rng.random::<bool>();
                let z0: f64 = rng.random::<f64>() * 4.0 - 2.0;
                let eta = 2.5 * f64::from(u8::from(x0)) - 1.25 + 1.5 * z0;
                let y = u8::from(rng.random::<f64>() < crate::glm::sigmoid(eta));
                SampleRecord {
                    id: format!("s{i}"),
                    x: vec![x0, rng.random::<bool>()],
                    z: vec![z0],
                    y,
                    cohort: None,
                    split: None,
                }
            })
            .collect();
        let ds = Dataset::new(samples, vec!["x0".into(), "x1".into()], vec![ZColumn::continuous("z0")], "y").unwrap();
        let w = WeightSpec::ClassBalanced;
        let clinical = BaseModel::fit_logistic(&ds, &["z0".into()], &w, Source::Existing).unwrap();
        let genetic = BaseModel::fit_logistic(&ds, &["x0".into()], &w, Source::GeneticLogistic).unwrap();
        let composite = fit_composite(&ds, &genetic, &w).unwrap();
        let score = |m: &BaseModel| m.predict(&ds).unwrap().evaluate(&ds).unwrap().auroc.unwrap();
        let (c, g, both) = (score(&clinical), score(&genetic), score(&composite));
        assert!(both > c && both > g, "composite {both} vs clinical {c}, genetic {g}");
    }

    #[test]
    fn degenerate_gates_are_rejected() {
        let (train, _) = heterogeneous(4);
        let truth: Vec<f64> = train.labels().iter().map(|&y| f64::from(y)).collect();
        let perfect = PredictionSet::new(Source::Existing, train.ids(), truth.clone()).unwrap();
        let err = train_gate_on(&perfect, &train, &GateConfig::default()).unwrap_err();
        assert!(matches!(err, Error::GateDegenerate { incorrect: 0, .. }));
        let wrong: Vec<f64> = truth.iter().map(|y| 1.0 - y).collect();
        let wrong = PredictionSet::new(Source::Existing, train.ids(), wrong).unwrap();
        assert!(matches!(
            train_gate_on(&wrong, &train, &GateConfig::default()),
            Err(Error::GateDegenerate { correct: 0, .. })
        ));
    }

    /// Base predictions that are right exactly on subgroup A.
    fn right_on_a(ds: &Dataset) -> PredictionSet {
        let scores = ds
            .samples()
            .iter()
            .map(|s| {
                let y = f64::from(s.y);
                if in_subgroup_a(s) { y } else { 1.0 - y }
            })
            .collect();
        PredictionSet::new(Source::Existing, ds.ids(), scores).unwrap()
    }

    #[test]
    fn gate_learns_a_separable_subgroup() {
        let (train, test) = heterogeneous(5);
        for features in [GateFeatures::Named { columns: vec!["marker".into()] }, GateFeatures::All] {
            let cfg = GateConfig { features, ..GateConfig::default() };
            let gate = train_gate_on(&right_on_a(&train), &train, &cfg).unwrap();
            let decisions = gate.decisions(&test).unwrap();
            let truth = gate_labels(&right_on_a(&test), &test).unwrap();
            let hits = decisions.iter().zip(&truth).filter(|(a, b)| a == b).count();
            let acc = hits as f64 / test.n() as f64;
            assert!(acc >= 0.9, "gate accuracy {acc} with {:?}", cfg.features);
        }
    }

    #[test]
    fn gate_search_is_deterministic_and_accurate() {
        let (train, test) = heterogeneous(6);
        let cfg = GateConfig {
            search: Some(GateSearch::default()),
            ..GateConfig::default()
        };
        let a = train_gate_on(&right_on_a(&train), &train, &cfg).unwrap();
        let b = train_gate_on(&right_on_a(&train), &train, &cfg).unwrap();
        assert_eq!(a, b);
        let decisions = a.decisions(&test).unwrap();
        let truth = gate_labels(&right_on_a(&test), &test).unwrap();
        let hits = decisions.iter().zip(&truth).filter(|(x, y)| x == y).count();
        assert!(hits as f64 >= 0.9 * test.n() as f64);
    }

    #[test]
    fn gate_feature_mismatch_is_an_error() {
        let (train, _) = heterogeneous(7);
        let cfg = GateConfig {
            features: GateFeatures::Named { columns: vec!["absent".into()] },
            ..GateConfig::default()
        };
        assert!(matches!(
            train_gate_on(&right_on_a(&train), &train, &cfg),
            Err(Error::UnknownColumn(_))
        ));
        let gate = train_gate_on(&right_on_a(&train), &train, &GateConfig::default()).unwrap();
        let narrower = train.subset(&[0, 1, 2]);
        let renamed = Dataset::new(
            narrower.samples().to_vec(),
            narrower.x_names().iter().map(|n| format!("{n}_")).collect(),
            narrower.z_columns().to_vec(),
            "y",
        )
        .unwrap();
        assert!(gate.decisions(&renamed).is_err());
    }

    #[test]
    fn routing_boundaries_and_pass_through() {
        let (_, test) = heterogeneous(8);
        let e = set(Source::Existing, &vec![0.3; test.n()]);
        let m = set(Source::GeneticLogic, &vec![0.9; test.n()]);
        let ids = test.ids();
        let e = PredictionSet::new(Source::Existing, ids.clone(), e.scores().to_vec()).unwrap();
        let m = PredictionSet::new(Source::GeneticLogic, ids, m.scores().to_vec()).unwrap();

        let all_e = two_stage_predict(&marker_gate(0.0, 1.0), &e, &m, &test).unwrap();
        assert_eq!(all_e.scores(), e.scores());
        let all_m = two_stage_predict(&marker_gate(0.0, -1.0), &e, &m, &test).unwrap();
        assert_eq!(all_m.scores(), m.scores());
        let pass = two_stage_predict(&Gate::PassThrough, &e, &m, &test).unwrap();
        assert_eq!(pass.scores(), e.scores());
        assert!(pass.sources().iter().all(|&s| s == Source::Existing));

        let mixed = two_stage_predict(&marker_gate(1.0, 0.0), &e, &m, &test).unwrap();
        let counts: usize = mixed.routing_counts().iter().map(|(_, c)| c).sum();
        assert_eq!(counts, test.n());
        assert!(mixed.sources().iter().all(|s| [Source::Existing, Source::GeneticLogic].contains(s)));
    }

    #[test]
    fn perfect_gate_beats_both_models_on_held_out_data() {
        let (train, test) = heterogeneous(9);
        let clinical = BaseModel::fit_logistic(&train, &train.z_names(), &WeightSpec::ClassBalanced, Source::Existing).unwrap();
        let planted = SyntheticConfig::default().planted_tree().unwrap();
        let genetic = BaseModel::Logic {
            model: LogicModel {
                family: Family::Classification,
                trees: vec![planted],
                coefficients: vec![0.0, 1.0],
                score: 0.0,
            },
            x_names: train.x_names().to_vec(),
        };
        let e = clinical.predict(&test).unwrap();
        let m = genetic.predict(&test).unwrap();
        let gated = two_stage_predict(&marker_gate(1.0, 0.0), &e, &m, &test).unwrap();
        // The marker gate coincides with subgroup membership on this draw.
        let agree = test
            .samples()
            .iter()
            .zip(gated.gate())
            .filter(|(s, g)| in_subgroup_a(s) == (g.unwrap() == 1))
            .count();
        assert!(agree as f64 >= 0.99 * test.n() as f64);
        let truth = test.labels();
        let (ae, am, ag) = (accuracy(&e, &truth), accuracy(&m, &truth), accuracy(&gated, &truth));
        assert!(ag >= ae.max(am), "gated {ag} vs e {ae}, m {am}");
        let report = evaluate(gated.scores(), &truth, 0.5).unwrap();
        assert_eq!(report.accuracy, Some(ag));
    }

    #[test]
    fn oracle_examples() {
        let truth = [1, 0, 1, 0];
        let e = set(Source::Existing, &[0.9, 0.8, 0.2, 0.1]);
        let m = set(Source::GeneticLogic, &[0.1, 0.3, 0.7, 0.9]);
        let o = two_stage_oracle(&e, &m, &truth).unwrap();
        assert_eq!(accuracy(&o, &truth), 1.0);
        assert_eq!(o.scores(), &[0.9, 0.3, 0.7, 0.1]);
        let same = two_stage_oracle(&e, &e, &truth).unwrap();
        assert_eq!(same.scores(), e.scores());
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<u8>)> {
        (1usize..80).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..=1.0, n),
                proptest::collection::vec(0.0f64..=1.0, n),
                proptest::collection::vec(0u8..2, n),
            )
        })
    }

    proptest! {
        #[test]
        fn averaging_is_affine_in_alpha((a, b, _) in instance()) {
            let e = set(Source::Existing, &a);
            let m = set(Source::GeneticLogic, &b);
            let lo = weighted_average(&e, &m, 0.0).unwrap();
            let hi = weighted_average(&e, &m, 1.0).unwrap();
            let mid = weighted_average(&e, &m, 0.5).unwrap();
            for i in 0..a.len() {
                prop_assert_eq!(mid.scores()[i], (lo.scores()[i] + hi.scores()[i]) / 2.0);
            }
        }

        #[test]
        fn oracle_dominates_existing_model((a, b, truth) in instance()) {
            let e = set(Source::Existing, &a);
            let m = set(Source::GeneticLogic, &b);
            let o = two_stage_oracle(&e, &m, &truth).unwrap();
            prop_assert!(accuracy(&o, &truth) >= accuracy(&e, &truth));
            for i in 0..truth.len() {
                if classify(a[i], 0.5) == truth[i] {
                    prop_assert_eq!(o.scores()[i], a[i]);
                }
            }
        }

        #[test]
        fn gated_never_beats_oracle_when_m_covers_e(
            (a, _, truth) in instance(),
            w in -2.0f64..2.0,
            bias in -1.0f64..1.0,
            markers in proptest::collection::vec(-3.0f64..3.0, 80),
        ) {
            let n = truth.len();
            // m is right wherever e is wrong.
            let b: Vec<f64> = (0..n)
                .map(|i| if classify(a[i], 0.5) == truth[i] { a[i] } else { f64::from(truth[i]) })
                .collect();
            let samples: Vec<SampleRecord> = (0..n)
                .map(|i| SampleRecord {
                    id: format!("s{i}"),
                    x: vec![false],
                    z: vec![markers[i]],
                    y: truth[i],
                    cohort: None,
                    split: None,
                })
                .collect();
            let ds = Dataset::new(samples, vec!["x0".into()], vec![ZColumn::continuous("marker")], "y").unwrap();
            let e = set(Source::Existing, &a);
            let m = set(Source::GeneticLogistic, &b);
            let gated = two_stage_predict(&marker_gate(w, bias), &e, &m, &ds).unwrap();
            let oracle = two_stage_oracle(&e, &m, &truth).unwrap();
            prop_assert!(accuracy(&gated, &truth) <= accuracy(&oracle, &truth));
            let pass = two_stage_predict(&Gate::PassThrough, &e, &m, &ds).unwrap();
            prop_assert_eq!(pass.scores(), e.scores());
        }
    }

    #[test]
    fn svm_config_default_gate_is_balanced() {
        assert!(GateConfig::default().svm.class_balanced);
        assert_eq!(GateConfig::default().svm.c, SvmConfig::default().c);
    }
}
