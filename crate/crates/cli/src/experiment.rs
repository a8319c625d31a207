//! Seeded experiment pipeline: data preparation, the model recipes, and
//! evaluation on the training/test and validation partitions.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use twostage::dataset::{
    assign_splits, generate_synthetic, load_csv, Dataset, Schema, SplitTag,
};
use twostage::ensemble::{
    fit_composite, select_alpha, train_gate_on, two_stage_oracle, two_stage_predict, weighted_average, BaseModel,
    Gate, PredictionSet, Source,
};
use twostage::glm::WeightSpec;
use twostage::logicreg::{anneal_fit, Family, LogicData};
use twostage::metrics::MetricsReport;
use twostage::seed;
use twostage::select::{iterative_select, stepwise_logistic};
use twostage::Error as CoreError;

use crate::config::{DataSource, ExperimentConfig, Recipe};
use crate::error::{CliError, CliResult};

/// Where reported metrics are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Partition {
    /// Training and test samples together.
    TrainingTest,
    Validation,
}

impl Partition {
    pub const ALL: [Partition; 2] = [Partition::TrainingTest, Partition::Validation];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::TrainingTest => "training_test",
            Partition::Validation => "validation",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Partition::TrainingTest => "Training/Test samples",
            Partition::Validation => "Validation samples",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Partition::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RecipeStatus {
    Ok(BTreeMap<Partition, MetricsReport>),
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecipeEntry {
    pub recipe: Recipe,
    pub status: RecipeStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub gate_features: String,
    pub sample_counts: BTreeMap<Partition, usize>,
    pub entries: Vec<RecipeEntry>,
    pub routing: BTreeMap<Partition, Vec<(Source, usize)>>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn failures(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e.status, RecipeStatus::Failed(_)))
            .count()
    }

    pub fn metrics(&self, recipe: Recipe, partition: Partition) -> Option<&MetricsReport> {
        self.entries.iter().find(|e| e.recipe == recipe).and_then(|e| match &e.status {
            RecipeStatus::Ok(m) => m.get(&partition),
            RecipeStatus::Failed(_) => None,
        })
    }
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub predictions: BTreeMap<(Recipe, Partition), PredictionSet>,
    /// Truth-dependent routing ceiling, when the two-stage recipe ran.
    pub oracle: BTreeMap<Partition, PredictionSet>,
    /// Text form of each fitted model, keyed by file stem.
    pub models: BTreeMap<String, String>,
    pub partitions: BTreeMap<Partition, Dataset>,
}

/// Load or generate the data, apply the cohort comparison and tag splits.
pub fn prepare_data(cfg: &ExperimentConfig) -> CliResult<Dataset> {
    let ds = load_source(cfg)?;
    let ds = match &cfg.comparison {
        Some(c) => {
            let (cases, controls) = c.parse()?;
            let kept = ds.filter(|s| {
                s.cohort
                    .as_ref()
                    .is_some_and(|t| cases.contains(t) || controls.contains(t))
            });
            let labels: Vec<u8> = kept
                .samples()
                .iter()
                .map(|s| u8::from(cases.contains(s.cohort.as_ref().expect("filtered on cohort"))))
                .collect();
            kept.with_labels(&labels)?
        }
        None => ds,
    };
    if ds.is_empty() {
        return Err(CoreError::InvalidDataset("no samples left after the cohort comparison".into()).into());
    }
    let s = &cfg.split;
    if s.use_existing {
        if ds.samples().iter().any(|r| r.split.is_none()) {
            return Err(CoreError::InvalidDataset("split.use_existing is set but some samples lack a split".into()).into());
        }
        return Ok(ds);
    }
    let total = s.training + s.test + s.validation;
    let mut tags = vec![SplitTag::Training];
    let mut fractions = vec![s.training / total];
    if s.test > 0.0 {
        tags.push(SplitTag::Test);
        fractions.push(s.test / total);
    }
    tags.push(SplitTag::Validation);
    fractions.push(s.validation / total);
    Ok(assign_splits(ds, &tags, &fractions, seed::derive(cfg.seed, "split"))?)
}

fn load_source(cfg: &ExperimentConfig) -> CliResult<Dataset> {
    match &cfg.data {
        DataSource::Synthetic { synthetic } => {
            let mut s = synthetic.clone();
            s.seed = seed::derive(cfg.seed, "synthetic");
            Ok(generate_synthetic(&s)?)
        }
        DataSource::Csv { path, schema } => {
            let schema_path = schema.clone().unwrap_or_else(|| default_schema_path(path));
            let schema = Schema::from_file(&schema_path)?;
            let (ds, report) = load_csv(path, &schema)?;
            if report.dropped > 0 {
                log::warn!("dropped {} incomplete rows from {}", report.dropped, path.display());
            }
            Ok(ds)
        }
    }
}

/// `data.csv` -> `data.schema.toml`.
pub fn default_schema_path(data: &std::path::Path) -> PathBuf {
    data.with_extension("schema.toml")
}

fn in_splits(ds: &Dataset, tags: &[SplitTag]) -> Dataset {
    ds.filter(|s| s.split.is_some_and(|t| tags.contains(&t)))
}

fn logic_data(ds: &Dataset, weights: &WeightSpec) -> twostage::Result<LogicData> {
    let data = LogicData::from_dataset(ds)?;
    match weights {
        WeightSpec::Unweighted => Ok(data),
        w => data.with_weights(w.resolve(&ds.labels())?),
    }
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    fit: Dataset,
    genetic_fit: Dataset,
    parts: BTreeMap<Partition, Dataset>,
    models: BTreeMap<Recipe, BaseModel>,
    preds: BTreeMap<(Recipe, Partition), PredictionSet>,
    oracle: BTreeMap<Partition, PredictionSet>,
    texts: BTreeMap<String, String>,
    routing: BTreeMap<Partition, Vec<(Source, usize)>>,
    notes: Vec<String>,
}

impl Runner<'_> {
    fn recipe_seed(&self, r: Recipe) -> u64 {
        seed::derive(self.cfg.seed, r.as_str())
    }

    fn predict_all(&mut self, r: Recipe, model: &BaseModel) -> twostage::Result<()> {
        for p in Partition::ALL {
            let preds = model.predict(&self.parts[&p])?;
            self.preds.insert((r, p), preds);
        }
        Ok(())
    }

    fn dependency(&self, r: Recipe) -> Result<&BaseModel, String> {
        self.models
            .get(&r)
            .ok_or_else(|| format!("depends on recipe `{r}`, which did not produce a model"))
    }

    fn fit_base(&mut self, r: Recipe) -> twostage::Result<BaseModel> {
        let cfg = self.cfg;
        match r {
            Recipe::Clinical => {
                let names = self.fit.z_names();
                if names.is_empty() {
                    return Err(CoreError::Precondition("the clinical model needs Z columns".into()));
                }
                BaseModel::fit_logistic(&self.fit, &names, &cfg.clinical.weights, Source::Existing)
            }
            Recipe::GeneticLassoLogistic => {
                let ds = &self.genetic_fit;
                let names = ds.x_names().to_vec();
                if names.is_empty() {
                    return Err(CoreError::InvalidDataset("no X columns".into()));
                }
                let x = ds.design(&names)?;
                let y = ds.labels();
                let mut select = cfg.lasso.select.clone();
                select.seed = self.recipe_seed(r);
                let trace = iterative_select(&x, &y, &select)?;
                let chosen: Vec<String> = trace.selected.iter().map(|&j| names[j].clone()).collect();
                self.notes.push(format!(
                    "{r}: lasso bound {:.6} kept {} of {} SNPs",
                    trace.bound,
                    chosen.len(),
                    names.len()
                ));
                let sub = ds.design(&chosen)?;
                let step = stepwise_logistic(&sub, &chosen, &y, &cfg.lasso.weights, cfg.lasso.direction, cfg.lasso.criterion)?;
                Ok(BaseModel::Logistic {
                    source: Source::GeneticLogistic,
                    model: step.model,
                })
            }
            Recipe::GeneticLogicClass | Recipe::GeneticLogicLogistic => {
                let ds = &self.genetic_fit;
                if ds.p() == 0 {
                    return Err(CoreError::InvalidDataset("no X columns".into()));
                }
                let family = if r == Recipe::GeneticLogicClass {
                    Family::Classification
                } else {
                    Family::Logistic
                };
                let data = logic_data(ds, &cfg.logic.weights)?;
                let mut anneal = cfg.logic.anneal.clone();
                anneal.seed = self.recipe_seed(r);
                let model = anneal_fit(&data, family, &anneal)?;
                Ok(BaseModel::Logic {
                    model,
                    x_names: ds.x_names().to_vec(),
                })
            }
            Recipe::Composite => {
                let genetic = self.dependency(cfg.ensemble.genetic).map_err(CoreError::Precondition)?;
                fit_composite(&self.fit, genetic, &cfg.ensemble.composite_weights)
            }
            Recipe::WeightedAverage | Recipe::TwoStage => unreachable!("not a base model"),
        }
    }

    fn run_recipe(&mut self, r: Recipe) -> Result<(), String> {
        let genetic = self.cfg.ensemble.genetic;
        match r {
            Recipe::WeightedAverage => {
                self.dependency(Recipe::Clinical)?;
                self.dependency(genetic)?;
                let e = &self.preds[&(Recipe::Clinical, Partition::TrainingTest)];
                let m = &self.preds[&(genetic, Partition::TrainingTest)];
                let mut alpha_cfg = self.cfg.ensemble.alpha.clone();
                alpha_cfg.seed = self.recipe_seed(r);
                let truth = self.parts[&Partition::TrainingTest].labels();
                let sel = select_alpha(e, m, &truth, &alpha_cfg).map_err(|e| e.to_string())?;
                self.notes.push(format!("{r}: alpha = {}", sel.alpha));
                for p in Partition::ALL {
                    let e = &self.preds[&(Recipe::Clinical, p)];
                    let m = &self.preds[&(genetic, p)];
                    let avg = weighted_average(e, m, sel.alpha).map_err(|e| e.to_string())?;
                    self.preds.insert((r, p), avg);
                }
                Ok(())
            }
            Recipe::TwoStage => {
                self.dependency(Recipe::Clinical)?;
                self.dependency(genetic)?;
                let clinical = &self.models[&Recipe::Clinical];
                let base = clinical.predict(&self.fit).map_err(|e| e.to_string())?;
                let mut gate_cfg = self.cfg.ensemble.gate.clone();
                gate_cfg.seed = self.recipe_seed(r);
                let gate = match train_gate_on(&base, &self.fit, &gate_cfg) {
                    Ok(g) => {
                        self.texts.insert("gate".into(), g.svm.to_text());
                        Gate::Svm(g)
                    }
                    Err(CoreError::GateDegenerate { correct, incorrect }) => {
                        self.notes.push(format!(
                            "{r}: gate degenerate ({correct} correct, {incorrect} incorrect); passing everything to the clinical model"
                        ));
                        Gate::PassThrough
                    }
                    Err(e) => return Err(e.to_string()),
                };
                for p in Partition::ALL {
                    let ds = &self.parts[&p];
                    let e = &self.preds[&(Recipe::Clinical, p)];
                    let m = &self.preds[&(genetic, p)];
                    let routed = two_stage_predict(&gate, e, m, ds).map_err(|e| e.to_string())?;
                    let oracle = two_stage_oracle(e, m, &ds.labels()).map_err(|e| e.to_string())?;
                    self.routing.insert(p, routed.routing_counts());
                    self.preds.insert((r, p), routed);
                    self.oracle.insert(p, oracle);
                }
                Ok(())
            }
            base => {
                if base == Recipe::Composite {
                    self.dependency(genetic)?;
                }
                let model = self.fit_base(base).map_err(|e| e.to_string())?;
                self.predict_all(base, &model).map_err(|e| e.to_string())?;
                let text = match &model {
                    BaseModel::Logistic { model, .. } => model.to_text(),
                    BaseModel::Logic { model, .. } => model.to_text(),
                };
                self.texts.insert(base.as_str().to_string(), text);
                self.models.insert(base, model);
                Ok(())
            }
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<RunOutcome> {
    cfg.validate()?;
    let ds = prepare_data(cfg)?;
    run_on(cfg, &ds)
}

/// Run the configured recipes on already prepared (split-tagged) data.
pub fn run_on(cfg: &ExperimentConfig, ds: &Dataset) -> CliResult<RunOutcome> {
    let fit = in_splits(ds, &[SplitTag::Training]);
    let genetic_fit = in_splits(ds, &cfg.split.genetic_fit_on);
    let mut parts = BTreeMap::new();
    parts.insert(Partition::TrainingTest, in_splits(ds, &[SplitTag::Training, SplitTag::Test]));
    parts.insert(Partition::Validation, in_splits(ds, &[SplitTag::Validation]));
    for (p, d) in &parts {
        if d.is_empty() {
            return Err(CoreError::InvalidDataset(format!("the {p} partition is empty")).into());
        }
    }
    if fit.is_empty() || genetic_fit.is_empty() {
        return Err(CoreError::InvalidDataset("no samples to fit on".into()).into());
    }

    let mut runner = Runner {
        cfg,
        fit,
        genetic_fit,
        parts,
        models: BTreeMap::new(),
        preds: BTreeMap::new(),
        oracle: BTreeMap::new(),
        texts: BTreeMap::new(),
        routing: BTreeMap::new(),
        notes: Vec::new(),
    };
    let mut entries = Vec::new();
    for r in cfg.ordered_recipes() {
        log::info!("running recipe {r}");
        let status = match runner.run_recipe(r) {
            Ok(()) => {
                let mut m = BTreeMap::new();
                for p in Partition::ALL {
                    let report = runner.preds[&(r, p)].evaluate(&runner.parts[&p]).map_err(CliError::Core)?;
                    m.insert(p, report);
                }
                RecipeStatus::Ok(m)
            }
            Err(reason) => {
                log::warn!("recipe {r} failed: {reason}");
                RecipeStatus::Failed(reason)
            }
        };
        entries.push(RecipeEntry { recipe: r, status });
    }

    let report = RunReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: twostage::VERSION.to_string(),
        gate_features: cfg.ensemble.gate.features.label(),
        sample_counts: runner.parts.iter().map(|(p, d)| (*p, d.n())).collect(),
        entries,
        routing: runner.routing,
        notes: runner.notes,
    };
    Ok(RunOutcome {
        report,
        predictions: runner.preds,
        oracle: runner.oracle,
        models: runner.texts,
        partitions: runner.parts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use twostage::dataset::SyntheticConfig;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.data = DataSource::Synthetic {
            synthetic: SyntheticConfig {
                n_samples: 300,
                ..SyntheticConfig::default()
            },
        };
        cfg.logic.anneal.iterations = 3000;
        cfg.ensemble.alpha.n_repeats = 5;
        cfg
    }

    #[test]
    fn every_recipe_reports_both_partitions() {
        let out = run_experiment(&small()).unwrap();
        assert_eq!(out.report.entries.len(), 7);
        assert_eq!(out.report.failures(), 0, "{:?}", out.report.entries);
        for r in Recipe::ALL {
            for p in Partition::ALL {
                assert!(out.report.metrics(r, p).unwrap().auroc.is_some());
            }
        }
        assert_eq!(out.oracle.len(), 2);
        let v = out.report.sample_counts[&Partition::Validation];
        assert_eq!(v, 90);
    }

    #[test]
    fn recipes_are_isolated() {
        let full = run_experiment(&small()).unwrap();
        let mut cfg = small();
        cfg.recipes = vec![Recipe::Clinical, Recipe::GeneticLogicClass];
        let part = run_experiment(&cfg).unwrap();
        for r in [Recipe::Clinical, Recipe::GeneticLogicClass] {
            for p in Partition::ALL {
                assert_eq!(full.report.metrics(r, p), part.report.metrics(r, p));
            }
        }
    }

    #[test]
    fn failures_are_recorded_and_dependents_fail() {
        let mut cfg = small();
        // No Z columns: the clinical model cannot be fitted.
        cfg.data = DataSource::Synthetic {
            synthetic: SyntheticConfig {
                n_samples: 200,
                p_prime: 0,
                subgroup_fraction: 0.0,
                marker_separation: None,
                planted_linear_coefficients: vec![],
                ..SyntheticConfig::default()
            },
        };
        let out = run_experiment(&cfg).unwrap();
        let status = |r: Recipe| &out.report.entries.iter().find(|e| e.recipe == r).unwrap().status;
        assert!(matches!(status(Recipe::Clinical), RecipeStatus::Failed(_)));
        assert!(matches!(status(Recipe::TwoStage), RecipeStatus::Failed(m) if m.contains("clinical")));
        assert!(matches!(status(Recipe::GeneticLogicLogistic), RecipeStatus::Ok(_)));
    }

    #[test]
    fn comparison_relabels_by_cohort() {
        use twostage::dataset::{CohortTag, SampleRecord, ZColumn};
        let tags = ["young_case:male", "control:male", "older_case:male", "young_case:female"];
        let samples: Vec<SampleRecord> = (0..40)
            .map(|i| SampleRecord {
                id: format!("s{i}"),
                x: vec![i % 3 == 0],
                z: vec![f64::from(i)],
                y: 0,
                cohort: Some(tags[i as usize % 4].parse::<CohortTag>().unwrap()),
                split: None,
            })
            .collect();
        let ds = Dataset::new(samples, vec!["x0".into()], vec![ZColumn::continuous("age")], "y").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        twostage::dataset::save_csv(&ds, &path).unwrap();
        Schema::for_dataset(&ds).write(default_schema_path(&path)).unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.data = DataSource::Csv { path, schema: None };
        cfg.comparison = Some(crate::config::Comparison {
            cases: vec!["young_case:male".into()],
            controls: vec!["control:male".into()],
        });
        let prepared = prepare_data(&cfg).unwrap();
        assert_eq!(prepared.n(), 20);
        assert_eq!(prepared.class_counts(), [10, 10]);
        for s in prepared.samples() {
            assert_eq!(s.y == 1, s.cohort.as_ref().unwrap().to_string() == "young_case:male");
            assert!(s.split.is_some());
        }
    }
}
