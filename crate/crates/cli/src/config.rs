//! Experiment configuration, read from a single TOML file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use twostage::dataset::{CohortTag, SplitTag, SyntheticConfig};
use twostage::ensemble::{AlphaConfig, GateConfig};
use twostage::glm::WeightSpec;
use twostage::logicreg::AnnealConfig;
use twostage::select::{Criterion, Direction, SelectConfig};

use crate::error::{CliError, CliResult};

/// The model-building recipes, in dependency order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    Clinical,
    GeneticLassoLogistic,
    GeneticLogicClass,
    GeneticLogicLogistic,
    Composite,
    WeightedAverage,
    TwoStage,
}

impl Recipe {
    pub const ALL: [Recipe; 7] = [
        Recipe::Clinical,
        Recipe::GeneticLassoLogistic,
        Recipe::GeneticLogicClass,
        Recipe::GeneticLogicLogistic,
        Recipe::Composite,
        Recipe::WeightedAverage,
        Recipe::TwoStage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Recipe::Clinical => "clinical",
            Recipe::GeneticLassoLogistic => "genetic_lasso_logistic",
            Recipe::GeneticLogicClass => "genetic_logic_class",
            Recipe::GeneticLogicLogistic => "genetic_logic_logistic",
            Recipe::Composite => "composite",
            Recipe::WeightedAverage => "weighted_average",
            Recipe::TwoStage => "two_stage",
        }
    }

    pub fn is_genetic(self) -> bool {
        matches!(
            self,
            Recipe::GeneticLassoLogistic | Recipe::GeneticLogicClass | Recipe::GeneticLogicLogistic
        )
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Recipe {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.as_str() == s.trim())
            .ok_or_else(|| format!("unknown recipe `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic {
        #[serde(default)]
        synthetic: SyntheticConfig,
    },
    Csv {
        path: PathBuf,
        /// Defaults to `<path>.schema.toml`.
        #[serde(default)]
        schema: Option<PathBuf>,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            synthetic: SyntheticConfig::default(),
        }
    }
}

/// Which cohorts form the cases and which the controls; samples in
/// neither are dropped and labels are set from cohort membership.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub cases: Vec<String>,
    pub controls: Vec<String>,
}

impl Comparison {
    pub fn parse(&self) -> CliResult<(Vec<CohortTag>, Vec<CohortTag>)> {
        let parse = |v: &[String]| {
            v.iter()
                .map(|s| s.parse::<CohortTag>().map_err(CliError::Config))
                .collect::<CliResult<Vec<_>>>()
        };
        let (cases, controls) = (parse(&self.cases)?, parse(&self.controls)?);
        if cases.is_empty() || controls.is_empty() {
            return Err(CliError::Config("a comparison needs case and control cohorts".into()));
        }
        if cases.iter().any(|c| controls.contains(c)) {
            return Err(CliError::Config("a cohort cannot be both case and control".into()));
        }
        Ok((cases, controls))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Keep split tags already present in the data instead of drawing new ones.
    pub use_existing: bool,
    pub training: f64,
    pub test: f64,
    pub validation: f64,
    /// Partitions the genetic models are fitted on.
    pub genetic_fit_on: Vec<SplitTag>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            use_existing: false,
            training: 0.5,
            test: 0.2,
            validation: 0.3,
            genetic_fit_on: vec![SplitTag::Training],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClinicalConfig {
    pub weights: WeightSpec,
}

impl Default for ClinicalConfig {
    fn default() -> Self {
        Self {
            weights: WeightSpec::ClassBalanced,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoRecipeConfig {
    pub select: SelectConfig,
    pub direction: Direction,
    pub criterion: Criterion,
    pub weights: WeightSpec,
}

impl Default for LassoRecipeConfig {
    fn default() -> Self {
        Self {
            select: SelectConfig::default(),
            direction: Direction::Backward,
            criterion: Criterion::Aic,
            weights: WeightSpec::ClassBalanced,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogicRecipeConfig {
    pub anneal: AnnealConfig,
    pub weights: WeightSpec,
}

impl Default for LogicRecipeConfig {
    fn default() -> Self {
        Self {
            anneal: AnnealConfig::default(),
            weights: WeightSpec::ClassBalanced,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Genetic recipe combined with the clinical model.
    pub genetic: Recipe,
    pub composite_weights: WeightSpec,
    pub alpha: AlphaConfig,
    pub gate: GateConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            genetic: Recipe::GeneticLogicLogistic,
            composite_weights: WeightSpec::ClassBalanced,
            alpha: AlphaConfig::default(),
            gate: GateConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandtestConfig {
    pub permutations: usize,
    pub max_size: usize,
    pub threshold: f64,
}

impl Default for RandtestConfig {
    fn default() -> Self {
        Self {
            permutations: 99,
            max_size: 3,
            threshold: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub recipes: Vec<Recipe>,
    pub data: DataSource,
    pub comparison: Option<Comparison>,
    pub split: SplitConfig,
    pub clinical: ClinicalConfig,
    pub lasso: LassoRecipeConfig,
    pub logic: LogicRecipeConfig,
    pub ensemble: EnsembleConfig,
    pub randtest: RandtestConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("out"),
            recipes: Recipe::ALL.to_vec(),
            data: DataSource::default(),
            comparison: None,
            split: SplitConfig::default(),
            clinical: ClinicalConfig::default(),
            lasso: LassoRecipeConfig::default(),
            logic: LogicRecipeConfig::default(),
            ensemble: EnsembleConfig::default(),
            randtest: RandtestConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config; relative data paths resolve against the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> CliResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (DataSource::Csv { path: data, schema }, Some(dir)) = (&mut cfg.data, path.parent()) {
            if data.is_relative() {
                *data = dir.join(&*data);
            }
            if let Some(s) = schema.as_mut().filter(|s| s.is_relative()) {
                *s = dir.join(&*s);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn has(&self, r: Recipe) -> bool {
        self.recipes.contains(&r)
    }

    /// Enabled recipes, deduplicated, in dependency order.
    pub fn ordered_recipes(&self) -> Vec<Recipe> {
        Recipe::ALL.into_iter().filter(|r| self.has(*r)).collect()
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.recipes.is_empty() {
            return bad("no recipes configured".into());
        }
        if !self.ensemble.genetic.is_genetic() {
            return bad(format!("ensemble.genetic must name a genetic recipe, got `{}`", self.ensemble.genetic));
        }
        let needs_both = [Recipe::WeightedAverage, Recipe::TwoStage];
        for r in needs_both {
            if self.has(r) && !self.has(Recipe::Clinical) {
                return bad(format!("{r} requires the clinical recipe"));
            }
        }
        for r in [Recipe::Composite, Recipe::WeightedAverage, Recipe::TwoStage] {
            if self.has(r) && !self.has(self.ensemble.genetic) {
                return bad(format!("{r} requires the genetic recipe `{}`", self.ensemble.genetic));
            }
        }
        let s = &self.split;
        for (name, f) in [("training", s.training), ("test", s.test), ("validation", s.validation)] {
            if !(f.is_finite() && f >= 0.0) {
                return bad(format!("split.{name} must be a non-negative fraction"));
            }
        }
        if s.training <= 0.0 || s.validation <= 0.0 {
            return bad("split.training and split.validation must be positive".into());
        }
        if s.genetic_fit_on.is_empty() || s.genetic_fit_on.contains(&SplitTag::Validation) {
            return bad("split.genetic_fit_on must list training and/or test only".into());
        }
        if let Some(c) = &self.comparison {
            c.parse()?;
        }
        if self.randtest.permutations < twostage::logicreg::MIN_PERMUTATIONS {
            return bad(format!(
                "randtest.permutations must be at least {}",
                twostage::logicreg::MIN_PERMUTATIONS
            ));
        }
        if !(self.randtest.threshold > 0.0 && self.randtest.threshold < 1.0) {
            return bad("randtest.threshold must lie in (0, 1)".into());
        }
        self.logic.anneal.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let DataSource::Synthetic { synthetic } = &self.data {
            synthetic.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn two_stage_requires_clinical() {
        let text = r#"
            recipes = ["genetic_logic_logistic", "two_stage"]
        "#;
        let err = ExperimentConfig::from_toml(text).unwrap_err();
        assert!(matches!(err, CliError::Config(ref m) if m.contains("clinical")), "{err}");
    }

    #[test]
    fn ensemble_needs_its_genetic_recipe() {
        let text = r#"
            recipes = ["clinical", "genetic_lasso_logistic", "composite"]
        "#;
        assert!(ExperimentConfig::from_toml(text).is_err());
        let text = r#"
            recipes = ["clinical", "genetic_lasso_logistic", "composite"]
            [ensemble]
            genetic = "genetic_lasso_logistic"
        "#;
        ExperimentConfig::from_toml(text).unwrap();
    }

    #[test]
    fn nested_sections_parse() {
        let text = r#"
            seed = 7
            recipes = ["clinical"]
            [data]
            source = "synthetic"
            [data.synthetic]
            n_samples = 120
            [comparison]
            cases = ["young_case:male"]
            controls = ["control:male"]
            [logic.anneal]
            iterations = 500
            [ensemble.gate.features]
            kind = "z_only"
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.logic.anneal.iterations, 500);
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        let bad = "[comparison]\ncases = [\"young_case:male\"]\ncontrols = [\"young_case:male\"]";
        assert!(ExperimentConfig::from_toml(bad).is_err());
    }
}
