//! Samples with binary covariates `X`, existing covariates `Z`, a binary
//! label and optional cohort/split metadata.

mod bits;
mod csv_io;
mod genotype;
pub(crate) mod split;
mod synthetic;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bits::{count_ones, get_bit, pack, tail_mask, unpack, words_for, BitMatrix};
pub use csv_io::{load_csv, save_csv, ColumnRole, LoadReport, Schema};
pub use genotype::{recode_genotype, recode_value, GenotypeCoding, GenotypeColumn};
pub use split::{assign_splits, split_dataset, SplitAssignment};
pub use synthetic::{generate_synthetic, SyntheticConfig, SUBGROUP_A, SUBGROUP_B};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZColumn {
    pub name: String,
    pub kind: CovariateKind,
}

impl ZColumn {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: CovariateKind::Continuous,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: CovariateKind::Binary,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Male,
    Female,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortGroup {
    Control,
    YoungCase,
    OlderCase,
}

/// Cohort metadata. Study cohorts pair an age/disease group with sex;
/// synthetic data records its generating subgroup instead.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CohortTag {
    Study { group: CohortGroup, sex: Sex },
    Subgroup(String),
}

impl fmt::Display for CohortTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CohortTag::Study { group, sex } => {
                let g = match group {
                    CohortGroup::Control => "control",
                    CohortGroup::YoungCase => "young_case",
                    CohortGroup::OlderCase => "older_case",
                };
                let s = match sex {
                    Sex::Male => "male",
                    Sex::Female => "female",
                };
                write!(f, "{g}:{s}")
            }
            CohortTag::Subgroup(name) => write!(f, "subgroup:{name}"),
        }
    }
}

impl FromStr for CohortTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (head, tail) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| format!("cohort `{s}` is not of the form group:sex or subgroup:name"))?;
        if head == "subgroup" {
            if tail.is_empty() {
                return Err("empty subgroup name".into());
            }
            return Ok(CohortTag::Subgroup(tail.to_string()));
        }
        let group = match head {
            "control" => CohortGroup::Control,
            "young_case" => CohortGroup::YoungCase,
            "older_case" => CohortGroup::OlderCase,
            other => return Err(format!("unknown cohort group `{other}`")),
        };
        let sex = match tail {
            "male" => Sex::Male,
            "female" => Sex::Female,
            other => return Err(format!("unknown sex `{other}`")),
        };
        Ok(CohortTag::Study { group, sex })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Training,
    Test,
    Validation,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Training => "training",
            SplitTag::Test => "test",
            SplitTag::Validation => "validation",
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "training" | "train" => Ok(SplitTag::Training),
            "test" => Ok(SplitTag::Test),
            "validation" => Ok(SplitTag::Validation),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub id: String,
    pub x: Vec<bool>,
    pub z: Vec<f64>,
    pub y: u8,
    pub cohort: Option<CohortTag>,
    pub split: Option<SplitTag>,
}

/// Where a named column lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnRef {
    X(usize),
    Z(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<SampleRecord>,
    x_names: Vec<String>,
    z_columns: Vec<ZColumn>,
    label_name: String,
}

impl Dataset {
    pub fn new(
        samples: Vec<SampleRecord>,
        x_names: Vec<String>,
        z_columns: Vec<ZColumn>,
        label_name: impl Into<String>,
    ) -> Result<Self> {
        let label_name = label_name.into();
        if x_names.is_empty() && z_columns.is_empty() {
            return Err(Error::InvalidDataset(
                "at least one X or Z column is required".into(),
            ));
        }
        let mut seen = HashSet::new();
        for name in x_names
            .iter()
            .chain(z_columns.iter().map(|c| &c.name))
            .chain(std::iter::once(&label_name))
        {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate column name `{name}`"
                )));
            }
        }
        let p = x_names.len();
        let q = z_columns.len();
        for s in &samples {
            if s.x.len() != p || s.z.len() != q {
                return Err(Error::InvalidDataset(format!(
                    "sample `{}` has arity ({}, {}), expected ({p}, {q})",
                    s.id,
                    s.x.len(),
                    s.z.len()
                )));
            }
            if s.y > 1 {
                return Err(Error::InvalidDataset(format!(
                    "sample `{}` has label {} outside {{0, 1}}",
                    s.id, s.y
                )));
            }
            for (v, col) in s.z.iter().zip(&z_columns) {
                if !v.is_finite() {
                    return Err(Error::InvalidDataset(format!(
                        "sample `{}` has non-finite `{}`",
                        s.id, col.name
                    )));
                }
                if col.kind == CovariateKind::Binary && *v != 0.0 && *v != 1.0 {
                    return Err(Error::InvalidDataset(format!(
                        "sample `{}` has non-binary value {v} in `{}`",
                        s.id, col.name
                    )));
                }
            }
        }
        Ok(Self {
            samples,
            x_names,
            z_columns,
            label_name,
        })
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn p(&self) -> usize {
        self.x_names.len()
    }

    pub fn p_prime(&self) -> usize {
        self.z_columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[SampleRecord] {
        &self.samples
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn z_columns(&self) -> &[ZColumn] {
        &self.z_columns
    }

    pub fn z_names(&self) -> Vec<String> {
        self.z_columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.id.clone()).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.y).collect()
    }

    /// Labels mapped for SVMs: `1 -> +1`, `0 -> -1`.
    pub fn signed_labels(&self) -> Vec<i8> {
        self.samples
            .iter()
            .map(|s| if s.y == 1 { 1 } else { -1 })
            .collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.samples.iter().filter(|s| s.y == 1).count();
        [self.n() - pos, pos]
    }

    pub fn x_bits(&self) -> BitMatrix {
        let rows: Vec<Vec<bool>> = self.samples.iter().map(|s| s.x.clone()).collect();
        BitMatrix::from_rows(&rows, self.p())
    }

    pub fn column(&self, name: &str) -> Option<ColumnRef> {
        if let Some(j) = self.x_names.iter().position(|n| n == name) {
            return Some(ColumnRef::X(j));
        }
        self.z_columns
            .iter()
            .position(|c| c.name == name)
            .map(ColumnRef::Z)
    }

    pub fn value(&self, i: usize, col: ColumnRef) -> f64 {
        let s = &self.samples[i];
        match col {
            ColumnRef::X(j) => f64::from(u8::from(s.x[j])),
            ColumnRef::Z(l) => s.z[l],
        }
    }

    /// Dense design (samples × named columns), no intercept column.
    pub fn design(&self, names: &[String]) -> Result<DMatrix<f64>> {
        let refs = names
            .iter()
            .map(|n| self.column(n).ok_or_else(|| Error::UnknownColumn(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(self.n(), refs.len(), |i, j| {
            self.value(i, refs[j])
        }))
    }

    /// Per-sample feature rows over the named columns.
    pub fn feature_rows(&self, names: &[String]) -> Result<Vec<Vec<f64>>> {
        let refs = names
            .iter()
            .map(|n| self.column(n).ok_or_else(|| Error::UnknownColumn(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..self.n())
            .map(|i| refs.iter().map(|&r| self.value(i, r)).collect())
            .collect())
    }

    /// Samples at the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            x_names: self.x_names.clone(),
            z_columns: self.z_columns.clone(),
            label_name: self.label_name.clone(),
        }
    }

    pub fn filter(&self, mut keep: impl FnMut(&SampleRecord) -> bool) -> Dataset {
        let idx: Vec<usize> = (0..self.n()).filter(|&i| keep(&self.samples[i])).collect();
        self.subset(&idx)
    }

    pub fn partition(&self, split: SplitTag) -> Dataset {
        self.filter(|s| s.split == Some(split))
    }

    pub fn with_splits(mut self, tags: &[SplitTag]) -> Result<Dataset> {
        if tags.len() != self.n() {
            return Err(Error::ArityMismatch {
                expected: self.n(),
                got: tags.len(),
            });
        }
        for (s, t) in self.samples.iter_mut().zip(tags) {
            s.split = Some(*t);
        }
        Ok(self)
    }

    /// Copy with labels replaced (used by permutation tests and relabeling).
    pub fn with_labels(&self, labels: &[u8]) -> Result<Dataset> {
        if labels.len() != self.n() {
            return Err(Error::ArityMismatch {
                expected: self.n(),
                got: labels.len(),
            });
        }
        let mut out = self.clone();
        for (s, &y) in out.samples.iter_mut().zip(labels) {
            if y > 1 {
                return Err(Error::InvalidDataset(format!("label {y} outside {{0, 1}}")));
            }
            s.y = y;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, x: Vec<bool>, z: Vec<f64>, y: u8) -> SampleRecord {
        SampleRecord {
            id: id.into(),
            x,
            z,
            y,
            cohort: None,
            split: None,
        }
    }

    #[test]
    fn rejects_duplicate_names_and_bad_arity() {
        let s = vec![record("a", vec![true], vec![1.0], 1)];
        let dup = Dataset::new(s.clone(), vec!["v".into()], vec![ZColumn::continuous("v")], "y");
        assert!(matches!(dup, Err(Error::InvalidDataset(_))));
        let label_clash = Dataset::new(s.clone(), vec!["y".into()], vec![], "y");
        assert!(label_clash.is_err());
        let arity = Dataset::new(s, vec!["a".into(), "b".into()], vec![], "y");
        assert!(arity.is_err());
        let empty = Dataset::new(vec![], vec![], vec![], "y");
        assert!(empty.is_err());
    }

    #[test]
    fn rejects_bad_labels_and_binary_z() {
        let s = vec![record("a", vec![true], vec![0.5], 0)];
        let bad = Dataset::new(s, vec!["x".into()], vec![ZColumn::binary("smoker")], "y");
        assert!(bad.is_err());
        let s = vec![record("a", vec![true], vec![], 2)];
        assert!(Dataset::new(s, vec!["x".into()], vec![], "y").is_err());
    }

    #[test]
    fn design_and_signed_labels() {
        let s = vec![
            record("a", vec![true, false], vec![2.5], 1),
            record("b", vec![false, false], vec![-1.0], 0),
        ];
        let ds = Dataset::new(
            s,
            vec!["x1".into(), "x2".into()],
            vec![ZColumn::continuous("age")],
            "y",
        )
        .unwrap();
        let d = ds.design(&["age".into(), "x1".into()]).unwrap();
        assert_eq!(d[(0, 0)], 2.5);
        assert_eq!(d[(1, 1)], 0.0);
        assert_eq!(ds.signed_labels(), vec![1, -1]);
        assert!(matches!(
            ds.design(&["nope".into()]),
            Err(Error::UnknownColumn(_))
        ));
        assert_eq!(ds.x_bits().row(0), vec![true, false]);
    }

    #[test]
    fn cohort_and_split_strings_round_trip() {
        for s in ["control:male", "young_case:female", "older_case:male", "subgroup:A"] {
            let tag: CohortTag = s.parse().unwrap();
            assert_eq!(tag.to_string(), s);
        }
        assert!("elderly:male".parse::<CohortTag>().is_err());
        for t in [SplitTag::Training, SplitTag::Test, SplitTag::Validation] {
            assert_eq!(t.as_str().parse::<SplitTag>().unwrap(), t);
        }
    }
}
