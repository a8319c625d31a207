//! Heterogeneous-population generator: subgroup A's outcome depends only on
//! the existing covariates `Z`, subgroup B's only on a planted Boolean
//! expression over `X`.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{CohortTag, Dataset, SampleRecord, ZColumn};
use crate::error::{Error, Result};
use crate::logicreg::LogicTree;
use crate::seed;

pub const SUBGROUP_A: &str = "A";
pub const SUBGROUP_B: &str = "B";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    /// Number of binary covariates `X`.
    pub p: usize,
    /// Number of existing covariates `Z`, including the marker column when
    /// `marker_separation` is set.
    pub p_prime: usize,
    /// Fraction of samples in subgroup A (`Z`-driven outcome).
    pub subgroup_fraction: f64,
    /// Prefix-notation expression over `x<j>` leaves, e.g. `OR AND x0 x1 !x2`.
    pub planted_logic_expression: String,
    /// One coefficient per `Z` column (the marker's is usually 0).
    pub planted_linear_coefficients: Vec<f64>,
    pub planted_intercept: f64,
    /// Probability of flipping a subgroup-B label.
    pub label_noise_rate: f64,
    /// When set, `Z` column 0 is a subgroup marker drawn from
    /// `N(+d/2, 1)` in A and `N(-d/2, 1)` in B.
    pub marker_separation: Option<f64>,
    /// Bernoulli frequency of every `X` covariate.
    pub x_frequency: f64,
    /// Number of trailing `Z` columns that are binary instead of Gaussian.
    pub binary_z: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_samples: 800,
            p: 20,
            p_prime: 4,
            subgroup_fraction: 0.5,
            planted_logic_expression: "OR AND x0 x1 AND x2 !x3".into(),
            planted_linear_coefficients: vec![0.0, 0.9, -0.7, 0.5],
            planted_intercept: 0.0,
            label_noise_rate: 0.1,
            marker_separation: Some(6.0),
            x_frequency: 0.5,
            binary_z: 0,
            seed: 1,
        }
    }
}

impl SyntheticConfig {
    pub fn planted_tree(&self) -> Result<LogicTree> {
        LogicTree::parse_prefix(&self.planted_logic_expression)
    }

    pub fn validate(&self) -> Result<LogicTree> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.subgroup_fraction) {
            return bad(format!("subgroup_fraction {} outside [0, 1]", self.subgroup_fraction));
        }
        if !(0.0..0.5).contains(&self.label_noise_rate) {
            return bad(format!("label_noise_rate {} outside [0, 0.5)", self.label_noise_rate));
        }
        if !(0.0..=1.0).contains(&self.x_frequency) {
            return bad(format!("x_frequency {} outside [0, 1]", self.x_frequency));
        }
        if self.planted_linear_coefficients.len() != self.p_prime {
            return bad(format!(
                "{} linear coefficients for {} Z columns",
                self.planted_linear_coefficients.len(),
                self.p_prime
            ));
        }
        if self.p == 0 {
            return bad("p must be at least 1".into());
        }
        if self.p_prime == 0 && self.subgroup_fraction > 0.0 {
            return bad("subgroup A needs at least one Z column".into());
        }
        let reserved = usize::from(self.marker_separation.is_some());
        if self.binary_z + reserved > self.p_prime {
            return bad("binary_z plus marker exceeds p_prime".into());
        }
        if let Some(d) = self.marker_separation {
            if !d.is_finite() || d < 0.0 {
                return bad("marker_separation must be non-negative".into());
            }
        }
        let tree = self.planted_tree()?;
        if let Some(max) = tree.max_index() {
            if max >= self.p {
                return bad(format!("planted expression uses x{max} but p = {}", self.p));
            }
        }
        Ok(tree)
    }
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    let tree = cfg.validate()?;
    let mut rng = seed::rng(cfg.seed);
    let x_names: Vec<String> = (0..cfg.p).map(|j| format!("x{j}")).collect();
    let has_marker = cfg.marker_separation.is_some();
    let z_columns: Vec<ZColumn> = (0..cfg.p_prime)
        .map(|l| {
            if has_marker && l == 0 {
                ZColumn::continuous("marker")
            } else if l >= cfg.p_prime - cfg.binary_z {
                ZColumn::binary(format!("z{l}"))
            } else {
                ZColumn::continuous(format!("z{l}"))
            }
        })
        .collect();
    let half = cfg.marker_separation.unwrap_or(0.0) / 2.0;

    let mut samples = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let in_a = rng.random::<f64>() < cfg.subgroup_fraction;
        let x: Vec<bool> = (0..cfg.p).map(|_| rng.random::<f64>() < cfg.x_frequency).collect();
        let z: Vec<f64> = z_columns
            .iter()
            .enumerate()
            .map(|(l, col)| {
                if has_marker && l == 0 {
                    let centre = if in_a { half } else { -half };
                    Normal::new(centre, 1.0).expect("unit sd").sample(&mut rng)
                } else if col.kind == super::CovariateKind::Binary {
                    f64::from(u8::from(rng.random::<bool>()))
                } else {
                    StandardNormal.sample(&mut rng)
                }
            })
            .collect();
        // Both noise draws happen for every sample so the stream layout does
        // not depend on subgroup membership.
        let u: f64 = rng.random::<f64>().clamp(1e-300, 1.0 - 1e-16);
        let logistic_noise = (u / (1.0 - u)).ln();
        let flip = rng.random::<f64>() < cfg.label_noise_rate;
        let y = if in_a {
            let score: f64 = cfg.planted_intercept
                + z.iter()
                    .zip(&cfg.planted_linear_coefficients)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            score + logistic_noise > 0.0
        } else {
            tree.eval(&x)? ^ flip
        };
        samples.push(SampleRecord {
            id: format!("s{i}"),
            x,
            z,
            y: u8::from(y),
            cohort: Some(CohortTag::Subgroup(
                if in_a { SUBGROUP_A } else { SUBGROUP_B }.to_string(),
            )),
            split: None,
        });
    }
    Dataset::new(samples, x_names, z_columns, "y")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_subgroup_b_matches_planted_tree() {
        let cfg = SyntheticConfig {
            n_samples: 300,
            subgroup_fraction: 0.0,
            label_noise_rate: 0.0,
            seed: 3,
            ..SyntheticConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        // Brute-force evaluation of the planted expression, written out by hand.
        for s in ds.samples() {
            let x = &s.x;
            let expected = (x[0] && x[1]) || (x[2] && !x[3]);
            assert_eq!(s.y, u8::from(expected));
            assert_eq!(s.cohort, Some(CohortTag::Subgroup("B".into())));
        }
    }

    #[test]
    fn noise_of_one_half_is_rejected() {
        let cfg = SyntheticConfig {
            label_noise_rate: 0.5,
            ..SyntheticConfig::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
        let cfg = SyntheticConfig {
            planted_logic_expression: "AND x0 x40".into(),
            ..SyntheticConfig::default()
        };
        assert!(generate_synthetic(&cfg).is_err());
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let cfg = SyntheticConfig {
            n_samples: 100,
            binary_z: 1,
            seed: 99,
            ..SyntheticConfig::default()
        };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        super::super::csv_io::write_to(&a, &mut buf_a).unwrap();
        super::super::csv_io::write_to(&b, &mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
        let c = generate_synthetic(&SyntheticConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn marker_separates_subgroups() {
        let ds = generate_synthetic(&SyntheticConfig::default()).unwrap();
        let mut wrong_side = 0;
        for s in ds.samples() {
            let a = s.cohort == Some(CohortTag::Subgroup("A".into()));
            if (s.z[0] > 0.0) != a {
                wrong_side += 1;
            }
        }
        assert!(wrong_side < 10, "{wrong_side} samples on the wrong side");
    }
}
