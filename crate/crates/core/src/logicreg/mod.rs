//! Logic regression: outcomes modelled through Boolean combinations of binary
//! covariates,
//!
//! ```text
//! g(E[Y]) = b0 + b1 L1 + ... + bt Lt
//! ```
//!
//! where each `Li` is a [`LogicTree`]. Trees and coefficients are searched
//! jointly by simulated annealing ([`anneal_fit`]); [`null_signal_test`] and
//! [`model_size_test`] are permutation tests on the search result.

mod anneal;
mod fit;
mod moves;
mod randtest;
mod text;
mod tree;

use serde::{Deserialize, Serialize};

use crate::dataset::{pack, BitMatrix, Dataset};
use crate::error::{Error, Result};
use crate::glm::{binomial_loss, sigmoid};

pub use anneal::{anneal_fit, AnnealConfig, MoveWeights};
pub use fit::fit_given_trees;
pub use moves::{propose_move, Move, MoveKind, MoveLimits, Side};
pub use randtest::{model_size_test, null_signal_test, ModelSizeResult, RandTestResult, MIN_PERMUTATIONS};
pub use tree::{Leaf, LogicTree, Node, Operator};

/// Link and score function of a logic model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Identity link, residual sum of squares.
    Linear,
    /// Logit link, binomial deviance.
    #[default]
    Logistic,
    /// Single tree, `Y = I(L = 1)`, misclassification count.
    Classification,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Logistic => "logistic",
            Family::Classification => "classification",
        }
    }
}

/// Training data for logic regression: bit-packed `X`, a response and
/// optional per-sample weights.
#[derive(Clone, Debug, PartialEq)]
pub struct LogicData {
    x: BitMatrix,
    y: Vec<f64>,
    weights: Option<Vec<f64>>,
    /// Packed response, present when every `y` is 0 or 1.
    y_bits: Option<Vec<u64>>,
}

impl LogicData {
    pub fn new(x: BitMatrix, y: Vec<f64>) -> Result<Self> {
        if y.len() != x.n_rows() {
            return Err(Error::ArityMismatch {
                expected: x.n_rows(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("response must be finite".into()));
        }
        let binary = y.iter().all(|&v| v == 0.0 || v == 1.0);
        let y_bits = binary.then(|| pack(y.iter().map(|&v| v == 1.0), y.len()));
        Ok(Self {
            x,
            y,
            weights: None,
            y_bits,
        })
    }

    /// Binary covariates and labels of `ds`.
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let y = ds.labels().iter().map(|&v| f64::from(v)).collect();
        Self::new(ds.x_bits(), y)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n() {
            return Err(Error::ArityMismatch {
                expected: self.n(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Precondition("weights must be positive".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.n_cols()
    }

    pub fn x(&self) -> &BitMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn is_binary(&self) -> bool {
        self.y_bits.is_some()
    }

    pub(crate) fn y_bits(&self) -> Option<&[u64]> {
        self.y_bits.as_deref()
    }

    /// Reorder responses (and their weights) by `perm`: sample `i` receives
    /// the response of sample `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let y: Vec<f64> = perm.iter().map(|&i| self.y[i]).collect();
        let weights = self
            .weights
            .as_ref()
            .map(|w| perm.iter().map(|&i| w[i]).collect());
        let y_bits = self
            .y_bits
            .as_ref()
            .map(|_| pack(y.iter().map(|&v| v == 1.0), y.len()));
        Self {
            x: self.x.clone(),
            y,
            weights,
            y_bits,
        }
    }

    /// The same samples in a different order.
    pub fn reordered(&self, order: &[usize]) -> Self {
        let permuted = self.permuted(order);
        Self {
            x: self.x.select_rows(order),
            ..permuted
        }
    }
}

/// `t` trees with coefficients `b0..bt`, a family and the training score.
#[derive(Clone, Debug, PartialEq)]
pub struct LogicModel {
    pub family: Family,
    pub trees: Vec<LogicTree>,
    pub coefficients: Vec<f64>,
    pub score: f64,
}

impl LogicModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn total_leaves(&self) -> usize {
        self.trees.iter().map(|t| t.leaf_count()).sum()
    }

    fn check(&self) -> Result<()> {
        if self.coefficients.len() != self.trees.len() + 1 {
            return Err(Error::ArityMismatch {
                expected: self.trees.len() + 1,
                got: self.coefficients.len(),
            });
        }
        if self.family == Family::Classification && self.trees.len() > 1 {
            return Err(Error::Precondition(
                "classification models hold at most one tree".into(),
            ));
        }
        Ok(())
    }

    fn combine(&self, tree_values: impl Iterator<Item = bool>) -> f64 {
        let values: Vec<bool> = tree_values.collect();
        if self.family == Family::Classification {
            return match values.first() {
                Some(&l) => f64::from(u8::from(l)),
                None => self.coefficients[0],
            };
        }
        let eta = self.coefficients[0]
            + values
                .iter()
                .zip(&self.coefficients[1..])
                .map(|(&l, b)| if l { *b } else { 0.0 })
                .sum::<f64>();
        match self.family {
            Family::Logistic => sigmoid(eta),
            _ => eta,
        }
    }

    /// Prediction for one sample: a real value (linear), a probability
    /// (logistic) or a class in {0, 1} (classification).
    pub fn predict(&self, x: &[bool]) -> Result<f64> {
        self.check()?;
        let values = self
            .trees
            .iter()
            .map(|t| t.eval(x))
            .collect::<Result<Vec<bool>>>()?;
        Ok(self.combine(values.into_iter()))
    }

    /// [`LogicModel::predict`] for every row of `x`.
    pub fn predict_bits(&self, x: &BitMatrix) -> Result<Vec<f64>> {
        self.check()?;
        let bits = self
            .trees
            .iter()
            .map(|t| t.eval_bits(x))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..x.n_rows())
            .map(|i| self.combine(bits.iter().map(|b| crate::dataset::get_bit(b, i))))
            .collect())
    }
}

/// Score of `model` on `data` with the model's own coefficients; lower is
/// better for every family.
pub fn score(model: &LogicModel, data: &LogicData) -> Result<f64> {
    let pred = model.predict_bits(data.x())?;
    let mut total = 0.0;
    for (i, (&yhat, &y)) in pred.iter().zip(data.y()).enumerate() {
        let w = data.weight(i);
        total += w * match model.family {
            Family::Linear => (y - yhat) * (y - yhat),
            Family::Logistic => binomial_loss(y, yhat),
            Family::Classification => f64::from(u8::from(y != yhat)),
        };
    }
    Ok(total)
}
