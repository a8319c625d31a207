//! Text form of a [`LogicModel`]:
//!
//! ```toml
//! model = "logic"
//! family = "logistic"
//! trees = ["OR AND x1 !x2 x5"]
//! coefficients = ["-1.0000000000000000e0", "2.5000000000000000e0"]
//! score = "1.2345678901234567e2"
//! ```

use serde::{Deserialize, Serialize};

use super::{Family, LogicModel, LogicTree};
use crate::error::{Error, Result};
use crate::textfmt::{sig17, sig17_vec};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogicDoc {
    model: String,
    family: Family,
    trees: Vec<String>,
    #[serde(with = "sig17_vec")]
    coefficients: Vec<f64>,
    #[serde(with = "sig17")]
    score: f64,
}

impl LogicModel {
    pub fn to_text(&self) -> String {
        let doc = LogicDoc {
            model: "logic".into(),
            family: self.family,
            trees: self.trees.iter().map(LogicTree::to_prefix).collect(),
            coefficients: self.coefficients.clone(),
            score: self.score,
        };
        toml::to_string(&doc).expect("logic model serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc: LogicDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.model != "logic" {
            return Err(Error::Parse(format!("expected a logic model, found `{}`", doc.model)));
        }
        let trees = doc
            .trees
            .iter()
            .map(|t| LogicTree::parse_prefix(t))
            .collect::<Result<Vec<_>>>()?;
        if doc.coefficients.len() != trees.len() + 1 {
            return Err(Error::Parse(format!(
                "{} trees need {} coefficients, found {}",
                trees.len(),
                trees.len() + 1,
                doc.coefficients.len()
            )));
        }
        Ok(LogicModel {
            family: doc.family,
            trees,
            coefficients: doc.coefficients,
            score: doc.score,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip_is_exact() {
        let m = LogicModel {
            family: Family::Logistic,
            trees: vec![
                LogicTree::parse_prefix("OR AND x1 !x2 x5").unwrap(),
                LogicTree::parse_prefix("!x0").unwrap(),
            ],
            coefficients: vec![-0.1, 1.0 / 3.0, 2.0e-17],
            score: 123.456,
        };
        let text = m.to_text();
        assert!(text.contains("OR AND x1 !x2 x5"));
        assert_eq!(LogicModel::from_text(&text).unwrap(), m);
    }

    #[test]
    fn malformed_documents_are_rejected() {
        let text = "model = \"logic\"\nfamily = \"linear\"\ntrees = [\"x0\"]\ncoefficients = [\"1\"]\nscore = \"0\"\n";
        assert!(LogicModel::from_text(text).is_err());
        let text = "model = \"logic\"\nfamily = \"linear\"\ntrees = [\"AND x0\"]\ncoefficients = [\"1\", \"2\"]\nscore = \"0\"\n";
        assert!(LogicModel::from_text(text).is_err());
    }

    proptest! {
        #[test]
        fn coefficients_survive(c in proptest::collection::vec(-1e6f64..1e6, 2), s in 0f64..1e4) {
            let m = LogicModel {
                family: Family::Linear,
                trees: vec![LogicTree::parse_prefix("AND x3 !x4").unwrap()],
                coefficients: c,
                score: s,
            };
            prop_assert_eq!(LogicModel::from_text(&m.to_text()).unwrap(), m);
        }
    }
}
