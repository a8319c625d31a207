use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binarization of a 0/1/2 minor-allele count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GenotypeCoding {
    /// Any copy of the minor allele: `X >= 1`.
    #[default]
    Dominant,
    /// Two copies of the minor allele: `X == 2`.
    Recessive,
}

/// Raw SNP genotypes, `None` for a missing call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenotypeColumn {
    pub values: Vec<Option<u8>>,
}

impl GenotypeColumn {
    pub fn new(values: Vec<Option<u8>>) -> Self {
        Self { values }
    }

    pub fn complete(values: &[u8]) -> Self {
        Self {
            values: values.iter().map(|&v| Some(v)).collect(),
        }
    }
}

pub fn recode_value(value: u8, coding: GenotypeCoding) -> Option<bool> {
    match (value, coding) {
        (0, _) => Some(false),
        (1, GenotypeCoding::Dominant) => Some(true),
        (1, GenotypeCoding::Recessive) => Some(false),
        (2, _) => Some(true),
        _ => None,
    }
}

pub fn recode_genotype(col: &GenotypeColumn, coding: GenotypeCoding) -> Result<Vec<bool>> {
    col.values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let v = v.ok_or(Error::MissingGenotype(i))?;
            recode_value(v, coding).ok_or(Error::InvalidGenotype { index: i, value: v })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dominant_and_recessive_tables() {
        let col = GenotypeColumn::complete(&[0, 1, 2]);
        assert_eq!(
            recode_genotype(&col, GenotypeCoding::Dominant).unwrap(),
            vec![false, true, true]
        );
        assert_eq!(
            recode_genotype(&col, GenotypeCoding::Recessive).unwrap(),
            vec![false, false, true]
        );
        let zeros = GenotypeColumn::complete(&[0, 0, 0]);
        assert_eq!(
            recode_genotype(&zeros, GenotypeCoding::Dominant).unwrap(),
            vec![false; 3]
        );
    }

    #[test]
    fn missing_and_invalid_values_are_rejected() {
        let col = GenotypeColumn::new(vec![Some(0), None]);
        assert!(matches!(
            recode_genotype(&col, GenotypeCoding::Dominant),
            Err(Error::MissingGenotype(1))
        ));
        let col = GenotypeColumn::complete(&[3]);
        assert!(matches!(
            recode_genotype(&col, GenotypeCoding::Recessive),
            Err(Error::InvalidGenotype { index: 0, value: 3 })
        ));
    }

    proptest! {
        #[test]
        fn codings_jointly_recover_genotype(values in proptest::collection::vec(0u8..3, 0..64)) {
            let col = GenotypeColumn::complete(&values);
            let d = recode_genotype(&col, GenotypeCoding::Dominant).unwrap();
            let r = recode_genotype(&col, GenotypeCoding::Recessive).unwrap();
            for i in 0..values.len() {
                let recovered = d[i] as u8 + r[i] as u8;
                prop_assert_eq!(recovered, values[i]);
            }
        }
    }
}
