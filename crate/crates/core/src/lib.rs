//! Two-stage ensemble prediction for binary outcomes from multitype data.
//!
//! The crate combines a model fitted on existing covariates (continuous and
//! binary clinical variables, `Z`) with models fitted on newly available
//! binary covariates (SNPs, `X`):
//!
//! * [`logicreg`]: Boolean-tree models over `X` searched by simulated
//!   annealing, with permutation tests for signal and model size.
//! * [`select`]: L1-constrained logistic fits used iteratively to shrink the
//!   SNP set below the sample count, followed by backward stepwise logistic
//!   regression.
//! * [`glm`]: weighted logistic regression by IRLS.
//! * [`svm`]: soft-margin SVM trained by SMO, used as a gate.
//! * [`ensemble`]: weighted averaging, composite models, and the gated
//!   two-stage predictor together with its truth-dependent oracle.
//! * [`metrics`]: accuracy, error rates and Mann-Whitney auROC.
//! * [`dataset`]: CSV ingestion, genotype recoding, splits and a synthetic
//!   heterogeneous-population generator.

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod glm;
pub mod logicreg;
pub mod metrics;
pub mod seed;
pub mod select;
pub mod svm;
pub mod textfmt;

pub use error::{Error, Result};

/// Library version recorded in experiment reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
