//! Covariate selection when there are more candidate covariates than the
//! sample can support: iterated L1-constrained logistic fits followed by
//! stepwise logistic regression on the survivors.

mod iterative;
mod lasso;
mod stepwise;

pub use iterative::{
    choose_bound, iterative_select, BoundChoice, RemovalReason, SelectConfig, SelectionRecord, SelectionTrace,
};
pub use lasso::{lasso_logistic, lasso_logistic_with, LassoFit, LassoOptions};
pub use stepwise::{stepwise_logistic, Criterion, Direction, StepRecord, StepwiseResult};
