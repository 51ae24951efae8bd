//! Fairness-aware binary classification through differentiable
//! regularization.
//!
//! Two penalties can be blended into the training loss of any model that
//! consumes per-example gradients and diagonal Hessians: a
//! statistical-parity penalty on the score means, and a causal penalty
//! that removes the controlled direct effect of a protected attribute.
//! The causal penalty works through a propensity-score surrogate: model
//! scores are regressed on polynomial features of the balancing score
//! b(X) = P(Z=1|X) plus a group term, and the regression coefficients are
//! driven toward the coefficients of a fair target whose group contrast
//! is the symmetrized indirect effect only.
//!
//! The crate ships the whole experiment pipeline: dataset generation and
//! ingestion, balancing-score estimation, the loss assembly, a linear
//! trainer and a gradient-boosted-tree trainer, the annealed
//! double-early-stopping schedule, sweep orchestration and evaluation
//! metrics, plus an exact discrete-model oracle used to verify the
//! causal identities numerically.

pub mod dataset;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod oracle;
pub mod propensity;
pub mod schedule;
pub mod surrogate;
pub mod trainers;

pub use error::{Error, Result};
