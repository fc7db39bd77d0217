//! Greedy and stepwise-lookahead decision forests for binary classification.
//!
//! The crate is `no_std` + `alloc` at its heart. The optional `parallel`
//! feature (on by default) pulls in `std` and trains trees, folds and
//! experiment cells on a rayon pool; results are identical with or without
//! it, and independent of the pool size.
//!
//! Module map:
//!
//! * [`dataset`]: labeled feature matrices, quantile candidate thresholds,
//!   fold plans and holdout splits.
//! * [`tree`]: Gini impurity, greedy split search, depth-2 lookahead block
//!   search, recursive growth and prediction.
//! * [`forest`]: bagged ensembles, probabilistic aggregation and split-count
//!   feature importance.
//! * [`tuning`]: grid search by k-fold cross-validation.
//! * [`synth`]: the tunable-noise XOR generator and the accuracy sweep.
//! * [`finance`]: OHLCV bars, technical indicators, next-day-sign datasets and
//!   a binomial significance test.
//! * [`backtest`]: walk-forward long/short strategy, performance metrics and
//!   two-feature heatmaps.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is how NaN gets rejected together with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod backtest;
pub mod dataset;
mod error;
pub mod finance;
pub mod forest;
mod math;
mod par;
pub mod seed;
pub mod synth;
pub mod tree;
pub mod tuning;

pub use dataset::{Label, LabeledDataset};
pub use error::{Error, Result};
pub use forest::{Forest, ForestParams};
pub use tree::{FeatureSubset, InductionMode, TreeNode, TreeParams};
