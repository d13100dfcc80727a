//! Estimators, bandit agents and simulators for adaptive interventions.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command line live in the `adaptint` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bandits;
pub mod domain;
pub mod envs;
pub mod error;
pub mod eval;
pub mod features;
pub mod indefinite;
pub mod linalg;
pub mod offline;
pub mod regime;
pub mod regression;
pub mod rng;

pub use nalgebra;

pub use domain::{discounted_return, stream_return, ActionId, Dataset, Horizon, NextState, StageRecord, StateVector, Terminal, Trajectory};
pub use error::{Error, Result};
pub use features::{history_summary, FeatureKind, FeatureMap, HistoryLayout, Summary};
pub use regime::{argmax_tiebreak, policy_prob, sample_index, soft_threshold, softmax, Regime, StageRule};
pub use regression::{ridge_fit, wls_fit, NigPosterior, SuffStats};
pub use rng::{RngSpec, Stream};
