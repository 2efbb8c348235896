//! Ranking players and generalized lineups (individuals, pairs, trios, ...,
//! full lineups) from plus-minus stint data.
//!
//! The crate builds the extended hypergraph of a team's observed lineups, the
//! Jaccard-weighted line graph of that hypergraph, and fits the estimator
//! family on top of them:
//!
//! - raw PM and the APM / PAPM regression baselines (team and league mode)
//! - HAPM: weighted ridge regression on the extended design matrix, where
//!   coefficients rank players and fitted values rank generalized lineups
//! - LAPM: Bayesian vertex regression on the line graph with a Laplacian
//!   smoothness prior, solved in the truncated eigenbasis, with full
//!   posterior sampling via MALA
//!
//! Uncertainty comes from row bootstrap (HAPM) and posterior draws (LAPM);
//! the `eval` module adds Spearman-based comparison harnesses and a
//! synthetic-season generator with known ground truth.

pub mod eval;
pub mod ingest;
pub mod lapm;
pub mod metrics;
pub mod model;
pub mod rank;
pub mod regression;
pub mod synth;

#[cfg(test)]
pub(crate) mod testutil;

pub use model::{AggregatedRecord, GeneralizedLineup, LineGraph, PlayerId, StintRecord};
pub use rank::RankedTable;
