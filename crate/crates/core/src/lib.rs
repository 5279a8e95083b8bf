//! Reduced Google matrix analysis of directed graphs.
//!
//! Given a large directed graph and an ordered subset of `N_r` nodes, this
//! crate computes the `N_r × N_r` reduced Google matrix
//!
//! > G_R = G_rr + G_rs (1 − G_ss)⁻¹ G_sr
//!
//! which keeps the direct links among the subset and folds every indirect
//! path through the rest of the network (the *scattering* set) into an
//! effective transition probability. `G_R` is assembled from three parts:
//! the direct block `G_rr`, a rank-one projector part `G_pr` carried by the
//! leading eigenvector of `G_ss`, and the hidden-link part `G_qr` obtained
//! from a rapidly converging series once that eigenvector is projected out.
//! `G_ss` is never materialized; every product is a masked sparse matvec on
//! the full Google matrix.
//!
//! On top of the reduced matrix the crate provides link sensitivity
//! (logarithmic derivatives of reduced PageRank under a boosted link),
//! pairwise relationship imbalance, and top-k friends/followers networks.
//!
//! Modules:
//!
//! - [`graph`]: edge-list loading, inversion, synthetic generation, labels.
//! - [`google`]: implicit Google matrix, PageRank and CheiRank.
//! - [`dense`]: small dense matrices and the stationary solver used on them.
//! - [`reduced`]: scattering eigenpair, reduced matrix and its components.
//! - [`sensitivity`]: link perturbation, sensitivity and imbalance.
//! - [`friends`]: friends/followers networks and DOT export.
//! - [`oracle`]: dense reference implementations for testing.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dense;
pub mod error;
pub mod friends;
pub mod google;
pub mod graph;
pub mod oracle;
pub mod reduced;
pub mod sensitivity;

mod format;

pub use dense::{DenseMatrix, LinearOperator};
pub use error::{Error, Result};
pub use format::fmt_f64;
pub use friends::{FriendNetwork, Mode};
pub use google::{GoogleMatrix, RankVector};
pub use graph::{DirectedGraph, LoadStats, NodeSubset};
pub use reduced::{ReduceOptions, ReducedMatrices};
pub use sensitivity::{ImbalanceMatrix, Perturbation, SensitivityReport};

/// Damping factor used throughout unless overridden.
pub const DEFAULT_ALPHA: f64 = 0.85;

/// Relative link boost used by the sensitivity analysis unless overridden.
pub const DEFAULT_DELTA: f64 = 0.03;
