//! Rank a pool of hard clustering models by how far each model's
//! connectivity lies from the co-association consensus of the whole pool.
//!
//! The crate also carries the baselines (average ARI/NMI, four internal
//! validity indices), synthetic ensemble generators, a small seeded KMeans
//! for building pools from raw data, and the correlation-based evaluation
//! harness used to compare ranking methods.

pub mod agreement;
pub mod cli;
pub mod consensus;
pub mod error;
pub mod evaluation;
pub mod indices;
pub mod io;
pub mod kmeans;
pub mod partition;
pub mod scoring;
pub mod synth;

pub use consensus::{BinarisedConsensus, ConsensusMatrix};
pub use error::{Error, Result};
pub use partition::{canonicalise, ConnectivityMatrix, Ensemble, Partition};
pub use scoring::{
    binary_discotec_score, discotec_score, informativeness, pair_distance, rank_ensemble,
    ConstraintSet, DistanceKind, Orientation, ScoreReport,
};
