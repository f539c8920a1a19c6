//! Bi-level unsupervised feature selection.
//!
//! The crate is split along the pipeline:
//!
//! - [`data`]: datasets, CSV ingestion, synthetic generators, standardization, splits
//! - [`graph`]: k-NN Gaussian similarity graphs and their Laplacians
//! - [`solver`]: the proximal alternating minimization over (P, W, Y)
//! - [`selection`]: feature rankings, the Laplacian Score baseline, dataset reduction
//! - [`eval`]: k-means, ACC/NMI, k-NN classification and the repeat protocol
//!
//! Matrices follow one orientation throughout: a feature matrix is `d x n`
//! (one column per sample), the projection `W` is `d x c` and pseudo-labels
//! `Y` are `n x c`.

pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod selection;
pub mod solver;
pub mod sparse;

pub use data::{Dataset, SyntheticKind, SyntheticSpec};
pub use error::{Error, Result};
pub use graph::{NormalizedAffinity, Sigma, SimilarityGraph};
pub use selection::FeatureRanking;
pub use solver::{
    AblationCase, AdaptiveGraph, BlufsConfig, ProjectionMatrix, PseudoLabels, SolverState,
    SparsityMode,
};
