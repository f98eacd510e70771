//! Constraint-based selection (COBS) of clusterings.
//!
//! A large ensemble of unsupervised clusterings is generated by sweeping the
//! hyperparameters of K-means, DBSCAN and spectral clustering. Pairwise
//! must-link / cannot-link constraints then pick the member that satisfies the
//! most of them, either from a random batch of constraints or from pairs
//! chosen actively by weighted disagreement across the ensemble.
//!
//! Module map:
//!
//! * [`data`]: CSV ingestion, normalization, distance statistics, supervision split.
//! * [`engines`]: K-means, DBSCAN, spectral clustering and the ensemble grid sweep.
//! * [`constraints`]: pairwise constraints, oracles and satisfaction scoring.
//! * [`selection`]: batch and active selection plus the silhouette and NumSat baselines.
//! * [`evaluation`]: adjusted Rand index and the repeated experiment harness.

pub mod constraints;
pub mod data;
pub mod engines;
mod error;
pub mod evaluation;
pub mod linalg;
pub mod projection;
pub mod rng;
pub mod selection;

pub use constraints::{
    generate_random_constraints, satisfaction_score, Constraint, ConstraintKind, ConstraintSet,
    LabelOracle, Oracle, Pair,
};
pub use data::{
    distance_stats, load_dataset, normalize, split_supervision, Dataset, DistanceStats,
    LabelColumn, LoadOptions, SupervisionSplit,
};
pub use engines::{
    generate_ensemble, generate_ensemble_with_workers, run_dbscan, run_kmeans, run_provenance,
    run_spectral, Affinity, Algorithm, Clustering, ClusteringEnsemble, HyperGrid, Provenance,
    NOISE,
};
pub use error::{Error, Result};
pub use evaluation::{adjusted_rand_index, ari, evaluate_selected};
pub use selection::{
    cobs_select, numsat_select, silhouette_select, weighted_agreement, ActiveConfig,
    ActiveSession,
};
