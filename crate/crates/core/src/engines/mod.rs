//! Unsupervised clustering engines and the ensemble they populate.

mod dbscan;
mod ensemble;
mod kmeans;
mod neighbors;
mod spectral;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use dbscan::run_dbscan;
pub use ensemble::{
    generate_ensemble, generate_ensemble_with_workers, ClusteringEnsemble, DbscanGrid, HyperGrid,
    IntRange, KMeansGrid, RealRange, SkippedConfig, SpectralGrid,
};
pub use kmeans::{fit_kmeans, run_kmeans, KMeansFit, MAX_ITERATIONS};
pub use neighbors::NeighborIndex;
pub use spectral::{run_spectral, spectral_embedding, SPECTRAL_BASIS};

use crate::data::Dataset;
use crate::error::Result;

/// Label of an instance that belongs to no cluster.
pub const NOISE: i32 = -1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Kmeans,
    Dbscan,
    Spectral,
}

impl Algorithm {
    pub fn letter(self) -> char {
        match self {
            Algorithm::Kmeans => 'K',
            Algorithm::Dbscan => 'D',
            Algorithm::Spectral => 'S',
        }
    }
}

/// Spectral affinity graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Affinity {
    /// Union-symmetrized k-nearest-neighbor graph with unit weights.
    Knn(usize),
    /// Fully connected graph weighted by `exp(-d^2 / (2 sigma^2))`.
    Gaussian(f64),
}

/// Everything needed to regenerate a clustering from its dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Provenance {
    Kmeans { k: usize, seed: u64 },
    Dbscan { eps: f64, min_pts: usize },
    Spectral { k: usize, affinity: Affinity, seed: u64 },
}

impl Provenance {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Provenance::Kmeans { .. } => Algorithm::Kmeans,
            Provenance::Dbscan { .. } => Algorithm::Dbscan,
            Provenance::Spectral { .. } => Algorithm::Spectral,
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Kmeans { k, seed } => write!(f, "kmeans(K={k}, seed={seed})"),
            Provenance::Dbscan { eps, min_pts } => write!(f, "dbscan(eps={eps:.4}, minPts={min_pts})"),
            Provenance::Spectral { k, affinity: Affinity::Knn(nn), .. } => {
                write!(f, "spectral(K={k}, knn={nn})")
            }
            Provenance::Spectral { k, affinity: Affinity::Gaussian(s), .. } => {
                write!(f, "spectral(K={k}, sigma={s:.4})")
            }
        }
    }
}

/// One assignment of every instance to a cluster id or [`NOISE`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub provenance: Provenance,
    pub assignment: Vec<i32>,
}

impl Clustering {
    /// Relabels clusters in order of first appearance so ids are `0..k`.
    pub fn new(provenance: Provenance, assignment: Vec<i32>) -> Self {
        Self {
            provenance,
            assignment: canonical_labels(&assignment),
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn algorithm(&self) -> Algorithm {
        self.provenance.algorithm()
    }

    /// Noise is its own singleton: a noise instance shares a cluster with nobody.
    #[inline]
    pub fn same_cluster(&self, i: usize, j: usize) -> bool {
        let a = self.assignment[i];
        a != NOISE && a == self.assignment[j]
    }

    /// Number of non-noise clusters.
    pub fn n_clusters(&self) -> usize {
        self.assignment
            .iter()
            .filter(|&&l| l != NOISE)
            .max()
            .map_or(0, |&m| m as usize + 1)
    }

    pub fn n_noise(&self) -> usize {
        self.assignment.iter().filter(|&&l| l == NOISE).count()
    }

    /// Sizes of clusters `0..n_clusters()`.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters()];
        for &l in &self.assignment {
            if l != NOISE {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }
}

pub(crate) fn canonical_labels(labels: &[i32]) -> Vec<i32> {
    let mut map: HashMap<i32, i32> = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            if l == NOISE {
                NOISE
            } else {
                let next = map.len() as i32;
                *map.entry(l).or_insert(next)
            }
        })
        .collect()
}

/// Reruns the engine named by `provenance`.
pub fn run_provenance(d: &Dataset, provenance: &Provenance) -> Result<Clustering> {
    match *provenance {
        Provenance::Kmeans { k, seed } => run_kmeans(d, k, seed),
        Provenance::Dbscan { eps, min_pts } => run_dbscan(d, eps, min_pts),
        Provenance::Spectral { k, affinity, seed } => run_spectral(d, k, affinity, seed),
    }
}
