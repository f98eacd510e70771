use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dbscan::dbscan_with_index;
use super::spectral::{basis_dim, cluster_embedding, eigen_seed, embed, NormalizedAffinity};
use super::{run_kmeans, Affinity, Algorithm, Clustering, NeighborIndex, Provenance};
use crate::data::{distance_stats, Dataset};
use crate::error::{Error, Result};
use crate::linalg::EigenPairs;
use crate::rng;

/// Inclusive integer range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub lo: usize,
    pub hi: usize,
}

impl IntRange {
    pub fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    pub fn values(&self) -> impl Iterator<Item = usize> {
        self.lo..=self.hi
    }

    pub fn len(&self) -> usize {
        (self.hi + 1).saturating_sub(self.lo)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `count` evenly spaced values from `lo` to `hi`, both included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealRange {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl RealRange {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.count)
    }
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|i| if i == count - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansGrid {
    pub k: IntRange,
    /// Seeds `0..seeds` per `K`.
    pub seeds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DbscanGrid {
    /// Values of eps spread over `[min_d, max_d]` of the dataset.
    pub eps_count: usize,
    pub min_pts: IntRange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub k: IntRange,
    #[serde(default)]
    pub knn: Option<IntRange>,
    #[serde(default)]
    pub sigma: Option<RealRange>,
}

/// Hyperparameter sweep; an absent block skips that algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    #[serde(default)]
    pub kmeans: Option<KMeansGrid>,
    #[serde(default)]
    pub dbscan: Option<DbscanGrid>,
    #[serde(default)]
    pub spectral: Option<SpectralGrid>,
}

impl Default for HyperGrid {
    /// 180 K-means, 400 DBSCAN and 351 spectral configurations.
    ///
    /// minPts runs over `2..=21` so the DBSCAN block has 400 members.
    fn default() -> Self {
        Self {
            kmeans: Some(KMeansGrid {
                k: IntRange::new(2, 10),
                seeds: 20,
            }),
            dbscan: Some(DbscanGrid {
                eps_count: 20,
                min_pts: IntRange::new(2, 21),
            }),
            spectral: Some(SpectralGrid {
                k: IntRange::new(2, 10),
                knn: Some(IntRange::new(2, 20)),
                sigma: Some(RealRange {
                    lo: 0.01,
                    hi: 5.0,
                    count: 20,
                }),
            }),
        }
    }
}

impl HyperGrid {
    /// The default grid with minPts over `2..=20` (380 DBSCAN members).
    pub fn table_literal() -> Self {
        let mut g = Self::default();
        if let Some(db) = g.dbscan.as_mut() {
            db.min_pts = IntRange::new(2, 20);
        }
        g
    }

    /// Only the K-means sweep.
    pub fn kmeans_only(k: IntRange, seeds: usize) -> Self {
        Self {
            kmeans: Some(KMeansGrid { k, seeds }),
            dbscan: None,
            spectral: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("empty grid range: {what}")));
        if let Some(km) = &self.kmeans {
            if km.k.is_empty() || km.k.lo == 0 || km.seeds == 0 {
                return bad("kmeans");
            }
        }
        if let Some(db) = &self.dbscan {
            if db.eps_count == 0 || db.min_pts.is_empty() || db.min_pts.lo == 0 {
                return bad("dbscan");
            }
        }
        if let Some(sp) = &self.spectral {
            if sp.k.is_empty() || sp.k.lo == 0 {
                return bad("spectral.k");
            }
            if sp.knn.is_some_and(|r| r.is_empty() || r.lo == 0) {
                return bad("spectral.knn");
            }
            if sp.sigma.is_some_and(|r| r.count == 0 || !(r.lo > 0.0) || r.hi < r.lo) {
                return bad("spectral.sigma");
            }
        }
        Ok(())
    }

    /// Number of configurations the grid expands to.
    pub fn size(&self) -> usize {
        let km = self.kmeans.as_ref().map_or(0, |g| g.k.len() * g.seeds);
        let db = self.dbscan.as_ref().map_or(0, |g| g.eps_count * g.min_pts.len());
        let sp = self.spectral.as_ref().map_or(0, |g| {
            g.k.len() * (g.knn.map_or(0, |r| r.len()) + g.sigma.map_or(0, |r| r.count))
        });
        km + db + sp
    }

    /// Stable digest of the grid, for caching.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("grid serializes");
        hex::encode(Sha256::digest(&json))
    }

    fn spectral_configs(&self) -> Vec<(usize, Affinity)> {
        let Some(sp) = &self.spectral else {
            return Vec::new();
        };
        let mut out = Vec::new();
        if let Some(knn) = sp.knn {
            for k in sp.k.values() {
                for nn in knn.values() {
                    out.push((k, Affinity::Knn(nn)));
                }
            }
        }
        if let Some(sigma) = sp.sigma {
            let sigmas = sigma.values();
            for k in sp.k.values() {
                for &s in &sigmas {
                    out.push((k, Affinity::Gaussian(s)));
                }
            }
        }
        out
    }
}

/// A configuration that produced no clustering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedConfig {
    pub provenance: Provenance,
    pub reason: String,
}

/// The generated clusterings and one weight per clustering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "EnsembleFile", into = "EnsembleFile")]
pub struct ClusteringEnsemble {
    pub dataset: String,
    pub dataset_hash: String,
    pub clusterings: Vec<Clustering>,
    pub weights: Vec<f64>,
    pub skipped: Vec<SkippedConfig>,
}

/// On-disk form; weights are reset to uniform on load.
#[derive(Serialize, Deserialize)]
struct EnsembleFile {
    dataset: String,
    dataset_hash: String,
    clusterings: Vec<Clustering>,
    #[serde(default)]
    skipped: Vec<SkippedConfig>,
}

impl From<EnsembleFile> for ClusteringEnsemble {
    fn from(f: EnsembleFile) -> Self {
        Self::new(f.dataset, f.dataset_hash, f.clusterings, f.skipped)
    }
}

impl From<ClusteringEnsemble> for EnsembleFile {
    fn from(e: ClusteringEnsemble) -> Self {
        Self {
            dataset: e.dataset,
            dataset_hash: e.dataset_hash,
            clusterings: e.clusterings,
            skipped: e.skipped,
        }
    }
}

impl ClusteringEnsemble {
    /// Uniform weights `1 / |C|`.
    pub fn new(
        dataset: String,
        dataset_hash: String,
        clusterings: Vec<Clustering>,
        skipped: Vec<SkippedConfig>,
    ) -> Self {
        let w = 1.0 / clusterings.len().max(1) as f64;
        Self {
            dataset,
            dataset_hash,
            weights: vec![w; clusterings.len()],
            clusterings,
            skipped,
        }
    }

    pub fn from_clusterings(clusterings: Vec<Clustering>) -> Self {
        Self::new(String::new(), String::new(), clusterings, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.clusterings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusterings.is_empty()
    }

    pub fn n_instances(&self) -> usize {
        self.clusterings.first().map_or(0, Clustering::len)
    }

    pub fn count(&self, algorithm: Algorithm) -> usize {
        self.clusterings.iter().filter(|c| c.algorithm() == algorithm).count()
    }

    /// Members produced by one algorithm, with their ensemble indices.
    pub fn restrict(&self, algorithm: Algorithm) -> Vec<(usize, &Clustering)> {
        self.clusterings
            .iter()
            .enumerate()
            .filter(|(_, c)| c.algorithm() == algorithm)
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(file)?)
    }
}

/// Runs every configuration of `grid` on the global thread pool.
pub fn generate_ensemble(d: &Dataset, grid: &HyperGrid) -> Result<ClusteringEnsemble> {
    grid.validate()?;
    if d.len() < 2 {
        return Err(Error::InvalidArgument("ensemble generation needs at least two instances".into()));
    }

    let mut clusterings = Vec::with_capacity(grid.size());
    let mut skipped = Vec::new();

    if let Some(km) = &grid.kmeans {
        let configs: Vec<(usize, u64)> = km
            .k
            .values()
            .flat_map(|k| (0..km.seeds as u64).map(move |s| (k, s)))
            .collect();
        let results: Vec<_> = configs
            .par_iter()
            .map(|&(k, seed)| (Provenance::Kmeans { k, seed }, run_kmeans(d, k, seed)))
            .collect();
        collect(results, &mut clusterings, &mut skipped);
    }

    let needs_index = grid.dbscan.is_some()
        || grid.spectral.as_ref().is_some_and(|s| s.knn.is_some());
    let index = needs_index.then(|| NeighborIndex::new(d));

    if let (Some(db), Some(index)) = (&grid.dbscan, &index) {
        let stats = distance_stats(d)?;
        let eps_values = linspace(stats.min_d, stats.max_d, db.eps_count);
        let configs: Vec<(f64, usize)> = eps_values
            .iter()
            .flat_map(|&e| db.min_pts.values().map(move |m| (e, m)))
            .collect();
        let results: Vec<Clustering> = configs
            .par_iter()
            .map(|&(eps, min_pts)| dbscan_with_index(index, eps, min_pts))
            .collect();
        clusterings.extend(results);
    }

    let spectral = grid.spectral_configs();
    if !spectral.is_empty() {
        let n = d.len();
        let mut graph_keys: Vec<(Affinity, usize)> = Vec::new();
        for &(k, aff) in &spectral {
            let key = (aff, basis_dim(k, n));
            if !graph_keys.contains(&key) {
                graph_keys.push(key);
            }
        }
        let bases: Vec<Result<EigenPairs>> = graph_keys
            .par_iter()
            .map(|&(aff, dim)| {
                let graph = NormalizedAffinity::build(d, aff, index.as_ref())?;
                graph.eigenbasis(dim, eigen_seed(aff))
            })
            .collect();
        let results: Vec<_> = spectral
            .par_iter()
            .map(|&(k, aff)| {
                let seed = spectral_seed(k, aff);
                let provenance = Provenance::Spectral { k, affinity: aff, seed };
                let key = (aff, basis_dim(k, n));
                let slot = graph_keys.iter().position(|g| *g == key).expect("graph key registered");
                let basis = &bases[slot];
                let result = match basis {
                    Ok(basis) if k <= n => cluster_embedding(&embed(basis, k), k, aff, seed),
                    Ok(_) => Err(Error::InvalidArgument(format!("K = {k} exceeds n = {n}"))),
                    Err(e) => Err(Error::Eigen(e.to_string())),
                };
                (provenance, result)
            })
            .collect();
        collect(results, &mut clusterings, &mut skipped);
    }

    if !skipped.is_empty() {
        log::warn!("{} configurations skipped during generation", skipped.len());
    }
    Ok(ClusteringEnsemble::new(
        d.name().to_string(),
        d.fingerprint(),
        clusterings,
        skipped,
    ))
}

/// K-means seed for a spectral configuration, derived from its parameters.
pub(crate) fn spectral_seed(k: usize, affinity: Affinity) -> u64 {
    let (kind, param) = match affinity {
        Affinity::Knn(nn) => (1, nn as u64),
        Affinity::Gaussian(s) => (2, s.to_bits()),
    };
    rng::hash_words(&[k as u64, kind, param]) >> 1
}

fn collect(
    results: Vec<(Provenance, Result<Clustering>)>,
    clusterings: &mut Vec<Clustering>,
    skipped: &mut Vec<SkippedConfig>,
) {
    for (provenance, result) in results {
        match result {
            Ok(c) => clusterings.push(c),
            Err(e) => {
                log::warn!("skipping {provenance}: {e}");
                skipped.push(SkippedConfig {
                    provenance,
                    reason: e.to_string(),
                });
            }
        }
    }
}

/// [`generate_ensemble`] on a dedicated pool of `workers` threads. The result
/// does not depend on the worker count.
pub fn generate_ensemble_with_workers(
    d: &Dataset,
    grid: &HyperGrid,
    workers: usize,
) -> Result<ClusteringEnsemble> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| generate_ensemble(d, grid))
}
