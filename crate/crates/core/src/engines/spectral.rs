use nalgebra::DMatrix;

use super::kmeans::fit_kmeans;
use super::{Affinity, Clustering, NeighborIndex, Provenance};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{top_eigenpairs, EigenPairs, SparseSymmetric, SymmetricOperator};
use crate::rng;

/// Minimum number of eigenvectors computed per graph. Embeddings for every
/// `K <= SPECTRAL_BASIS` are prefixes of the same basis, so a sweep over `K`
/// needs one eigensolve per graph.
pub const SPECTRAL_BASIS: usize = 10;

/// `D^{-1/2} W D^{-1/2}` for the requested affinity. Its leading eigenvectors
/// are the trailing ones of the symmetric normalized Laplacian.
pub(crate) enum NormalizedAffinity {
    Sparse(SparseSymmetric),
    Dense(DMatrix<f64>),
}

impl NormalizedAffinity {
    pub(crate) fn build(d: &Dataset, affinity: Affinity, index: Option<&NeighborIndex>) -> Result<Self> {
        let n = d.len();
        match affinity {
            Affinity::Knn(k) => {
                if k == 0 || k >= n {
                    return Err(Error::InvalidArgument(format!(
                        "kNN graph needs 1 <= k < n, got k = {k}, n = {n}"
                    )));
                }
                let owned;
                let index = match index {
                    Some(i) => i,
                    None => {
                        owned = NeighborIndex::new(d);
                        &owned
                    }
                };
                let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
                for i in 0..n {
                    for j in index.nearest(i, k) {
                        adj[i].push(j);
                        adj[j].push(i);
                    }
                }
                for row in adj.iter_mut() {
                    row.sort_unstable();
                    row.dedup();
                }
                let inv_sqrt: Vec<f64> = adj.iter().map(|r| inv_sqrt_degree(r.len() as f64)).collect();
                let rows = adj
                    .iter()
                    .enumerate()
                    .map(|(i, r)| r.iter().map(|&j| (j, inv_sqrt[i] * inv_sqrt[j])).collect())
                    .collect();
                Ok(Self::Sparse(SparseSymmetric::from_rows(rows)))
            }
            Affinity::Gaussian(sigma) => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
                }
                let scale = -1.0 / (2.0 * sigma * sigma);
                let mut w = DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        0.0
                    } else {
                        (d.sq_dist(i, j) * scale).exp()
                    }
                });
                let inv_sqrt: Vec<f64> = w.column_iter().map(|c| inv_sqrt_degree(c.sum())).collect();
                for j in 0..n {
                    for i in 0..n {
                        w[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
                    }
                }
                Ok(Self::Dense(w))
            }
        }
    }

    fn operator(&self) -> &dyn SymmetricOperator {
        match self {
            Self::Sparse(s) => s,
            Self::Dense(m) => m,
        }
    }

    /// Vertices with at least one edge.
    fn connected_vertices(&self) -> usize {
        match self {
            Self::Sparse(s) => (0..s.dim()).filter(|&i| s.row(i).next().is_some()).count(),
            Self::Dense(m) => m.column_iter().filter(|c| c.iter().any(|&v| v > 0.0)).count(),
        }
    }

    pub(crate) fn eigenbasis(&self, dim: usize, seed: u64) -> Result<EigenPairs> {
        let connected = self.connected_vertices();
        if connected < dim.min(self.operator().dim()) {
            return Err(Error::Eigen(format!(
                "graph has {connected} connected vertices, fewer than the {dim} eigenvectors required"
            )));
        }
        top_eigenpairs(self.operator(), dim, seed)
    }
}

fn inv_sqrt_degree(deg: f64) -> f64 {
    if deg > 0.0 {
        1.0 / deg.sqrt()
    } else {
        0.0
    }
}

/// Number of eigenvectors computed for a given `K`.
pub(crate) fn basis_dim(k: usize, n: usize) -> usize {
    k.max(SPECTRAL_BASIS).min(n)
}

/// Seed of the eigensolver start block for a graph; fixed so the basis depends
/// only on the graph.
pub(crate) fn eigen_seed(affinity: Affinity) -> u64 {
    match affinity {
        Affinity::Knn(k) => rng::hash_words(&[1, k as u64]),
        Affinity::Gaussian(s) => rng::hash_words(&[2, s.to_bits()]),
    }
}

/// Row-normalized embedding built from the first `k` basis vectors.
/// All-zero rows stay zero.
pub(crate) fn embed(basis: &EigenPairs, k: usize) -> Vec<f64> {
    let n = basis.vectors.nrows();
    let mut out = Vec::with_capacity(n * k);
    for i in 0..n {
        let row: Vec<f64> = (0..k).map(|c| basis.vectors[(i, c)]).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.extend(row.iter().map(|v| v / norm));
        } else {
            out.extend(row);
        }
    }
    out
}

/// Row-normalized spectral embedding of `d` in `k` dimensions (row-major).
pub fn spectral_embedding(d: &Dataset, k: usize, affinity: Affinity) -> Result<Vec<f64>> {
    check_k(d, k)?;
    let graph = NormalizedAffinity::build(d, affinity, None)?;
    let basis = graph.eigenbasis(basis_dim(k, d.len()), eigen_seed(affinity))?;
    Ok(embed(&basis, k))
}

fn check_k(d: &Dataset, k: usize) -> Result<()> {
    if k == 0 || k > d.len() {
        return Err(Error::InvalidArgument(format!(
            "spectral clustering needs 1 <= K <= n, got K = {k}, n = {}",
            d.len()
        )));
    }
    Ok(())
}

pub(crate) fn cluster_embedding(
    embedding: &[f64],
    k: usize,
    affinity: Affinity,
    seed: u64,
) -> Result<Clustering> {
    let fit = fit_kmeans(embedding, k, k, seed)?;
    Ok(Clustering::new(
        Provenance::Spectral { k, affinity, seed },
        fit.labels.iter().map(|&l| l as i32).collect(),
    ))
}

/// Normalized spectral clustering: leading eigenvectors of the normalized
/// affinity, row-normalized, then K-means seeded with `seed`.
pub fn run_spectral(d: &Dataset, k: usize, affinity: Affinity, seed: u64) -> Result<Clustering> {
    let embedding = spectral_embedding(d, k, affinity)?;
    cluster_embedding(&embedding, k, affinity, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{normalize, synthetic};
    use crate::evaluation::ari;
    use crate::linalg::dense_top_eigenpairs;

    fn truth(d: &Dataset) -> Vec<i32> {
        d.labels().unwrap().iter().map(|&l| l as i32).collect()
    }

    #[test]
    fn disconnected_components_are_recovered() {
        let mut rows: Vec<Vec<f64>> = (0..15).map(|i| vec![i as f64 * 0.01]).collect();
        rows.extend((0..15).map(|i| vec![5.0 + i as f64 * 0.01]));
        let labels = (0..30).map(|i| i / 15).collect();
        let d = normalize(&Dataset::from_rows("t", rows, Some(labels)).unwrap());
        for seed in 0..5 {
            let c = run_spectral(&d, 2, Affinity::Knn(3), seed).unwrap();
            assert_eq!(ari(&c.assignment, &truth(&d)), 1.0);
        }
    }

    #[test]
    fn wide_gaussian_still_gives_valid_clustering() {
        let d = normalize(&synthetic::simplex_blobs(3));
        let c = run_spectral(&d, 3, Affinity::Gaussian(1e3), 1).unwrap();
        assert_eq!(c.len(), d.len());
        assert_eq!(c.n_clusters(), 3);
        assert_eq!(c.n_noise(), 0);
    }

    #[test]
    fn rings_knn() {
        let d = normalize(&synthetic::concentric_rings(100, 0.3, 1.0, 0.03, 5));
        let c = run_spectral(&d, 2, Affinity::Knn(10), 0).unwrap();
        assert!(ari(&c.assignment, &truth(&d)) >= 0.9);
    }

    /// The eigenbasis agrees with an independent dense decomposition of the
    /// normalized Laplacian built directly from its definition.
    #[test]
    fn embedding_matches_laplacian_oracle() {
        let d = normalize(&synthetic::concentric_rings(40, 0.3, 1.0, 0.03, 2));
        let n = d.len();
        let sigma = 0.2;
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    w[(i, j)] = (-d.sq_dist(i, j) / (2.0 * sigma * sigma)).exp();
                }
            }
        }
        let deg: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
        let lap = DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - w[(i, j)] / (deg[i] * deg[j]).sqrt()
        });
        // Smallest Laplacian eigenvalues = largest of its negation.
        let oracle = dense_top_eigenpairs(-lap, 4).unwrap();
        let graph = NormalizedAffinity::build(&d, Affinity::Gaussian(sigma), None).unwrap();
        let basis = graph.eigenbasis(4, 0).unwrap();
        for (a, b) in oracle.values.iter().zip(&basis.values) {
            assert!((-a - (1.0 - b)).abs() < 1e-9);
        }
        // Same spanned subspace: projection of oracle vectors onto the basis.
        let proj = basis.vectors.transpose() * &oracle.vectors;
        for c in 0..4 {
            assert!((proj.column(c).norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn embedding_rows_have_unit_norm() {
        let d = normalize(&synthetic::two_moons(60, 0.05, 1));
        for aff in [Affinity::Knn(5), Affinity::Gaussian(0.1), Affinity::Gaussian(0.01)] {
            let e = spectral_embedding(&d, 4, aff).unwrap();
            for row in e.chunks_exact(4) {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn large_graph_uses_iterative_solver_consistently() {
        let d = normalize(&synthetic::mixture(600, 5, 4, 0.05, 8));
        let a = run_spectral(&d, 4, Affinity::Knn(8), 3).unwrap();
        let b = run_spectral(&d, 4, Affinity::Knn(8), 3).unwrap();
        assert_eq!(a, b);
        assert!(ari(&a.assignment, &truth(&d)) > 0.9);
    }

    #[test]
    fn invalid_graph_parameters() {
        let d = normalize(&synthetic::simplex_blobs(0));
        assert!(run_spectral(&d, 2, Affinity::Knn(0), 0).is_err());
        assert!(run_spectral(&d, 2, Affinity::Knn(d.len()), 0).is_err());
        assert!(run_spectral(&d, 2, Affinity::Gaussian(0.0), 0).is_err());
        assert!(run_spectral(&d, d.len() + 1, Affinity::Knn(3), 0).is_err());
    }
}
