use rand::Rng;

use super::{Clustering, Provenance};
use crate::data::{sq_euclidean, Dataset};
use crate::error::{Error, Result};
use crate::rng;

/// Lloyd iterations stop at an assignment fixpoint or after this many rounds.
pub const MAX_ITERATIONS: usize = 300;

#[derive(Clone, Debug)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    /// Row-major `k x dim`.
    pub centroids: Vec<f64>,
    /// Within-cluster sum of squares after each centroid update.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Lloyd's algorithm on row-major `points`, with k-means++ seeding drawn
/// from `seed`.
///
/// An empty cluster takes over the instance farthest from its own centroid,
/// so the result has exactly `k` non-empty clusters whenever the points allow it.
pub fn fit_kmeans(points: &[f64], dim: usize, k: usize, seed: u64) -> Result<KMeansFit> {
    let n = if dim == 0 { 0 } else { points.len() / dim };
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "K-means needs 1 <= K <= n, got K = {k}, n = {n}"
        )));
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];

    let mut centroids = Vec::with_capacity(k * dim);
    for i in plus_plus(points, dim, k, seed) {
        centroids.extend_from_slice(row(i));
    }

    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut next = vec![0usize; n];
        for i in 0..n {
            let x = row(i);
            let (best, d) = (0..k)
                .map(|c| (c, sq_euclidean(x, &centroids[c * dim..(c + 1) * dim])))
                .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
            next[i] = best;
            dist[i] = d;
        }
        repair_empty(&mut next, &mut dist, k);

        if next == labels {
            converged = true;
            break;
        }
        labels = next;

        centroids.iter_mut().for_each(|c| *c = 0.0);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = labels[i];
            counts[c] += 1;
            for (acc, v) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(row(i)) {
                *acc += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                centroids[c * dim..(c + 1) * dim].iter_mut().for_each(|v| *v *= inv);
            }
        }
        objective.push(
            (0..n)
                .map(|i| sq_euclidean(row(i), &centroids[labels[i] * dim..(labels[i] + 1) * dim]))
                .sum(),
        );
    }
    if !converged {
        log::warn!("K-means (K = {k}, seed = {seed}) hit the {MAX_ITERATIONS}-iteration cap");
    }
    Ok(KMeansFit {
        labels,
        centroids,
        objective,
        iterations,
        converged,
    })
}

/// k-means++ seeding: the first center uniformly, each further one with
/// probability proportional to its squared distance from the nearest chosen
/// center. If every remaining point coincides with a center, an unchosen
/// point is taken uniformly.
fn plus_plus(points: &[f64], dim: usize, k: usize, seed: u64) -> Vec<usize> {
    let n = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut r = rng::rng(seed);
    let mut chosen = vec![r.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_euclidean(row(i), row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = r.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total")
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[r.random_range(0..free.len())]
        };
        chosen.push(pick);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_euclidean(row(i), row(pick)));
        }
    }
    chosen
}

/// Moves the instance farthest from its centroid into each empty cluster.
fn repair_empty(labels: &mut [usize], dist: &mut [f64], k: usize) {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let donor = (0..labels.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dist[b] >= dist[i] => Some(b),
                _ => Some(i),
            });
        let Some(p) = donor else { return };
        sizes[labels[p]] -= 1;
        labels[p] = empty;
        sizes[empty] = 1;
        dist[p] = 0.0;
    }
}

pub fn run_kmeans(d: &Dataset, k: usize, seed: u64) -> Result<Clustering> {
    let fit = fit_kmeans(d.values(), d.n_features(), k, seed)?;
    Ok(Clustering::new(
        Provenance::Kmeans { k, seed },
        fit.labels.iter().map(|&l| l as i32).collect(),
    ))
}
