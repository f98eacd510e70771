use rayon::prelude::*;

use crate::data::Dataset;

/// Every instance's neighbors sorted by distance, itself included at distance 0.
///
/// Region queries become a binary search, so one index serves a whole
/// DBSCAN sweep and every kNN graph. Memory is `O(n^2)`.
#[derive(Clone, Debug)]
pub struct NeighborIndex {
    sorted: Vec<Vec<(f64, u32)>>,
}

impl NeighborIndex {
    pub fn new(d: &Dataset) -> Self {
        let n = d.len();
        let sorted = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row: Vec<(f64, u32)> =
                    (0..n).map(|j| (d.dist(i, j), j as u32)).collect();
                row.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                row
            })
            .collect();
        Self { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Instances within `eps` of `i` (inclusive), `i` itself included.
    pub fn within(&self, i: usize, eps: f64) -> impl Iterator<Item = usize> + '_ {
        let row = &self.sorted[i];
        let end = row.partition_point(|&(d, _)| d <= eps);
        row[..end].iter().map(|&(_, j)| j as usize)
    }

    pub fn count_within(&self, i: usize, eps: f64) -> usize {
        self.sorted[i].partition_point(|&(d, _)| d <= eps)
    }

    /// The `k` nearest other instances of `i`, ties broken by index.
    pub fn nearest(&self, i: usize, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.sorted[i]
            .iter()
            .map(|&(_, j)| j as usize)
            .filter(move |&j| j != i)
            .take(k)
    }
}
