use std::collections::VecDeque;

use super::{Clustering, NeighborIndex, Provenance, NOISE};
use crate::data::Dataset;
use crate::error::{Error, Result};

const UNVISITED: i32 = -2;

/// Density-based clustering.
///
/// A point is core when at least `min_pts` points, itself included, lie within
/// `eps`. Clusters grow breadth-first from core points in instance order; a
/// border point joins the first cluster that reaches it. Unreached points are
/// [`NOISE`].
pub fn run_dbscan(d: &Dataset, eps: f64, min_pts: usize) -> Result<Clustering> {
    check(eps, min_pts)?;
    let index = NeighborIndex::new(d);
    Ok(dbscan_with_index(&index, eps, min_pts))
}

fn check(eps: f64, min_pts: usize) -> Result<()> {
    if !(eps > 0.0) || min_pts == 0 {
        return Err(Error::InvalidArgument(format!(
            "DBSCAN needs eps > 0 and minPts >= 1, got eps = {eps}, minPts = {min_pts}"
        )));
    }
    Ok(())
}

pub(crate) fn dbscan_with_index(index: &NeighborIndex, eps: f64, min_pts: usize) -> Clustering {
    let n = index.len();
    let core: Vec<bool> = (0..n).map(|i| index.count_within(i, eps) >= min_pts).collect();
    let mut labels = vec![UNVISITED; n];
    let mut cluster = 0;
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if labels[seed] != UNVISITED || !core[seed] {
            continue;
        }
        labels[seed] = cluster;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for q in index.within(p, eps) {
                if labels[q] == UNVISITED {
                    labels[q] = cluster;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        cluster += 1;
    }
    for l in labels.iter_mut() {
        if *l == UNVISITED {
            *l = NOISE;
        }
    }
    Clustering::new(Provenance::Dbscan { eps, min_pts }, labels)
}
