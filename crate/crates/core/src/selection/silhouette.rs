use rayon::prelude::*;

use crate::data::Dataset;
use crate::engines::{Clustering, NOISE};
use crate::error::{Error, Result};

/// Dense pairwise Euclidean distances, row-major.
#[derive(Clone, Debug)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(d: &Dataset) -> Self {
        let n = d.len();
        let mut values = vec![0.0; n * n];
        values.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = d.dist(i, j);
            }
        });
        Self { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Mean silhouette coefficient, or `None` when it is undefined (fewer than
/// two groups, or every point in its own group). Noise points are singleton
/// groups; members of singleton groups contribute 0.
pub fn silhouette_score(dm: &DistanceMatrix, c: &Clustering) -> Option<f64> {
    let n = dm.len();
    assert_eq!(c.len(), n, "clustering and distance matrix disagree on n");
    let groups = group_ids(&c.assignment);
    let n_groups = groups.iter().copied().max().map_or(0, |g| g + 1);
    if n_groups < 2 || n_groups >= n {
        return None;
    }
    let mut sizes = vec![0usize; n_groups];
    for &g in &groups {
        sizes[g] += 1;
    }
    let total: f64 = (0..n)
        .map(|i| {
            let own = groups[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; n_groups];
            for j in 0..n {
                sums[groups[j]] += dm.get(i, j);
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..n_groups)
                .filter(|&g| g != own)
                .map(|g| sums[g] / sizes[g] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .sum();
    Some(total / n as f64)
}

/// Cluster ids with each noise point given its own fresh id.
fn group_ids(assignment: &[i32]) -> Vec<usize> {
    let clusters = assignment.iter().filter(|&&l| l != NOISE).max().map_or(0, |&m| m as usize + 1);
    let mut next = clusters;
    assignment
        .iter()
        .map(|&l| {
            if l == NOISE {
                next += 1;
                next - 1
            } else {
                l as usize
            }
        })
        .collect()
}

/// Position (within `candidates`) and value of the highest mean silhouette.
/// Candidates where the index is undefined are skipped; ties go to the
/// earliest candidate.
pub fn silhouette_select<'a>(
    dm: &DistanceMatrix,
    candidates: impl IntoIterator<Item = &'a Clustering>,
) -> Result<(usize, f64)> {
    let candidates: Vec<&Clustering> = candidates.into_iter().collect();
    let scores: Vec<Option<f64>> = candidates.par_iter().map(|c| silhouette_score(dm, c)).collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        if let Some(s) = s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    best.ok_or(Error::NoValidCandidate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::Provenance;

    fn c(assignment: Vec<i32>) -> Clustering {
        Clustering::new(Provenance::Kmeans { k: 0, seed: 0 }, assignment)
    }

    fn line(points: &[f64]) -> Dataset {
        Dataset::from_rows("line", points.iter().map(|&p| vec![p]).collect(), None).unwrap()
    }

    #[test]
    fn hand_computed_value() {
        // Points 0, 1, 10 with clusters {0, 1} and {10}:
        // s(0) = (10 - 1) / 10, s(1) = (9 - 1) / 9, s(10) = 0.
        let dm = DistanceMatrix::new(&line(&[0.0, 1.0, 10.0]));
        let s = silhouette_score(&dm, &c(vec![0, 0, 1])).unwrap();
        let expected = (0.9 + 8.0 / 9.0) / 3.0;
        assert!((s - expected).abs() < 1e-12);
    }

    #[test]
    fn undefined_cases() {
        let dm = DistanceMatrix::new(&line(&[0.0, 1.0, 2.0]));
        assert_eq!(silhouette_score(&dm, &c(vec![0, 0, 0])), None);
        assert_eq!(silhouette_score(&dm, &c(vec![0, 1, 2])), None);
        assert_eq!(silhouette_score(&dm, &c(vec![NOISE, NOISE, NOISE])), None);
        assert!(silhouette_score(&dm, &c(vec![0, 0, NOISE])).is_some());
        assert!(matches!(
            silhouette_select(&dm, [&c(vec![0, 0, 0])]),
            Err(Error::NoValidCandidate)
        ));
    }

    #[test]
    fn skips_undefined_and_picks_best() {
        let dm = DistanceMatrix::new(&line(&[0.0, 0.1, 5.0, 5.1]));
        let list = [c(vec![0, 0, 0, 0]), c(vec![0, 1, 1, 1]), c(vec![0, 0, 1, 1])];
        assert_eq!(silhouette_select(&dm, &list).unwrap().0, 2);
    }
}
