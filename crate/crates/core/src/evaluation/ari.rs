use std::collections::HashMap;

use crate::engines::{Clustering, NOISE};
use crate::error::{Error, Result};

/// Dense ids for a labeling; every noise point gets an id of its own.
fn dense_ids<T: Copy + Eq + std::hash::Hash>(labels: impl Iterator<Item = T>, noise: Option<T>) -> Vec<usize> {
    let mut ids: HashMap<T, usize> = HashMap::new();
    let mut next = 0;
    labels
        .map(|l| {
            if Some(l) == noise {
                next += 1;
                return next - 1;
            }
            *ids.entry(l).or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

fn choose2(x: u64) -> i128 {
    let x = x as i128;
    x * (x - 1) / 2
}

fn ari_from_ids(a: &[usize], b: &[usize]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: i128 = table.values().map(|&v| choose2(v)).sum();
    let sa: i128 = rows.values().map(|&v| choose2(v)).sum();
    let sb: i128 = cols.values().map(|&v| choose2(v)).sum();
    let total = choose2(a.len() as u64);
    // Both sides scaled by 2 * total so everything stays integral.
    let num = 2 * total * index - 2 * sa * sb;
    let den = total * (sa + sb) - 2 * sa * sb;
    if den == 0 {
        return 1.0;
    }
    num as f64 / den as f64
}

/// Adjusted Rand index between two labelings of the same instances. Noise
/// labels are singleton clusters on either side.
pub fn ari(a: &[i32], b: &[i32]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let a = dense_ids(a.iter().copied(), Some(NOISE));
    let b = dense_ids(b.iter().copied(), Some(NOISE));
    ari_from_ids(&a, &b)
}

/// ARI of `c` against class `labels`, restricted to `eval_idx`.
pub fn adjusted_rand_index(c: &Clustering, labels: &[usize], eval_idx: &[usize]) -> Result<f64> {
    if eval_idx.len() < 2 {
        return Err(Error::TooFewEvaluationInstances);
    }
    if labels.len() != c.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for a clustering of {} instances",
            labels.len(),
            c.len()
        )));
    }
    if let Some(&bad) = eval_idx.iter().find(|&&i| i >= c.len()) {
        return Err(Error::InvalidArgument(format!("evaluation index {bad} out of range")));
    }
    let a = dense_ids(eval_idx.iter().map(|&i| c.assignment[i]), Some(NOISE));
    let b = dense_ids(eval_idx.iter().map(|&i| labels[i]), None);
    Ok(ari_from_ids(&a, &b))
}
