//! Adjusted Rand index and the repeated-split experiment harness.

mod ari;
mod experiment;

pub use ari::{adjusted_rand_index, ari};
pub use experiment::{
    run_experiment, Baseline, ExperimentSpec, Histogram, Mode, ResultRow, ResultTable, RunRecord,
};

use crate::constraints::ConstraintSet;
use crate::data::Dataset;
use crate::engines::Clustering;
use crate::error::{Error, Result};

/// Instances that appear in no constraint of `cs`, ascending.
pub fn unconstrained_instances(n: usize, cs: &ConstraintSet) -> Vec<usize> {
    let mut used = vec![false; n];
    for c in cs.iter() {
        used[c.i] = true;
        used[c.j] = true;
    }
    (0..n).filter(|&i| !used[i]).collect()
}

/// ARI of `selected` against the class labels of `d`, over the instances not
/// involved in any constraint.
pub fn evaluate_selected(selected: &Clustering, d: &Dataset, cs: &ConstraintSet) -> Result<f64> {
    let labels = d.labels().ok_or(Error::Unlabeled)?;
    let eval = unconstrained_instances(d.len(), cs);
    adjusted_rand_index(selected, labels, &eval)
}
