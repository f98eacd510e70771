//! Choosing one clustering from an ensemble.

mod active;
mod silhouette;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use active::{weighted_agreement, ActiveConfig, ActiveSession, AnswerLog};
pub use silhouette::{silhouette_score, silhouette_select, DistanceMatrix};

use crate::constraints::{satisfaction_score, ConstraintSet};
use crate::engines::{Clustering, ClusteringEnsemble};
use crate::error::{Error, Result};
use crate::rng;

/// Index of the chosen clustering and its satisfaction score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub score: usize,
}

/// Satisfaction score of every member, in ensemble order.
pub fn score_all(ensemble: &ClusteringEnsemble, cs: &ConstraintSet) -> Vec<usize> {
    ensemble
        .clusterings
        .par_iter()
        .map(|c| satisfaction_score(c, cs))
        .collect()
}

/// The member satisfying the most constraints; ties are broken uniformly at
/// random with `seed`.
pub fn cobs_select(ensemble: &ClusteringEnsemble, cs: &ConstraintSet, seed: u64) -> Result<Selection> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let scores = score_all(ensemble, cs);
    let best = *scores.iter().max().expect("non-empty");
    let tied: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
    let pick = tied[rng::rng(seed).random_range(0..tied.len())];
    Ok(Selection {
        index: pick,
        score: best,
    })
}

/// Like [`cobs_select`] within a single algorithm's sweep, but ties go to the
/// candidate with the fewest clusters, then the lowest position.
pub fn numsat_select<'a>(
    candidates: impl IntoIterator<Item = &'a Clustering>,
    cs: &ConstraintSet,
) -> Result<Selection> {
    candidates
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i, satisfaction_score(c, cs), c.n_clusters()))
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)).then(a.0.cmp(&b.0)))
        .map(|(index, score, _)| Selection { index, score })
        .ok_or(Error::EmptyEnsemble)
}
