//! Active constraint selection by weighted disagreement.
//!
//! Every clustering carries a weight. The next query is the pool pair on which
//! the weighted "same cluster" and "different cluster" votes are closest.
//! After each answer, clusterings that predicted it are multiplied by `m`, the
//! others divided by `m`. The result is the heaviest clustering.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{
    pair_count, sample_pairs, satisfaction_score, Constraint, ConstraintKind, ConstraintSet,
    Oracle, Pair,
};
use crate::engines::{Clustering, ClusteringEnsemble};
use crate::error::{Error, Result};
use crate::rng;

/// Relative tolerance under which two weights or agreements count as tied.
const TIE_RTOL: f64 = 1e-9;

/// Keeps the result tie-break stream apart from the pool sample.
const RESULT_STREAM: u64 = 0x7265_7375_6c74;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveConfig {
    pub budget: usize,
    /// Weight update factor.
    pub m: f64,
    /// Size of the candidate pool.
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        Self {
            budget: 50,
            m: 2.0,
            sample_size: 1000,
            seed: 0,
        }
    }
}

impl ActiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(Error::InvalidArgument(format!("update factor must be positive, got {}", self.m)));
        }
        if self.sample_size == 0 {
            return Err(Error::InvalidArgument("pool size must be at least 1".into()));
        }
        Ok(())
    }
}

/// `|sum of weights voting same - sum of weights voting different|` for `pair`.
pub fn weighted_agreement(ensemble: &ClusteringEnsemble, pair: Pair) -> f64 {
    agreement(&ensemble.clusterings, &ensemble.weights, pair)
}

#[inline]
fn agreement(clusterings: &[Clustering], weights: &[f64], pair: Pair) -> f64 {
    let mut same = 0.0;
    let mut different = 0.0;
    for (c, &w) in clusterings.iter().zip(weights) {
        if c.same_cluster(pair.i, pair.j) {
            same += w;
        } else {
            different += w;
        }
    }
    (same - different).abs()
}

/// Answers in the order they were given.
pub type AnswerLog = Vec<Constraint>;

/// State of one active selection run. Strictly serial: at most one query is
/// pending at a time.
#[derive(Clone, Debug)]
pub struct ActiveSession {
    ensemble: Arc<ClusteringEnsemble>,
    config: ActiveConfig,
    weights: Vec<f64>,
    pool: Vec<Pair>,
    queried: ConstraintSet,
    pending: Option<Pair>,
    used: usize,
}

impl ActiveSession {
    /// Starts a session whose pool is sampled, uniformly and without
    /// replacement, from the pairs of `candidates`.
    pub fn new(ensemble: Arc<ClusteringEnsemble>, candidates: &[usize], config: ActiveConfig) -> Result<Self> {
        config.validate()?;
        if ensemble.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let mut items = candidates.to_vec();
        items.sort_unstable();
        items.dedup();
        if let Some(&last) = items.last() {
            if last >= ensemble.n_instances() {
                return Err(Error::InvalidArgument(format!(
                    "candidate {last} out of range for {} instances",
                    ensemble.n_instances()
                )));
            }
        }
        let size = config.sample_size.min(pair_count(items.len()));
        let mut pool = sample_pairs(&items, size, config.seed)?;
        pool.sort_unstable();
        let w = 1.0 / ensemble.len() as f64;
        Ok(Self {
            weights: vec![w; ensemble.len()],
            ensemble,
            config,
            pool,
            queried: ConstraintSet::new(),
            pending: None,
            used: 0,
        })
    }

    /// Rebuilds a session by re-asking every query and applying the logged answers.
    pub fn replay(
        ensemble: Arc<ClusteringEnsemble>,
        candidates: &[usize],
        config: ActiveConfig,
        log: &[Constraint],
    ) -> Result<Self> {
        let mut s = Self::new(ensemble, candidates, config)?;
        for entry in log {
            let pair = s.next_query()?;
            if pair != entry.pair() {
                return Err(Error::InvalidArgument(format!(
                    "answer log diverges: expected a query on {pair}, log has {}",
                    entry.pair()
                )));
            }
            s.update(pair, entry.kind)?;
        }
        Ok(s)
    }

    pub fn ensemble(&self) -> &Arc<ClusteringEnsemble> {
        &self.ensemble
    }

    pub fn config(&self) -> &ActiveConfig {
        &self.config
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Multiplies every weight by `factor`. Selection depends only on
    /// weight ratios, so this changes no query and no result.
    pub fn scale_weights(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
    }

    pub fn pool(&self) -> &[Pair] {
        &self.pool
    }

    pub fn queried(&self) -> &ConstraintSet {
        &self.queried
    }

    pub fn answers(&self) -> AnswerLog {
        self.queried.iter().copied().collect()
    }

    pub fn pending(&self) -> Option<Pair> {
        self.pending
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn budget(&self) -> usize {
        self.config.budget
    }

    /// No further query can be asked.
    pub fn is_finished(&self) -> bool {
        self.used >= self.config.budget || (self.pool.is_empty() && self.pending.is_none())
    }

    pub fn agreement(&self, pair: Pair) -> f64 {
        agreement(&self.ensemble.clusterings, &self.weights, pair)
    }

    /// Picks the pool pair with the lowest weighted agreement (lowest pair
    /// among ties) and marks it pending.
    pub fn next_query(&mut self) -> Result<Pair> {
        if self.pending.is_some() {
            return Err(Error::QueryPending);
        }
        if self.used >= self.config.budget {
            return Err(Error::BudgetExhausted);
        }
        if self.pool.is_empty() {
            return Err(Error::PoolExhausted);
        }
        let scores: Vec<f64> = self.pool.iter().map(|&p| self.agreement(p)).collect();
        let lowest = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let total: f64 = self.weights.iter().sum();
        let cutoff = lowest + TIE_RTOL * total;
        let slot = scores
            .iter()
            .position(|&s| s <= cutoff)
            .expect("the minimum is within its own cutoff");
        let pair = self.pool[slot];
        self.pending = Some(pair);
        Ok(pair)
    }

    /// Applies the answer to the pending query.
    pub fn update(&mut self, pair: Pair, kind: ConstraintKind) -> Result<()> {
        if self.pending != Some(pair) {
            return Err(Error::NotPending);
        }
        let m = self.config.m;
        for (c, w) in self.ensemble.clusterings.iter().zip(self.weights.iter_mut()) {
            if kind.satisfied_by(c, pair) {
                *w *= m;
            } else {
                *w /= m;
            }
        }
        self.queried.insert(pair, kind)?;
        if let Ok(slot) = self.pool.binary_search(&pair) {
            self.pool.remove(slot);
        }
        self.pending = None;
        self.used += 1;
        Ok(())
    }

    /// Asks `oracle` until the budget or the pool runs out.
    pub fn run(&mut self, oracle: &mut dyn Oracle) -> Result<()> {
        while !self.is_finished() {
            let pair = self.next_query()?;
            let kind = oracle.query(pair)?;
            self.update(pair, kind)?;
        }
        Ok(())
    }

    /// Index of the heaviest clustering. Near-equal weights fall back to the
    /// satisfaction score on the answered queries; clusterings still tied are
    /// picked uniformly at random, seeded by the session seed and answer count.
    pub fn result(&self) -> usize {
        let heaviest = self.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cutoff = heaviest - TIE_RTOL * heaviest.abs();
        let mut best_score = 0;
        let mut tied = Vec::new();
        for (i, &w) in self.weights.iter().enumerate() {
            if w < cutoff {
                continue;
            }
            let score = satisfaction_score(&self.ensemble.clusterings[i], &self.queried);
            if tied.is_empty() || score > best_score {
                best_score = score;
                tied.clear();
            }
            if score == best_score {
                tied.push(i);
            }
        }
        if tied.len() == 1 {
            return tied[0];
        }
        let seed = rng::hash_words(&[self.config.seed, self.used as u64, RESULT_STREAM]);
        tied[rng::rng(seed).random_range(0..tied.len())]
    }

    pub fn result_clustering(&self) -> &Clustering {
        &self.ensemble.clusterings[self.result()]
    }

    /// Indices of the `k` heaviest clusterings: [`result`](Self::result)
    /// first, then by weight, ties by index.
    pub fn top(&self, k: usize) -> Vec<usize> {
        let first = self.result();
        let mut order: Vec<usize> = (0..self.weights.len()).collect();
        order.sort_by(|&a, &b| {
            (b == first)
                .cmp(&(a == first))
                .then(self.weights[b].total_cmp(&self.weights[a]))
                .then(a.cmp(&b))
        });
        order.truncate(k);
        order
    }
}
