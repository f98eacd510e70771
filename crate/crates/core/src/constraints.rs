//! Pairwise must-link / cannot-link constraints.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::SupervisionSplit;
use crate::engines::Clustering;
use crate::error::{Error, Result};
use crate::rng;

/// An unordered instance pair stored as `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
}

impl Pair {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Self { i: a, j: b }),
            std::cmp::Ordering::Greater => Ok(Self { i: b, j: a }),
            std::cmp::Ordering::Equal => Err(Error::InvalidArgument(format!(
                "a constraint needs two distinct instances, got ({a}, {b})"
            ))),
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.i, self.j)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    #[serde(alias = "MUST_LINK", alias = "ml")]
    MustLink,
    #[serde(alias = "CANNOT_LINK", alias = "cl")]
    CannotLink,
}

impl ConstraintKind {
    pub fn from_same(same: bool) -> Self {
        if same {
            Self::MustLink
        } else {
            Self::CannotLink
        }
    }

    pub fn is_must_link(self) -> bool {
        self == Self::MustLink
    }

    pub fn flipped(self) -> Self {
        Self::from_same(!self.is_must_link())
    }

    /// Whether `c` puts the pair where this kind says it belongs.
    #[inline]
    pub fn satisfied_by(self, c: &Clustering, pair: Pair) -> bool {
        c.same_cluster(pair.i, pair.j) == self.is_must_link()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub i: usize,
    pub j: usize,
    pub kind: ConstraintKind,
}

impl Constraint {
    pub fn pair(&self) -> Pair {
        Pair { i: self.i, j: self.j }
    }
}

/// Must-link and cannot-link pairs in insertion order; a pair appears at most once.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Constraint>", into = "Vec<Constraint>")]
pub struct ConstraintSet {
    items: Vec<Constraint>,
    index: HashMap<Pair, ConstraintKind>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a constraint. Re-adding an identical constraint is a no-op; giving
    /// a known pair the other kind is an error.
    pub fn insert(&mut self, pair: Pair, kind: ConstraintKind) -> Result<()> {
        match self.index.get(&pair) {
            Some(&k) if k == kind => Ok(()),
            Some(_) => Err(Error::InvalidArgument(format!(
                "pair {pair} is both must-link and cannot-link"
            ))),
            None => {
                self.index.insert(pair, kind);
                self.items.push(Constraint {
                    i: pair.i,
                    j: pair.j,
                    kind,
                });
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.items.iter()
    }

    pub fn get(&self, pair: Pair) -> Option<ConstraintKind> {
        self.index.get(&pair).copied()
    }

    pub fn contains(&self, pair: Pair) -> bool {
        self.index.contains_key(&pair)
    }

    pub fn must_link(&self) -> impl Iterator<Item = Pair> + '_ {
        self.items.iter().filter(|c| c.kind.is_must_link()).map(Constraint::pair)
    }

    pub fn cannot_link(&self) -> impl Iterator<Item = Pair> + '_ {
        self.items.iter().filter(|c| !c.kind.is_must_link()).map(Constraint::pair)
    }

    /// The first `len` constraints.
    pub fn prefix(&self, len: usize) -> Self {
        let mut out = Self::new();
        for c in self.items.iter().take(len) {
            out.insert(c.pair(), c.kind).expect("prefix of a consistent set");
        }
        out
    }

    /// Instances named by at least one constraint.
    pub fn involved(&self) -> BTreeSet<usize> {
        self.items.iter().flat_map(|c| [c.i, c.j]).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

impl TryFrom<Vec<Constraint>> for ConstraintSet {
    type Error = Error;

    fn try_from(items: Vec<Constraint>) -> Result<Self> {
        let mut set = Self::new();
        for c in items {
            set.insert(Pair::new(c.i, c.j)?, c.kind)?;
        }
        Ok(set)
    }
}

impl From<ConstraintSet> for Vec<Constraint> {
    fn from(set: ConstraintSet) -> Self {
        set.items
    }
}

/// Answers pairwise queries.
pub trait Oracle {
    fn query(&mut self, pair: Pair) -> Result<ConstraintKind>;
}

/// Simulated oracle answering from class labels, with a log of every answer.
#[derive(Clone, Debug)]
pub struct LabelOracle {
    labels: Vec<usize>,
    log: Vec<Constraint>,
}

impl LabelOracle {
    pub fn new(labels: Vec<usize>) -> Self {
        Self {
            labels,
            log: Vec::new(),
        }
    }

    pub fn answer(&self, pair: Pair) -> ConstraintKind {
        ConstraintKind::from_same(self.labels[pair.i] == self.labels[pair.j])
    }

    pub fn log(&self) -> &[Constraint] {
        &self.log
    }
}

impl Oracle for LabelOracle {
    fn query(&mut self, pair: Pair) -> Result<ConstraintKind> {
        if pair.j >= self.labels.len() {
            return Err(Error::InvalidArgument(format!(
                "pair {pair} out of range for {} labels",
                self.labels.len()
            )));
        }
        let kind = self.answer(pair);
        self.log.push(Constraint {
            i: pair.i,
            j: pair.j,
            kind,
        });
        Ok(kind)
    }
}

/// Maps a linear index over the `s * (s - 1) / 2` unordered pairs of `items`
/// to a canonical pair.
pub(crate) fn nth_pair(items: &[usize], mut k: usize) -> Pair {
    let s = items.len();
    let mut a = 0;
    while k >= s - 1 - a {
        k -= s - 1 - a;
        a += 1;
    }
    Pair::new(items[a], items[a + 1 + k]).expect("distinct items")
}

pub(crate) fn pair_count(s: usize) -> usize {
    s * s.saturating_sub(1) / 2
}

/// Samples `count` distinct pairs of `items` uniformly, in random order.
pub(crate) fn sample_pairs(items: &[usize], count: usize, seed: u64) -> Result<Vec<Pair>> {
    let available = pair_count(items.len());
    if count > available {
        return Err(Error::TooManyConstraints {
            requested: count,
            available,
        });
    }
    let mut r = rng::rng(seed);
    Ok(index::sample(&mut r, available, count)
        .into_iter()
        .map(|k| nth_pair(items, k))
        .collect())
}

/// Draws `count` distinct pairs from the supervision set and labels them with
/// the oracle. The order of the returned set is the draw order, so prefixes
/// are themselves uniform samples.
pub fn generate_random_constraints(
    split: &SupervisionSplit,
    oracle: &mut dyn Oracle,
    count: usize,
    seed: u64,
) -> Result<ConstraintSet> {
    let mut set = ConstraintSet::new();
    if count == 0 {
        return Ok(set);
    }
    let mut items = split.supervision.clone();
    items.sort_unstable();
    items.dedup();
    for pair in sample_pairs(&items, count, seed)? {
        let kind = oracle.query(pair)?;
        set.insert(pair, kind)?;
    }
    Ok(set)
}

/// Number of constraints `c` satisfies. Noise instances are singletons.
pub fn satisfaction_score(c: &Clustering, cs: &ConstraintSet) -> usize {
    cs.iter().filter(|k| k.kind.satisfied_by(c, k.pair())).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::{Provenance, NOISE};
    use proptest::prelude::*;

    fn clustering(assignment: Vec<i32>) -> Clustering {
        Clustering {
            provenance: Provenance::Kmeans { k: 0, seed: 0 },
            assignment,
        }
    }

    fn split(supervision: Vec<usize>) -> SupervisionSplit {
        SupervisionSplit {
            supervision,
            leftout: Vec::new(),
            seed: 0,
        }
    }

    #[test]
    fn pair_is_canonical() {
        assert_eq!(Pair::new(5, 2).unwrap(), Pair { i: 2, j: 5 });
        assert!(Pair::new(3, 3).is_err());
    }

    #[test]
    fn conflicting_kinds_rejected() {
        let mut cs = ConstraintSet::new();
        let p = Pair::new(0, 1).unwrap();
        cs.insert(p, ConstraintKind::MustLink).unwrap();
        cs.insert(p, ConstraintKind::MustLink).unwrap();
        assert_eq!(cs.len(), 1);
        assert!(cs.insert(p, ConstraintKind::CannotLink).is_err());
    }

    #[test]
    fn zero_constraints() {
        let mut o = LabelOracle::new(vec![0, 1, 0]);
        let cs = generate_random_constraints(&split(vec![0, 1, 2]), &mut o, 0, 1).unwrap();
        assert!(cs.is_empty());
    }

    #[test]
    fn forced_must_link() {
        let mut o = LabelOracle::new(vec![9, 4, 4]);
        let cs = generate_random_constraints(&split(vec![1, 2]), &mut o, 1, 3).unwrap();
        assert_eq!(cs.must_link().collect::<Vec<_>>(), vec![Pair { i: 1, j: 2 }]);
        assert_eq!(cs.cannot_link().count(), 0);
    }

    #[test]
    fn too_many_constraints() {
        let mut o = LabelOracle::new(vec![0; 4]);
        let err = generate_random_constraints(&split(vec![0, 1, 2]), &mut o, 4, 0).unwrap_err();
        assert!(matches!(err, Error::TooManyConstraints { requested: 4, available: 3 }));
    }

    #[test]
    fn nth_pair_enumerates_all_pairs() {
        let items = [3, 5, 8, 13];
        let pairs: Vec<Pair> = (0..pair_count(4)).map(|k| nth_pair(&items, k)).collect();
        let expected: Vec<Pair> = (0..4)
            .flat_map(|a| (a + 1..4).map(move |b| Pair::new(items[a], items[b]).unwrap()))
            .collect();
        assert_eq!(pairs, expected);
    }

    #[test]
    fn score_examples() {
        let mut cs = ConstraintSet::new();
        cs.insert(Pair::new(0, 1).unwrap(), ConstraintKind::MustLink).unwrap();
        cs.insert(Pair::new(2, 3).unwrap(), ConstraintKind::CannotLink).unwrap();
        cs.insert(Pair::new(0, 3).unwrap(), ConstraintKind::CannotLink).unwrap();
        // By hand: (0,1) together -> ML satisfied; 3 is noise so it shares no
        // cluster with 2 or 0 -> both CL satisfied.
        assert_eq!(satisfaction_score(&clustering(vec![0, 0, 1, NOISE]), &cs), 3);
        assert_eq!(satisfaction_score(&clustering(vec![0, 0, 0, 0]), &cs), 1);
        assert_eq!(satisfaction_score(&clustering(vec![0, 0, 1, 2]), &cs), 3);

        let noise_pair = {
            let mut s = ConstraintSet::new();
            s.insert(Pair::new(0, 1).unwrap(), ConstraintKind::MustLink).unwrap();
            s
        };
        assert_eq!(satisfaction_score(&clustering(vec![NOISE, NOISE]), &noise_pair), 0);
    }

    #[test]
    fn constraint_json() {
        let mut cs = ConstraintSet::new();
        cs.insert(Pair::new(4, 1).unwrap(), ConstraintKind::CannotLink).unwrap();
        let json = serde_json::to_string(&cs).unwrap();
        assert_eq!(json, r#"[{"i":1,"j":4,"kind":"cannot_link"}]"#);
        let back: ConstraintSet =
            serde_json::from_str(r#"[{"i":4,"j":1,"kind":"CANNOT_LINK"}]"#).unwrap();
        assert_eq!(back, cs);
        assert!(serde_json::from_str::<ConstraintSet>(r#"[{"i":1,"j":1,"kind":"ml"}]"#).is_err());
    }

    fn labels_and_clustering() -> impl Strategy<Value = (Vec<usize>, Vec<i32>)> {
        (4usize..30).prop_flat_map(|n| {
            (
                proptest::collection::vec(0usize..3, n),
                proptest::collection::vec(-1i32..4, n),
            )
        })
    }

    proptest! {
        #[test]
        fn score_bounds_and_relabeling((labels, assignment) in labels_and_clustering(), seed in 0u64..500, c in 0usize..6) {
            let n = labels.len();
            let mut oracle = LabelOracle::new(labels.clone());
            let s = split((0..n).collect());
            let cs = generate_random_constraints(&s, &mut oracle, c, seed).unwrap();
            prop_assert_eq!(cs.len(), c);
            for k in cs.iter() {
                prop_assert_eq!(k.kind.is_must_link(), labels[k.i] == labels[k.j]);
                prop_assert_eq!(oracle.answer(k.pair()), k.kind);
            }
            let a = clustering(assignment.clone());
            let score = satisfaction_score(&a, &cs);
            prop_assert!(score <= cs.len());

            let permuted: Vec<i32> = assignment.iter().map(|&l| if l == NOISE { l } else { 3 - l }).collect();
            prop_assert_eq!(satisfaction_score(&clustering(permuted), &cs), score);

            for (idx, k) in cs.iter().enumerate() {
                let mut flipped = ConstraintSet::new();
                for (jdx, other) in cs.iter().enumerate() {
                    let kind = if jdx == idx { other.kind.flipped() } else { other.kind };
                    flipped.insert(other.pair(), kind).unwrap();
                }
                let before = k.kind.satisfied_by(&a, k.pair()) as i64;
                let delta = satisfaction_score(&a, &flipped) as i64 - score as i64;
                prop_assert_eq!(delta, 1 - 2 * before);
            }
        }
    }
}
