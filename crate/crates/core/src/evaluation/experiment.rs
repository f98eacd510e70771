use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{adjusted_rand_index, unconstrained_instances};
use crate::constraints::{generate_random_constraints, satisfaction_score, Constraint, ConstraintSet, LabelOracle};
use crate::data::{split_supervision, Dataset};
use crate::engines::{Algorithm, Clustering, ClusteringEnsemble, Provenance};
use crate::error::{Error, Result};
use crate::rng;
use crate::selection::{cobs_select, numsat_select, silhouette_select, ActiveConfig, ActiveSession, DistanceMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    BatchRandom,
    Active,
}

/// Extra methods evaluated on the same splits and constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Highest mean silhouette among the K-means clusterings.
    SilhouetteKmeans,
    /// Batch selection restricted to the K-means clusterings.
    CobsKmeans,
    /// Fewest violated constraints among the K-means clusterings, ties to fewest clusters.
    NumsatKmeans,
}

impl Baseline {
    fn name(self) -> &'static str {
        match self {
            Self::SilhouetteKmeans => "silhouette-kmeans",
            Self::CobsKmeans => "cobs-kmeans",
            Self::NumsatKmeans => "numsat-kmeans",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    /// Increasing constraint counts; in active mode these are checkpoints of one session.
    pub constraint_counts: Vec<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Pool size, update factor and seed offset for active mode. The budget is
    /// the largest constraint count.
    #[serde(default)]
    pub active: ActiveConfig,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub baselines: Vec<Baseline>,
}

fn default_repetitions() -> usize {
    25
}

fn default_mode() -> Mode {
    Mode::BatchRandom
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>, constraint_counts: Vec<usize>, mode: Mode) -> Self {
        Self {
            name: name.into(),
            constraint_counts,
            repetitions: default_repetitions(),
            mode,
            active: ActiveConfig::default(),
            master_seed: 0,
            baselines: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
        }
        if self.constraint_counts.is_empty() {
            return Err(Error::InvalidArgument("no constraint counts given".into()));
        }
        if self.constraint_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("constraint counts must be strictly increasing".into()));
        }
        if self.mode == Mode::Active {
            self.active.validate()?;
        }
        Ok(())
    }

    fn method(&self) -> &'static str {
        match self.mode {
            Mode::BatchRandom => "cobs",
            Mode::Active => "active-cobs",
        }
    }
}

/// Count of selected clusterings per generating algorithm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub kmeans: usize,
    pub dbscan: usize,
    pub spectral: usize,
}

impl Histogram {
    fn add(&mut self, a: Algorithm) {
        match a {
            Algorithm::Kmeans => self.kmeans += 1,
            Algorithm::Dbscan => self.dbscan += 1,
            Algorithm::Spectral => self.spectral += 1,
        }
    }
}

impl std::fmt::Display for Histogram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "K:{}/D:{}/S:{}", self.kmeans, self.dbscan, self.spectral)
    }
}

/// One selection in one repetition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repetition: usize,
    pub method: String,
    pub c: usize,
    /// Seed of the repetition; split, constraint and tie-break seeds derive from it.
    pub seed: u64,
    pub selected: usize,
    pub provenance: Provenance,
    pub ari: f64,
    /// Best ARI of any ensemble member on the same evaluation instances.
    pub best_ari: f64,
    pub score: usize,
    pub max_score: usize,
    pub n_eval: usize,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub method: String,
    pub c: usize,
    pub mean: f64,
    pub std: f64,
    pub best_mean: f64,
    pub runs: Vec<f64>,
    pub histogram: Histogram,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub records: Vec<RunRecord>,
}

impl ResultTable {
    pub fn row(&self, method: &str, c: usize) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.method == method && r.c == c)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,method,c,mean_ari,std_ari,best_in_ensemble,runs,histogram\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{},{}",
                r.dataset,
                r.method,
                r.c,
                r.mean,
                r.std,
                r.best_mean,
                r.runs.len(),
                r.histogram
            );
        }
        out
    }

    /// Writes `results.csv`, `results.json` and `runs.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("results.csv"), self.to_csv())?;
        std::fs::write(dir.join("results.json"), serde_json::to_string_pretty(&self.rows)?)?;
        std::fs::write(dir.join("runs.json"), serde_json::to_string(&self.records)?)?;
        Ok(())
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct Context<'a> {
    d: &'a Dataset,
    labels: &'a [usize],
    ensemble: &'a Arc<ClusteringEnsemble>,
    spec: &'a ExperimentSpec,
    kmeans: Vec<(usize, &'a Clustering)>,
    silhouette_pick: Option<usize>,
}

impl Context<'_> {
    fn record(
        &self,
        repetition: usize,
        seed: u64,
        method: &str,
        selected: usize,
        cs: &ConstraintSet,
    ) -> Result<RunRecord> {
        let eval = unconstrained_instances(self.d.len(), cs);
        let clustering = &self.ensemble.clusterings[selected];
        let ari = adjusted_rand_index(clustering, self.labels, &eval)?;
        let mut best_ari = f64::NEG_INFINITY;
        let mut max_score = 0;
        for c in &self.ensemble.clusterings {
            best_ari = best_ari.max(adjusted_rand_index(c, self.labels, &eval)?);
            max_score = max_score.max(satisfaction_score(c, cs));
        }
        Ok(RunRecord {
            repetition,
            method: method.to_string(),
            c: cs.len(),
            seed,
            selected,
            provenance: clustering.provenance.clone(),
            ari,
            best_ari,
            score: satisfaction_score(clustering, cs),
            max_score,
            n_eval: eval.len(),
            constraints: cs.iter().copied().collect(),
        })
    }

    fn baselines(&self, repetition: usize, seed: u64, cs: &ConstraintSet, out: &mut Vec<RunRecord>) -> Result<()> {
        for &b in &self.spec.baselines {
            let selected = match b {
                Baseline::SilhouetteKmeans => match self.silhouette_pick {
                    Some(i) => i,
                    None => continue,
                },
                Baseline::CobsKmeans => {
                    let sub = ClusteringEnsemble::from_clusterings(
                        self.kmeans.iter().map(|(_, c)| (*c).clone()).collect(),
                    );
                    let s = cobs_select(&sub, cs, rng::derive(seed, 3 + cs.len() as u64))?;
                    self.kmeans[s.index].0
                }
                Baseline::NumsatKmeans => {
                    let s = numsat_select(self.kmeans.iter().map(|(_, c)| *c), cs)?;
                    self.kmeans[s.index].0
                }
            };
            out.push(self.record(repetition, seed, b.name(), selected, cs)?);
        }
        Ok(())
    }

    fn repetition(&self, repetition: usize) -> Result<Vec<RunRecord>> {
        let spec = self.spec;
        let seed = rng::derive(spec.master_seed, repetition as u64);
        let split = split_supervision(self.d, rng::derive(seed, 0))?;
        let mut oracle = LabelOracle::new(self.labels.to_vec());
        let max_c = *spec.constraint_counts.last().expect("validated");
        let mut out = Vec::new();
        match spec.mode {
            Mode::BatchRandom => {
                let all = generate_random_constraints(&split, &mut oracle, max_c, rng::derive(seed, 1))?;
                for &c in &spec.constraint_counts {
                    let cs = all.prefix(c);
                    let s = cobs_select(self.ensemble, &cs, rng::derive(seed, 2 + c as u64))?;
                    let rec = self.record(repetition, seed, spec.method(), s.index, &cs)?;
                    assert_eq!(rec.score, rec.max_score, "selected clustering is not a maximizer");
                    out.push(rec);
                    self.baselines(repetition, seed, &cs, &mut out)?;
                }
            }
            Mode::Active => {
                let config = ActiveConfig {
                    budget: max_c,
                    seed: rng::hash_words(&[seed, 1, spec.active.seed]),
                    ..spec.active
                };
                let mut session = ActiveSession::new(self.ensemble.clone(), &split.supervision, config)?;
                for &c in &spec.constraint_counts {
                    while session.used() < c && !session.is_finished() {
                        let pair = session.next_query()?;
                        let kind = crate::constraints::Oracle::query(&mut oracle, pair)?;
                        session.update(pair, kind)?;
                    }
                    let cs = session.queried().clone();
                    out.push(self.record(repetition, seed, spec.method(), session.result(), &cs)?);
                    self.baselines(repetition, seed, &cs, &mut out)?;
                }
            }
        }
        Ok(out)
    }
}

/// Repeats split, constraint acquisition, selection and evaluation
/// `spec.repetitions` times. Repetitions run in parallel; the output is
/// ordered by repetition and identical for any thread count.
pub fn run_experiment(
    d: &Dataset,
    ensemble: &Arc<ClusteringEnsemble>,
    spec: &ExperimentSpec,
) -> Result<ResultTable> {
    spec.validate()?;
    let labels = d.labels().ok_or(Error::Unlabeled)?;
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if ensemble.n_instances() != d.len() {
        return Err(Error::InvalidArgument(format!(
            "ensemble covers {} instances, dataset has {}",
            ensemble.n_instances(),
            d.len()
        )));
    }
    let kmeans = ensemble.restrict(Algorithm::Kmeans);
    if !spec.baselines.is_empty() && kmeans.is_empty() {
        return Err(Error::InvalidArgument("baselines need K-means clusterings in the ensemble".into()));
    }
    let silhouette_pick = if spec.baselines.contains(&Baseline::SilhouetteKmeans) {
        let dm = DistanceMatrix::new(d);
        let (i, _) = silhouette_select(&dm, kmeans.iter().map(|(_, c)| *c))?;
        Some(kmeans[i].0)
    } else {
        None
    };
    let ctx = Context {
        d,
        labels,
        ensemble,
        spec,
        kmeans,
        silhouette_pick,
    };
    let per_rep: Vec<Vec<RunRecord>> = (0..spec.repetitions)
        .into_par_iter()
        .map(|r| {
            ctx.repetition(r).map_err(|e| Error::Run {
                run: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let records: Vec<RunRecord> = per_rep.into_iter().flatten().collect();

    let mut methods = vec![spec.method()];
    methods.extend(spec.baselines.iter().map(|b| b.name()));
    let mut rows = Vec::new();
    for method in methods {
        for &c in &spec.constraint_counts {
            let runs: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.method == method && r.c == c)
                .collect();
            if runs.is_empty() {
                continue;
            }
            let aris: Vec<f64> = runs.iter().map(|r| r.ari).collect();
            let bests: Vec<f64> = runs.iter().map(|r| r.best_ari).collect();
            let mut histogram = Histogram::default();
            for r in &runs {
                histogram.add(r.provenance.algorithm());
            }
            let (mean, std) = mean_std(&aris);
            rows.push(ResultRow {
                dataset: spec.name.clone(),
                method: method.to_string(),
                c,
                mean,
                std,
                best_mean: mean_std(&bests).0,
                runs: aris,
                histogram,
            });
        }
    }
    Ok(ResultTable { rows, records })
}
